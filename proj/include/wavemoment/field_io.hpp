#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "wavemoment/field.hpp"

namespace wavemoment {

// Binary layout (little-endian):
//   "WMLF" | u32 version | u32 nx, ny, nz | f64 spacing | f64 origin[3] |
//   u8 kind (0 real, 1 complex) | f64 payload (x-fastest, complex interleaved) |
//   mask as packed bits, LSB first.
inline constexpr char kFieldMagic[4] = {'W', 'M', 'L', 'F'};
inline constexpr std::uint32_t kFieldFormatVersion = 1;
inline constexpr std::size_t kFieldHeaderBytes = 4 + 4 + 12 + 8 + 24 + 1;

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T> void put_le(std::vector<char> &out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <class T> T get_le(const char *p) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline std::vector<char> read_all(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open field file " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_all(const std::filesystem::path &path, const std::vector<char> &bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

} // namespace detail

template <class T> std::vector<char> encode_field(const Field<T> &f) {
  std::vector<char> out;
  out.insert(out.end(), kFieldMagic, kFieldMagic + 4);
  detail::put_le<std::uint32_t>(out, kFieldFormatVersion);
  for (int n : f.lattice().dims()) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  detail::put_le<double>(out, f.lattice().spacing());
  for (double o : f.lattice().origin()) detail::put_le<double>(out, o);
  out.push_back(static_cast<char>(is_complex<T>::value ? 1 : 0));
  for (Eigen::Index i = 0; i < f.values().size(); ++i) {
    if constexpr (is_complex<T>::value) {
      detail::put_le<double>(out, f.values()[i].real());
      detail::put_le<double>(out, f.values()[i].imag());
    } else {
      detail::put_le<double>(out, f.values()[i]);
    }
  }
  std::vector<char> bits((f.mask().size() + 7) / 8, 0);
  for (std::size_t i = 0; i < f.mask().size(); ++i)
    if (f.mask()[i]) bits[i / 8] = static_cast<char>(bits[i / 8] | (1 << (i % 8)));
  out.insert(out.end(), bits.begin(), bits.end());
  return out;
}

using AnyField = std::variant<RealField, ComplexField>;

inline AnyField decode_field(const std::vector<char> &bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kFieldMagic, 4) != 0)
    fail(ErrorKind::Format, "not a field file (magic bytes mismatch)");
  if (bytes.size() < kFieldHeaderBytes) fail(ErrorKind::Truncation, "field file header is truncated");
  const char *p = bytes.data() + 4;
  const auto version = detail::get_le<std::uint32_t>(p);
  if (version != kFieldFormatVersion) fail(ErrorKind::Format, "unsupported field format version " + std::to_string(version));
  p += 4;
  Dims dims{};
  for (int a = 0; a < 3; ++a, p += 4) {
    const auto n = detail::get_le<std::uint32_t>(p);
    if (n == 0 || n > (1u << 16)) fail(ErrorKind::Dimension, "field header has invalid dimension " + std::to_string(n));
    dims[a] = static_cast<int>(n);
  }
  const double h = detail::get_le<double>(p);
  p += 8;
  Vec3 origin{};
  for (int a = 0; a < 3; ++a, p += 8) origin[a] = detail::get_le<double>(p);
  const auto kind = static_cast<unsigned char>(*p++);
  if (kind > 1) fail(ErrorKind::Format, "unknown value kind " + std::to_string(kind));
  if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorKind::Format, "field header has invalid spacing");

  const Lattice lattice(origin, h, dims);
  const std::size_t n = lattice.size();
  const std::size_t payload = n * 8 * (kind == 1 ? 2 : 1);
  const std::size_t expected = kFieldHeaderBytes + payload + (n + 7) / 8;
  if (bytes.size() < expected)
    fail(ErrorKind::Truncation, "field payload truncated: expected " + std::to_string(expected) + " bytes, found " +
                                    std::to_string(bytes.size()));
  if (bytes.size() > expected)
    fail(ErrorKind::Dimension, "field payload longer than the header dimensions imply");

  std::vector<std::uint8_t> mask(n);
  const char *bits = bytes.data() + kFieldHeaderBytes + payload;
  for (std::size_t i = 0; i < n; ++i) mask[i] = (static_cast<unsigned char>(bits[i / 8]) >> (i % 8)) & 1u;

  if (kind == 0) {
    RealField::Vector v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i, p += 8) v[static_cast<Eigen::Index>(i)] = detail::get_le<double>(p);
    return RealField(lattice, std::move(v), std::move(mask));
  }
  ComplexField::Vector v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i, p += 16)
    v[static_cast<Eigen::Index>(i)] = Complex(detail::get_le<double>(p), detail::get_le<double>(p + 8));
  return ComplexField(lattice, std::move(v), std::move(mask));
}

template <class T> void persist_field(const Field<T> &f, const std::filesystem::path &path) {
  detail::write_all(path, encode_field(f));
}

inline AnyField load_any_field(const std::filesystem::path &path) { return decode_field(detail::read_all(path)); }

inline RealField load_field(const std::filesystem::path &path) {
  auto any = load_any_field(path);
  if (auto *r = std::get_if<RealField>(&any)) return std::move(*r);
  fail(ErrorKind::Format, path.string() + " holds a complex field, expected real");
}

inline ComplexField load_complex_field(const std::filesystem::path &path) {
  auto any = load_any_field(path);
  if (auto *c = std::get_if<ComplexField>(&any)) return std::move(*c);
  fail(ErrorKind::Format, path.string() + " holds a real field, expected complex");
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One row per lattice point: "x,y,z,value" or "x,y,z,re,im".
template <class T> void export_csv(const Field<T> &f, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << (is_complex<T>::value ? "# x,y,z,re,im\n" : "# x,y,z,value\n");
  for (std::size_t i = 0; i < f.lattice().size(); ++i) {
    const Vec3 x = f.lattice().point(i);
    out << format_double(x[0]) << ',' << format_double(x[1]) << ',' << format_double(x[2]) << ',';
    if constexpr (is_complex<T>::value)
      out << format_double(f[i].real()) << ',' << format_double(f[i].imag()) << '\n';
    else
      out << format_double(f[i]) << '\n';
  }
}

} // namespace wavemoment
