#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "wavemoment/error.hpp"
#include "wavemoment/lattice.hpp"

namespace wavemoment {

/// Arithmetic expression in x, y, z (and r = |x|). Supports + - * / ^, unary
/// minus, parentheses, pi, e and the usual elementary functions.
class Expression {
public:
  explicit Expression(std::string text) : text_(std::move(text)) {
    pos_ = 0;
    eval_ = parse_sum();
    skip_space();
    if (pos_ != text_.size()) error("unexpected trailing input");
  }

  double operator()(const Vec3 &x) const { return eval_(x); }
  const std::string &text() const { return text_; }

private:
  using Node = std::function<double(const Vec3 &)>;

  [[noreturn]] void error(const std::string &msg) const {
    fail(ErrorKind::InvalidArgument, "expression '" + text_ + "': " + msg + " at column " + std::to_string(pos_ + 1));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Node parse_sum() {
    Node lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        Node rhs = parse_product();
        lhs = [lhs, rhs](const Vec3 &x) { return lhs(x) + rhs(x); };
      } else if (accept('-')) {
        Node rhs = parse_product();
        lhs = [lhs, rhs](const Vec3 &x) { return lhs(x) - rhs(x); };
      } else {
        return lhs;
      }
    }
  }

  Node parse_product() {
    Node lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        Node rhs = parse_unary();
        lhs = [lhs, rhs](const Vec3 &x) { return lhs(x) * rhs(x); };
      } else if (accept('/')) {
        Node rhs = parse_unary();
        lhs = [lhs, rhs](const Vec3 &x) { return lhs(x) / rhs(x); };
      } else {
        return lhs;
      }
    }
  }

  Node parse_unary() {
    if (accept('-')) {
      Node v = parse_unary();
      return [v](const Vec3 &x) { return -v(x); };
    }
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  // Right-associative; binds tighter than unary minus on its left operand.
  Node parse_power() {
    Node base = parse_atom();
    if (accept('^')) {
      Node exponent = parse_unary();
      return [base, exponent](const Vec3 &x) { return std::pow(base(x), exponent(x)); };
    }
    return base;
  }

  Node parse_atom() {
    skip_space();
    if (pos_ >= text_.size()) error("unexpected end of input");
    const char c = text_[pos_];
    if (accept('(')) {
      Node inner = parse_sum();
      if (!accept(')')) error("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(text_.substr(pos_), &used);
      } catch (const std::exception &) {
        error("bad number");
      }
      pos_ += used;
      return [value](const Vec3 &) { return value; };
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      const std::string name = text_.substr(start, pos_ - start);
      if (name == "x") return [](const Vec3 &p) { return p[0]; };
      if (name == "y") return [](const Vec3 &p) { return p[1]; };
      if (name == "z") return [](const Vec3 &p) { return p[2]; };
      if (name == "r") return [](const Vec3 &p) { return norm(p); };
      if (name == "pi") return [](const Vec3 &) { return std::numbers::pi; };
      if (name == "e") return [](const Vec3 &) { return std::numbers::e; };
      if (!accept('(')) error("unknown identifier '" + name + "'");
      std::vector<Node> args{parse_sum()};
      while (accept(',')) args.push_back(parse_sum());
      if (!accept(')')) error("expected ')' after arguments of " + name);
      return make_call(name, std::move(args));
    }
    error(std::string("unexpected character '") + c + "'");
  }

  Node make_call(const std::string &name, std::vector<Node> args) {
    using Unary = double (*)(double);
    static const std::vector<std::pair<std::string, Unary>> unary{
        {"sin", [](double v) { return std::sin(v); }},   {"cos", [](double v) { return std::cos(v); }},
        {"tan", [](double v) { return std::tan(v); }},   {"exp", [](double v) { return std::exp(v); }},
        {"log", [](double v) { return std::log(v); }},   {"sqrt", [](double v) { return std::sqrt(v); }},
        {"abs", [](double v) { return std::abs(v); }},   {"tanh", [](double v) { return std::tanh(v); }},
        {"atan", [](double v) { return std::atan(v); }}, {"step", [](double v) { return v >= 0.0 ? 1.0 : 0.0; }},
    };
    for (const auto &[n, fn] : unary) {
      if (n != name) continue;
      if (args.size() != 1) error(name + " takes one argument");
      return [fn, a = args[0]](const Vec3 &x) { return fn(a(x)); };
    }
    if (name == "min" || name == "max" || name == "pow") {
      if (args.size() != 2) error(name + " takes two arguments");
      Node a = args[0], b = args[1];
      if (name == "min") return [a, b](const Vec3 &x) { return std::min(a(x), b(x)); };
      if (name == "max") return [a, b](const Vec3 &x) { return std::max(a(x), b(x)); };
      return [a, b](const Vec3 &x) { return std::pow(a(x), b(x)); };
    }
    error("unknown function '" + name + "'");
  }

  std::string text_;
  std::size_t pos_ = 0;
  Node eval_;
};

} // namespace wavemoment
