#pragma once

// Lattices, domains, sampled fields, quadrature and persistence.
#include "wavemoment/domain.hpp"
#include "wavemoment/error.hpp"
#include "wavemoment/expression.hpp"
#include "wavemoment/field.hpp"
#include "wavemoment/field_io.hpp"
#include "wavemoment/lattice.hpp"
#include "wavemoment/presets.hpp"
