#pragma once

// Scalar precision is fixed at compile time. The library is built twice
// (morph_f32 and morph_f64); each build lives in its own inline namespace so
// both can be linked into one executable.

#include <cstdint>

#ifdef MORPH_DOUBLE
#define MORPH_ABI f64
#else
#define MORPH_ABI f32
#endif

#define MORPH_BEGIN_NAMESPACE \
  namespace morph {           \
  inline namespace MORPH_ABI {
#define MORPH_END_NAMESPACE \
  }                         \
  }

MORPH_BEGIN_NAMESPACE

#ifdef MORPH_DOUBLE
using Real = double;
inline constexpr const char* kRealName = "f64";
#else
using Real = float;
inline constexpr const char* kRealName = "f32";
#endif

MORPH_END_NAMESPACE
