#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "elastoflow/tensor.hpp"

namespace elastoflow::detail {

struct Bilinear {
  int64_t r0, r1, c0, c1;
  double fr, fc;
  bool oob;
};

// Clamp-to-edge bilinear setup at continuous position (rr, cc).
inline Bilinear locate(double rr, double cc, int64_t rows, int64_t cols) {
  Bilinear b{};
  b.oob = (rr < 0.0 || rr > static_cast<double>(rows - 1) || cc < 0.0 ||
           cc > static_cast<double>(cols - 1));
  const double rcl = std::clamp(rr, 0.0, static_cast<double>(rows - 1));
  const double ccl = std::clamp(cc, 0.0, static_cast<double>(cols - 1));
  b.r0 = static_cast<int64_t>(std::floor(rcl));
  b.c0 = static_cast<int64_t>(std::floor(ccl));
  if (b.r0 > rows - 2) b.r0 = std::max<int64_t>(0, rows - 2);
  if (b.c0 > cols - 2) b.c0 = std::max<int64_t>(0, cols - 2);
  b.r1 = std::min(b.r0 + 1, rows - 1);
  b.c1 = std::min(b.c0 + 1, cols - 1);
  b.fr = rcl - static_cast<double>(b.r0);
  b.fc = ccl - static_cast<double>(b.c0);
  // Keep sampling exactly on a node bit-exact (possible at the upper edge,
  // where the cell origin was clamped and the fraction hits 1).
  if (b.fr == 1.0) {
    b.r0 = b.r1;
    b.fr = 0.0;
  }
  if (b.fc == 1.0) {
    b.c0 = b.c1;
    b.fc = 0.0;
  }
  return b;
}

// lerp keeps t == 0 exact (a + 0*(b-a) == a bitwise) and is exact for
// constant fields; both matter for the identity-warp contracts.
inline double lerp(double a, double b, double t) { return a + t * (b - a); }

inline double sample(const Tensor& img, const Bilinear& b) {
  const double v00 = img.at(b.r0, b.c0), v01 = img.at(b.r0, b.c1);
  const double v10 = img.at(b.r1, b.c0), v11 = img.at(b.r1, b.c1);
  return lerp(lerp(v00, v01, b.fc), lerp(v10, v11, b.fc), b.fr);
}

}  // namespace elastoflow::detail
