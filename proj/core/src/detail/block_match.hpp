#pragma once

#include "elastoflow/tensor.hpp"
#include "elastoflow/warp.hpp"

namespace elastoflow::detail {

/// Coarse initializer for the direct variational solver: normalized
/// cross-correlation of envelope blocks on a sparse grid, axial parabolic
/// subpixel refinement, 3x3 median smoothing of the block field, then
/// bilinear interpolation to full resolution.
struct BlockMatchConfig {
  int64_t block_axial = 48;
  int64_t block_lateral = 12;
  int64_t step_axial = 32;
  int64_t step_lateral = 16;
  int64_t search_axial = 0;  // 0 = auto: max(8, 4% of the axial extent)
  int64_t search_lateral = 2;
};

DisplacementField block_match_init(const Tensor& env1, const Tensor& env2,
                                   const BlockMatchConfig& cfg);

}  // namespace elastoflow::detail
