#pragma once

#include "elastoflow/channels.hpp"
#include "elastoflow/tensor.hpp"

namespace elastoflow {

enum class FlowDirection { forward, backward };

/// Dense 2D displacement in pixels: axial(a,l) and lateral(a,l) say where the
/// pixel's content sits in the other frame, i.e. warped(x) = image(x + flow(x)).
struct DisplacementField {
  Tensor axial;
  Tensor lateral;
  FlowDirection direction = FlowDirection::forward;

  static DisplacementField zeros(int64_t a, int64_t l,
                                 FlowDirection dir = FlowDirection::forward) {
    return {Tensor({a, l}), Tensor({a, l}), dir};
  }
  int64_t rows() const { return axial.dim(0); }
  int64_t cols() const { return axial.dim(1); }
};

void validate(const DisplacementField& flow);

enum class OobFill {
  /// Clamp the sample position to the image border (default; pair with the
  /// in_bounds mask so the loss can drop clamped pixels).
  edge_clamp,
  zero,
};

struct WarpResult {
  Tensor image;
  /// 1 where the sample position x + flow(x) fell inside the image.
  Mask in_bounds;
};

/// output(x) = image(x + flow(x)), bilinear.
WarpResult warp_image(const Tensor& image, const DisplacementField& flow,
                      OobFill fill = OobFill::edge_clamp);

struct WarpedStack {
  ChannelStack stack;
  Mask in_bounds;
};
WarpedStack warp_image(const ChannelStack& stack, const DisplacementField& flow,
                       OobFill fill = OobFill::edge_clamp);

struct WarpedFlow {
  DisplacementField flow;
  Mask in_bounds;
};

/// Resample flow_b at positions x + flow_f(x), per component: expresses the
/// backward flow in frame-1 coordinates for the consistency check.
WarpedFlow warp_flow(const DisplacementField& flow_b, const DisplacementField& flow_f);

}  // namespace elastoflow
