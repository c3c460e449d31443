#include "elastoflow/warp.hpp"

#include <stdexcept>

#include "detail/bilinear.hpp"

namespace elastoflow {

void validate(const DisplacementField& flow) {
  if (flow.axial.rank() != 2 || !flow.axial.same_shape(flow.lateral))
    throw std::invalid_argument("DisplacementField: axial/lateral must be rank-2, same shape");
  if (!flow.axial.all_finite() || !flow.lateral.all_finite())
    throw std::invalid_argument("DisplacementField: non-finite displacement values");
}

WarpResult warp_image(const Tensor& image, const DisplacementField& flow, OobFill fill) {
  if (image.rank() != 2) throw std::invalid_argument("warp_image: image must be rank-2");
  if (!image.same_shape(flow.axial))
    throw std::invalid_argument("warp_image: image/flow shape mismatch");
  validate(flow);
  const int64_t A = image.dim(0), L = image.dim(1);
  WarpResult res{Tensor({A, L}), Mask(A, L, 1)};
  for (int64_t i = 0; i < A; ++i)
    for (int64_t j = 0; j < L; ++j) {
      const detail::Bilinear b = detail::locate(static_cast<double>(i) + flow.axial.at(i, j),
                                                static_cast<double>(j) + flow.lateral.at(i, j),
                                                A, L);
      if (b.oob) {
        res.in_bounds.at(i, j) = 0;
        res.image.at(i, j) = (fill == OobFill::zero) ? 0.0 : detail::sample(image, b);
      } else {
        res.image.at(i, j) = detail::sample(image, b);
      }
    }
  return res;
}

WarpedStack warp_image(const ChannelStack& stack, const DisplacementField& flow, OobFill fill) {
  WarpResult rf = warp_image(stack.rf, flow, fill);
  WarpResult im = warp_image(stack.imag_analytic, flow, fill);
  WarpResult env = warp_image(stack.envelope, flow, fill);
  return {ChannelStack{std::move(rf.image), std::move(im.image), std::move(env.image)},
          std::move(rf.in_bounds)};
}

WarpedFlow warp_flow(const DisplacementField& flow_b, const DisplacementField& flow_f) {
  if (!flow_b.axial.same_shape(flow_f.axial))
    throw std::invalid_argument("warp_flow: shape mismatch");
  WarpResult a = warp_image(flow_b.axial, flow_f);
  WarpResult l = warp_image(flow_b.lateral, flow_f);
  return {DisplacementField{std::move(a.image), std::move(l.image), flow_b.direction},
          std::move(a.in_bounds)};
}

}  // namespace elastoflow
