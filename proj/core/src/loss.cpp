#include "elastoflow/loss.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace elastoflow {

void validate(const LossConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0))
    throw std::invalid_argument("LossConfig: gamma must be in (0, 1]");
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("LossConfig: epsilon must be > 0");
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("LossConfig: alpha must be > 0");
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0 || cfg.lambda3 < 0.0)
    throw std::invalid_argument("LossConfig: lambdas must be nonnegative");
  if (!(cfg.reject_fraction > 0.0 && cfg.reject_fraction < 1.0))
    throw std::invalid_argument("LossConfig: reject_fraction must be in (0, 1)");
}

double charbonnier(double x, const LossConfig& cfg) {
  return std::pow(x * x + cfg.epsilon, cfg.gamma);
}

Tensor charbonnier(const Tensor& x, const LossConfig& cfg) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = charbonnier(x[i], cfg);
  return out;
}

OutlierMask outlier_mask(const DisplacementField& w_f, const DisplacementField& w_b,
                         const LossConfig& cfg) {
  validate(cfg);
  if (!w_f.axial.same_shape(w_b.axial))
    throw std::invalid_argument("outlier_mask: flow shape mismatch");
  const int64_t A = w_f.rows(), L = w_f.cols();
  OutlierMask out;
  out.inlier = Mask(A, L, 0);

  if (cfg.mask_mode == MaskMode::warped) {
    const WarpedFlow wb = warp_flow(w_b, w_f);
    for (int64_t i = 0; i < A; ++i)
      for (int64_t j = 0; j < L; ++j) {
        const double score = std::hypot(w_f.axial.at(i, j) + wb.flow.axial.at(i, j),
                                        w_f.lateral.at(i, j) + wb.flow.lateral.at(i, j));
        out.inlier.at(i, j) = (wb.in_bounds.at(i, j) && score < cfg.alpha) ? 1 : 0;
      }
  } else {
    for (int64_t i = 0; i < A; ++i)
      for (int64_t j = 0; j < L; ++j) {
        const double score = std::hypot(w_f.axial.at(i, j) + w_b.axial.at(i, j),
                                        w_f.lateral.at(i, j) + w_b.lateral.at(i, j));
        out.inlier.at(i, j) = score < cfg.alpha ? 1 : 0;
      }
  }
  out.inlier_fraction = out.inlier.fraction();
  out.frame_accepted = out.inlier_fraction >= 1.0 - cfg.reject_fraction;
  return out;
}

namespace {

Mask intersect(const Mask& a, const Mask& b) {
  Mask out(a.rows, a.cols, 0);
  for (size_t i = 0; i < out.m.size(); ++i) out.m[i] = a.m[i] && b.m[i];
  return out;
}

// Rows [r0, r0+rows) of the mask, all columns up to `cols`.
Mask crop_mask(const Mask& m, int64_t r0, int64_t rows, int64_t cols) {
  Mask out(rows, cols, 0);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) out.at(i, j) = m.at(r0 + i, j);
  return out;
}

ad::Var channel_data_term(const Tensor& c1, const Tensor& c2, const FlowVars& w_f,
                          const Mask& effective, const LossConfig& cfg) {
  ad::Var warped = ad::warp_bilinear(ad::constant(c2), w_f.axial, w_f.lateral);
  ad::Var residual = ad::sub(ad::constant(c1), warped);
  return ad::masked_mean(ad::charbonnier(residual, cfg.gamma, cfg.epsilon), effective);
}

}  // namespace

ad::Var data_loss(const ChannelStack& stack1, const ChannelStack& stack2, const FlowVars& w_f,
                  const OutlierMask& mask, const LossConfig& cfg) {
  validate(cfg);
  if (!stack1.rf.same_shape(stack2.rf) || !stack1.rf.same_shape(w_f.axial.value()))
    throw std::invalid_argument("data_loss: shape mismatch");

  // Pixels whose warp sample is clamped at the border carry no photometric
  // information; drop them alongside mask outliers.
  const WarpResult probe = warp_image(stack1.rf, w_f.values());
  const Mask effective = intersect(mask.inlier, probe.in_bounds);
  if (effective.count() == 0)
    throw std::domain_error("data_loss: no inlier pixels (unusable pair)");

  ad::Var term = ad::add(ad::add(channel_data_term(stack1.rf, stack2.rf, w_f, effective, cfg),
                                 channel_data_term(stack1.imag_analytic, stack2.imag_analytic,
                                                   w_f, effective, cfg)),
                         channel_data_term(stack1.envelope, stack2.envelope, w_f, effective, cfg));
  return ad::scale(term, 1.0 / 3.0);
}

ad::Var smoothness_first(const ad::Var& w_axial, const OutlierMask& mask, const LossConfig& cfg) {
  validate(cfg);
  const Tensor& v = w_axial.value();
  if (v.rank() != 2 || v.dim(0) != mask.inlier.rows || v.dim(1) != mask.inlier.cols)
    throw std::invalid_argument("smoothness_first: field/mask shape mismatch");
  const int64_t A = v.dim(0), L = v.dim(1);

  // Forward differences; the last axial row / lateral column has no stencil
  // and is excluded from both the mean and the average.
  const Mask mask_a = crop_mask(mask.inlier, 0, A - 1, L);
  ad::Var da = ad::diff_axial(w_axial);
  ad::Var mean_a = ad::masked_mean(da, mask_a);
  ad::Var term_a = ad::masked_mean(
      ad::charbonnier(ad::sub_broadcast(da, mean_a), cfg.gamma, cfg.epsilon), mask_a);

  Mask mask_l(A, L - 1, 0);
  for (int64_t i = 0; i < A; ++i)
    for (int64_t j = 0; j < L - 1; ++j) mask_l.at(i, j) = mask.inlier.at(i, j);
  ad::Var dl = ad::diff_lateral(w_axial);
  ad::Var mean_l = ad::masked_mean(dl, mask_l);
  ad::Var term_l = ad::masked_mean(
      ad::charbonnier(ad::sub_broadcast(dl, mean_l), cfg.gamma, cfg.epsilon), mask_l);

  return ad::add(ad::scale(term_a, cfg.lambda1), ad::scale(term_l, cfg.lambda2));
}

ad::Var smoothness_second(const ad::Var& w_axial, const OutlierMask& mask, const LossConfig& cfg) {
  validate(cfg);
  const Tensor& v = w_axial.value();
  if (v.rank() != 2 || v.dim(0) != mask.inlier.rows || v.dim(1) != mask.inlier.cols)
    throw std::invalid_argument("smoothness_second: field/mask shape mismatch");
  const int64_t A = v.dim(0), L = v.dim(1);
  if (cfg.lambda3 == 0.0) return ad::constant(Tensor::scalar(0.0));

  // Central second difference; first and last axial rows excluded.
  const Mask mask_c = crop_mask(mask.inlier, 1, A - 2, L);
  ad::Var d2 = ad::second_diff_axial(w_axial);
  ad::Var term = ad::masked_mean(ad::charbonnier(d2, cfg.gamma, cfg.epsilon), mask_c);
  return ad::scale(term, cfg.lambda3);
}

double data_loss(const ChannelStack& stack1, const ChannelStack& stack2,
                 const DisplacementField& w_f, const OutlierMask& mask, const LossConfig& cfg) {
  ad::NoGradGuard ng;
  FlowVars fv{ad::constant(w_f.axial), ad::constant(w_f.lateral)};
  return data_loss(stack1, stack2, fv, mask, cfg).item();
}

double smoothness_first(const Tensor& w_axial, const OutlierMask& mask, const LossConfig& cfg) {
  ad::NoGradGuard ng;
  return smoothness_first(ad::constant(w_axial), mask, cfg).item();
}

double smoothness_second(const Tensor& w_axial, const OutlierMask& mask, const LossConfig& cfg) {
  ad::NoGradGuard ng;
  return smoothness_second(ad::constant(w_axial), mask, cfg).item();
}

LossBreakdown TotalLossResult::breakdown() const {
  LossBreakdown b;
  if (terms) {
    b.data = terms->data.item();
    b.smooth1 = terms->smooth1.item();
    b.smooth2 = terms->smooth2.item();
    b.total = terms->total.item();
  }
  return b;
}

TotalLossResult total_loss(const ChannelStack& stack1, const ChannelStack& stack2,
                           const FlowVars& w_f, const DisplacementField& w_b,
                           const LossConfig& cfg) {
  TotalLossResult res;
  res.mask = outlier_mask(w_f.values(), w_b, cfg);
  if (!res.mask.frame_accepted) return res;

  TotalLossTerms t;
  t.data = data_loss(stack1, stack2, w_f, res.mask, cfg);
  t.smooth1 = smoothness_first(w_f.axial, res.mask, cfg);
  t.smooth2 = smoothness_second(w_f.axial, res.mask, cfg);
  t.total = ad::add(ad::add(t.data, t.smooth1), t.smooth2);
  res.terms = std::move(t);
  return res;
}

TotalLossResult total_loss(const ChannelStack& stack1, const ChannelStack& stack2,
                           const DisplacementField& w_f, const DisplacementField& w_b,
                           const LossConfig& cfg) {
  ad::NoGradGuard ng;
  FlowVars fv{ad::constant(w_f.axial), ad::constant(w_f.lateral)};
  return total_loss(stack1, stack2, fv, w_b, cfg);
}

namespace {
std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

std::string loss_csv_header() {
  return "step,loss_total,loss_d,loss_s1,loss_s2,inlier_fraction,frame_accepted";
}

std::string loss_csv_row(int64_t step, const TotalLossResult& result) {
  std::string row = std::to_string(step) + ",";
  if (result.terms) {
    const LossBreakdown b = result.breakdown();
    row += fmt_g17(b.total) + "," + fmt_g17(b.data) + "," + fmt_g17(b.smooth1) + "," +
           fmt_g17(b.smooth2) + ",";
  } else {
    row += ",,,,";
  }
  row += fmt_g17(result.mask.inlier_fraction);
  row += result.mask.frame_accepted ? ",1" : ",0";
  return row;
}

}  // namespace elastoflow
