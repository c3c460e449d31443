#pragma once

#include <optional>
#include <string>

#include "elastoflow/autodiff.hpp"
#include "elastoflow/channels.hpp"
#include "elastoflow/warp.hpp"

namespace elastoflow {

/// How the backward flow enters the forward/backward consistency check.
enum class MaskMode {
  /// Compare w_f(x) with w_b evaluated at x + w_f(x) (backward flow warped
  /// into frame-1 coordinates). Default.
  warped,
  /// Compare w_f(x) with w_b(x) as written.
  literal,
};

struct LossConfig {
  double gamma = 0.2;       // Charbonnier exponent
  double epsilon = 1e-8;    // Charbonnier offset; keeps the penalty smooth at 0
  double alpha = 1.0;       // consistency threshold, pixels
  double lambda1 = 0.5;     // axial first-derivative weight
  double lambda2 = 0.005;   // lateral first-derivative weight
  double lambda3 = 0.2;     // second axial derivative weight
  double reject_fraction = 0.5;  // frame rejected when outliers exceed this fraction
  MaskMode mask_mode = MaskMode::warped;
};

/// Throws std::invalid_argument when out of range (gamma in (0,1], epsilon>0,
/// alpha>0, lambdas>=0, reject_fraction in (0,1)).
void validate(const LossConfig& cfg);

/// Per-pixel reliability map plus the frame-acceptance verdict.
/// frame_accepted <=> inlier_fraction >= 1 - reject_fraction (boundary kept).
struct OutlierMask {
  Mask inlier;
  double inlier_fraction = 0.0;
  bool frame_accepted = false;
};

// ----- elementwise penalty -----
double charbonnier(double x, const LossConfig& cfg);
Tensor charbonnier(const Tensor& x, const LossConfig& cfg);

/// Inlier at x <=> ||w_f(x) + w~_b(x)||_2 < alpha, where w~_b is w_b warped by
/// w_f (MaskMode::warped) or w_b itself (MaskMode::literal). Pixels whose warp
/// sample fell out of bounds are outliers in warped mode.
OutlierMask outlier_mask(const DisplacementField& w_f, const DisplacementField& w_b,
                         const LossConfig& cfg);

// ----- loss terms, autodiff route -----
// The plain-value overloads below wrap these with grad recording off; values
// are bit-identical either way. The mask is a hard gate computed from flow
// values: no gradient flows through it.

struct FlowVars {
  ad::Var axial;
  ad::Var lateral;

  DisplacementField values(FlowDirection dir = FlowDirection::forward) const {
    return {axial.value(), lateral.value(), dir};
  }
};

/// Mean over inlier, in-bounds pixels of charbonnier(I1 - warp(I2, w_f)),
/// per channel, averaged over the three channels with equal weight.
/// Throws std::domain_error when no pixel survives the mask.
ad::Var data_loss(const ChannelStack& stack1, const ChannelStack& stack2, const FlowVars& w_f,
                  const OutlierMask& mask, const LossConfig& cfg);

/// lambda1 * <charb(d_a w - <d_a w>)> + lambda2 * <charb(d_l w - <d_l w>)>,
/// forward differences, means and outer averages over inlier pixels.
ad::Var smoothness_first(const ad::Var& w_axial, const OutlierMask& mask, const LossConfig& cfg);

/// lambda3 * <charb(d2_a w)> over inlier pixels, central second difference.
ad::Var smoothness_second(const ad::Var& w_axial, const OutlierMask& mask, const LossConfig& cfg);

// ----- plain-value overloads -----
double data_loss(const ChannelStack& stack1, const ChannelStack& stack2,
                 const DisplacementField& w_f, const OutlierMask& mask, const LossConfig& cfg);
double smoothness_first(const Tensor& w_axial, const OutlierMask& mask, const LossConfig& cfg);
double smoothness_second(const Tensor& w_axial, const OutlierMask& mask, const LossConfig& cfg);

// ----- total loss -----
struct LossBreakdown {
  double data = 0.0;
  double smooth1 = 0.0;
  double smooth2 = 0.0;
  double total = 0.0;  // always data + smooth1 + smooth2
};

struct TotalLossTerms {
  ad::Var total;
  ad::Var data;
  ad::Var smooth1;
  ad::Var smooth2;
};

/// Mask first, then the three terms; consistency is enforced by the hard mask,
/// not an additive penalty. `terms` is empty when the frame is rejected, so a
/// training loop can skip the pair.
struct TotalLossResult {
  OutlierMask mask;
  std::optional<TotalLossTerms> terms;

  bool frame_accepted() const { return mask.frame_accepted; }
  LossBreakdown breakdown() const;
};

TotalLossResult total_loss(const ChannelStack& stack1, const ChannelStack& stack2,
                           const FlowVars& w_f, const DisplacementField& w_b,
                           const LossConfig& cfg);

/// Value-only convenience.
TotalLossResult total_loss(const ChannelStack& stack1, const ChannelStack& stack2,
                           const DisplacementField& w_f, const DisplacementField& w_b,
                           const LossConfig& cfg);

/// "step,loss_total,loss_d,loss_s1,loss_s2,inlier_fraction,frame_accepted";
/// loss columns are empty for rejected frames.
std::string loss_csv_header();
std::string loss_csv_row(int64_t step, const TotalLossResult& result);

}  // namespace elastoflow
