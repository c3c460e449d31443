#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "elastoflow/autodiff.hpp"
#include "elastoflow/channels.hpp"
#include "elastoflow/loss.hpp"
#include "elastoflow/warp.hpp"

namespace elastoflow {

struct BackboneDescriptor {
  std::string type;  // "tiny_pyramid" | "direct_field"
  // tiny_pyramid
  int levels = 3;
  int features = 8;
  // direct_field
  int64_t rows = 0;
  int64_t cols = 0;
  int64_t control_spacing = 8;
  uint64_t seed = 0;

  std::string to_json() const;
  static BackboneDescriptor from_json(const std::string& text);
};

/// One forward pass. When grad recording is on, `flow` is attached to the
/// parameter leaves listed in `param_leaves` (same order as parameters()).
struct FlowEstimate {
  FlowVars flow;
  std::vector<DisplacementField> pyramid;  // intermediate outputs, coarse to fine
  std::vector<ad::Var> param_leaves;
};

/// Pluggable displacement estimator. Parameters are a list of tensors;
/// checkpoints store them as one flat f32 blob in list order.
class FlowBackbone {
 public:
  virtual ~FlowBackbone() = default;

  virtual const BackboneDescriptor& descriptor() const = 0;
  virtual std::vector<Tensor>& parameters() = 0;
  virtual const std::vector<Tensor>& parameters() const = 0;

  /// Dense forward flow frame1 -> frame2 at full resolution.
  virtual FlowEstimate forward(const ChannelStack& stack1, const ChannelStack& stack2) = 0;

  /// Value-only estimate (no graph).
  DisplacementField estimate(const ChannelStack& stack1, const ChannelStack& stack2);

  int64_t parameter_count() const;
  std::vector<double> parameters_flat() const;
  void set_parameters_flat(const std::vector<double>& flat);
};

/// w_f = estimate(s1, s2), w_b = estimate(s2, s1). With freeze_backward the
/// backward pass runs unrecorded, so no parameter gradients can flow through
/// it (the loss consumes w_b only through the hard mask either way).
struct BidirectionalFlows {
  FlowEstimate forward;
  DisplacementField backward;
  std::optional<FlowEstimate> backward_recorded;  // only when freeze_backward == false
};
BidirectionalFlows estimate_bidirectional(FlowBackbone& backbone, const ChannelStack& stack1,
                                          const ChannelStack& stack2,
                                          bool freeze_backward = true);

/// The displacement field itself as trainable parameters, on a coarse control
/// grid (spacing in pixels, 1 = per-pixel) upsampled bilinearly. estimate()
/// ignores image content.
class DirectField : public FlowBackbone {
 public:
  DirectField(int64_t rows, int64_t cols, int64_t control_spacing = 8);
  explicit DirectField(BackboneDescriptor desc);

  const BackboneDescriptor& descriptor() const override { return desc_; }
  std::vector<Tensor>& parameters() override { return params_; }
  const std::vector<Tensor>& parameters() const override { return params_; }
  FlowEstimate forward(const ChannelStack& stack1, const ChannelStack& stack2) override;

  /// Control-grid planes (axial, lateral), shape (control_rows, control_cols).
  Tensor& axial_control() { return params_[0]; }
  Tensor& lateral_control() { return params_[1]; }
  int64_t control_rows() const { return params_[0].dim(0); }
  int64_t control_cols() const { return params_[0].dim(1); }

  /// Upsample without needing channel stacks.
  DisplacementField field() const;

 private:
  BackboneDescriptor desc_;
  std::vector<Tensor> params_;
};

/// Small coarse-to-fine convolutional estimator: a shared strided-conv
/// feature pyramid, flow regressed at the coarsest level, then upsample,
/// warp the second feature map and refine per level. Intermediate pyramid
/// flows are exposed but receive no loss; only the final output is trained.
class TinyPyramidNet : public FlowBackbone {
 public:
  TinyPyramidNet(int levels, int features, uint64_t seed);
  explicit TinyPyramidNet(BackboneDescriptor desc);

  const BackboneDescriptor& descriptor() const override { return desc_; }
  std::vector<Tensor>& parameters() override { return params_; }
  const std::vector<Tensor>& parameters() const override { return params_; }
  FlowEstimate forward(const ChannelStack& stack1, const ChannelStack& stack2) override;

  int levels() const { return desc_.levels; }
  /// Inputs must be at least this large in both extents; smaller ones are
  /// rejected with the required padding in the message.
  int64_t min_extent() const { return int64_t{1} << (desc_.levels - 1); }

 private:
  void init_weights();

  BackboneDescriptor desc_;
  std::vector<Tensor> params_;
};

std::unique_ptr<FlowBackbone> make_backbone(const BackboneDescriptor& desc);

/// Checkpoint file: one JSON header line (descriptor, shapes, seed, step)
/// followed by the flat little-endian f32 parameter blob. load(save(x)) and
/// save(load(f)) are bit-exact.
void save_checkpoint(const FlowBackbone& backbone, int64_t step, const std::string& path);

struct LoadedCheckpoint {
  std::unique_ptr<FlowBackbone> backbone;
  int64_t step = 0;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace elastoflow
