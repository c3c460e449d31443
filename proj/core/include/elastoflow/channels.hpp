#pragma once

#include "elastoflow/rf_frame.hpp"
#include "elastoflow/tensor.hpp"

namespace elastoflow {

/// Complex analytic signal split into planes. real equals the input samples
/// exactly; imag is the discrete Hilbert transform taken per lateral line
/// (full-length frequency-domain method, no windowing).
struct AnalyticSignal {
  Tensor real;
  Tensor imag;
};

/// Three-channel network input. The identity
/// envelope^2 == rf^2 + imag_analytic^2 holds pixelwise (up to rounding);
/// a shared normalization scale preserves it.
struct ChannelStack {
  Tensor rf;
  Tensor imag_analytic;
  Tensor envelope;

  int64_t axial() const { return rf.dim(0); }
  int64_t lateral() const { return rf.dim(1); }
};

enum class NormalizePolicy {
  none,
  /// Scale all three channels by 1/std(rf) of this frame (one shared factor).
  shared_unit_std,
};

AnalyticSignal analytic_signal(const RfFrame& frame);

/// Magnitude of the analytic signal, elementwise; nonnegative.
Tensor envelope(const RfFrame& frame);

ChannelStack build_channel_stack(const RfFrame& frame,
                                 NormalizePolicy policy = NormalizePolicy::shared_unit_std);

}  // namespace elastoflow
