#pragma once

#include <string>

#include "elastoflow/tensor.hpp"

namespace elastoflow {

/// One raw RF ultrasound frame. samples is (axial, lateral): rows run along
/// the beam (depth), columns across scan lines.
struct RfFrame {
  Tensor samples;
  double sampling_freq_hz = 0.0;
  double center_freq_hz = 0.0;
  std::string frame_id;

  int64_t axial() const { return samples.dim(0); }
  int64_t lateral() const { return samples.dim(1); }
};

/// Throws std::invalid_argument unless: extents >= 2, all samples finite,
/// frequencies positive, sampling_freq_hz > 2 * center_freq_hz.
void validate(const RfFrame& frame);

RfFrame make_rf_frame(Tensor samples, double sampling_freq_hz, double center_freq_hz,
                      std::string frame_id);

/// `.rfd` file: JSON header line {axial, lateral, sampling_freq_hz,
/// center_freq_hz, frame_id, dtype:"f32le"} then axial-major raw f32 samples.
void save_rfd(const RfFrame& frame, const std::string& path);
RfFrame load_rfd(const std::string& path);

}  // namespace elastoflow
