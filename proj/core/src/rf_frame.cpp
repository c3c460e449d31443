#include "elastoflow/rf_frame.hpp"

#include <fstream>
#include <stdexcept>

#include "elastoflow/io.hpp"
#include "json.hpp"

namespace elastoflow {

using nlohmann::json;

void validate(const RfFrame& frame) {
  if (frame.samples.rank() != 2)
    throw std::invalid_argument("RfFrame: samples must be rank-2 (axial, lateral)");
  if (frame.axial() < 2 || frame.lateral() < 2)
    throw std::invalid_argument("RfFrame: axial and lateral extents must be >= 2");
  if (!frame.samples.all_finite())
    throw std::invalid_argument("RfFrame '" + frame.frame_id + "': non-finite sample values");
  if (frame.sampling_freq_hz <= 0.0 || frame.center_freq_hz <= 0.0)
    throw std::invalid_argument("RfFrame: frequencies must be positive");
  if (frame.sampling_freq_hz <= 2.0 * frame.center_freq_hz)
    throw std::invalid_argument("RfFrame '" + frame.frame_id +
                                "': sampling_freq_hz must exceed 2 x center_freq_hz (Nyquist)");
}

RfFrame make_rf_frame(Tensor samples, double sampling_freq_hz, double center_freq_hz,
                      std::string frame_id) {
  RfFrame f{std::move(samples), sampling_freq_hz, center_freq_hz, std::move(frame_id)};
  validate(f);
  return f;
}

void save_rfd(const RfFrame& frame, const std::string& path) {
  validate(frame);
  json h;
  h["axial"] = frame.axial();
  h["lateral"] = frame.lateral();
  h["sampling_freq_hz"] = frame.sampling_freq_hz;
  h["center_freq_hz"] = frame.center_freq_hz;
  h["frame_id"] = frame.frame_id;
  h["dtype"] = "f32le";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << h.dump() << "\n";
  io::detail::write_f32(out, frame.samples.data(), static_cast<size_t>(frame.samples.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

RfFrame load_rfd(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  json h;
  try {
    h = json::parse(io::detail::read_header_line(in, path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad header JSON: " + e.what());
  }
  const int64_t axial = h.at("axial").get<int64_t>();
  const int64_t lateral = h.at("lateral").get<int64_t>();
  if (h.at("dtype").get<std::string>() != "f32le")
    throw std::runtime_error(path + ": unsupported dtype");
  if (axial < 2 || lateral < 2) throw std::runtime_error(path + ": invalid extents in header");
  const size_t n = static_cast<size_t>(axial * lateral);
  const auto raw = io::detail::read_f32(in, n, path);
  io::detail::expect_eof(in, path);
  Tensor samples({axial, lateral});
  for (size_t i = 0; i < n; ++i) samples[static_cast<int64_t>(i)] = static_cast<double>(raw[i]);
  RfFrame f{std::move(samples), h.at("sampling_freq_hz").get<double>(),
            h.at("center_freq_hz").get<double>(), h.at("frame_id").get<std::string>()};
  validate(f);
  return f;
}

}  // namespace elastoflow
