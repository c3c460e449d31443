#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "elastoflow/tensor.hpp"

namespace elastoflow::io {

/// Multi-plane field file: one UTF-8 JSON header line terminated by '\n',
/// followed by `planes` dense little-endian f32 planes in axial-major order.
/// Used for ground-truth/estimated flow (2 planes) and strain maps (1 plane).
struct FieldFile {
  int64_t axial = 0;
  int64_t lateral = 0;
  std::string kind;      // "flow", "strain", ...
  std::string frame_id;  // optional provenance tag
  std::vector<Tensor> planes;
};

void write_field_file(const std::string& path, const std::vector<const Tensor*>& planes,
                      const std::string& kind, const std::string& frame_id = "");
FieldFile read_field_file(const std::string& path);

namespace detail {
std::string read_header_line(std::istream& in, const std::string& path);
std::vector<float> read_f32(std::istream& in, size_t count, const std::string& path);
void write_f32(std::ostream& out, const double* data, size_t count);
void expect_eof(std::istream& in, const std::string& path);
}  // namespace detail

}  // namespace elastoflow::io
