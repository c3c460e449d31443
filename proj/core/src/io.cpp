#include "elastoflow/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "field files are little-endian; big-endian hosts unsupported");

namespace elastoflow::io {

using nlohmann::json;

namespace detail {

std::string read_header_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header line");
  return line;
}

std::vector<float> read_f32(std::istream& in, size_t count, const std::string& path) {
  std::vector<float> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<size_t>(in.gcount()) != count * sizeof(float))
    throw std::runtime_error(path + ": truncated sample data (declared size exceeds file length)");
  return buf;
}

void write_f32(std::ostream& out, const double* data, size_t count) {
  std::vector<float> buf(count);
  for (size_t i = 0; i < count; ++i) buf[i] = static_cast<float>(data[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
}

void expect_eof(std::istream& in, const std::string& path) {
  char c;
  if (in.read(&c, 1))
    throw std::runtime_error(path + ": trailing bytes beyond declared size");
}

}  // namespace detail

void write_field_file(const std::string& path, const std::vector<const Tensor*>& planes,
                      const std::string& kind, const std::string& frame_id) {
  if (planes.empty()) throw std::invalid_argument("write_field_file: no planes");
  const Tensor& first = *planes[0];
  if (first.rank() != 2) throw std::invalid_argument("write_field_file: planes must be rank-2");
  for (const Tensor* p : planes)
    if (!p->same_shape(first)) throw std::invalid_argument("write_field_file: plane shape mismatch");

  json h;
  h["axial"] = first.dim(0);
  h["lateral"] = first.dim(1);
  h["planes"] = planes.size();
  h["dtype"] = "f32le";
  h["kind"] = kind;
  if (!frame_id.empty()) h["frame_id"] = frame_id;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << h.dump() << "\n";
  for (const Tensor* p : planes)
    detail::write_f32(out, p->data(), static_cast<size_t>(p->size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

FieldFile read_field_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  json h;
  try {
    h = json::parse(detail::read_header_line(in, path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad header JSON: " + e.what());
  }
  FieldFile f;
  f.axial = h.at("axial").get<int64_t>();
  f.lateral = h.at("lateral").get<int64_t>();
  const int64_t planes = h.at("planes").get<int64_t>();
  if (h.at("dtype").get<std::string>() != "f32le")
    throw std::runtime_error(path + ": unsupported dtype");
  f.kind = h.value("kind", "");
  f.frame_id = h.value("frame_id", "");
  if (f.axial < 1 || f.lateral < 1 || planes < 1)
    throw std::runtime_error(path + ": invalid dimensions in header");
  const size_t n = static_cast<size_t>(f.axial * f.lateral);
  for (int64_t p = 0; p < planes; ++p) {
    const auto raw = detail::read_f32(in, n, path);
    Tensor t({f.axial, f.lateral});
    for (size_t i = 0; i < n; ++i) t[static_cast<int64_t>(i)] = static_cast<double>(raw[i]);
    f.planes.push_back(std::move(t));
  }
  detail::expect_eof(in, path);
  return f;
}

}  // namespace elastoflow::io
