#include "elastoflow/backbone.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "elastoflow/io.hpp"
#include "elastoflow/rng.hpp"
#include "json.hpp"

namespace elastoflow {

using nlohmann::json;

// ----------------------------------------------------------------------
// descriptor

std::string BackboneDescriptor::to_json() const {
  json j;
  j["type"] = type;
  if (type == "tiny_pyramid") {
    j["levels"] = levels;
    j["features"] = features;
    j["seed"] = seed;
  } else if (type == "direct_field") {
    j["rows"] = rows;
    j["cols"] = cols;
    j["control_spacing"] = control_spacing;
  } else {
    throw std::invalid_argument("BackboneDescriptor: unknown type '" + type + "'");
  }
  return j.dump();
}

BackboneDescriptor BackboneDescriptor::from_json(const std::string& text) {
  const json j = json::parse(text);
  BackboneDescriptor d;
  d.type = j.at("type").get<std::string>();
  if (d.type == "tiny_pyramid") {
    d.levels = j.at("levels").get<int>();
    d.features = j.at("features").get<int>();
    d.seed = j.at("seed").get<uint64_t>();
  } else if (d.type == "direct_field") {
    d.rows = j.at("rows").get<int64_t>();
    d.cols = j.at("cols").get<int64_t>();
    d.control_spacing = j.at("control_spacing").get<int64_t>();
  } else {
    throw std::invalid_argument("BackboneDescriptor: unknown type '" + d.type + "'");
  }
  return d;
}

// ----------------------------------------------------------------------
// base helpers

DisplacementField FlowBackbone::estimate(const ChannelStack& stack1, const ChannelStack& stack2) {
  ad::NoGradGuard ng;
  return forward(stack1, stack2).flow.values();
}

int64_t FlowBackbone::parameter_count() const {
  int64_t n = 0;
  for (const Tensor& t : parameters()) n += t.size();
  return n;
}

std::vector<double> FlowBackbone::parameters_flat() const {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(parameter_count()));
  for (const Tensor& t : parameters())
    for (int64_t i = 0; i < t.size(); ++i) flat.push_back(t[i]);
  return flat;
}

void FlowBackbone::set_parameters_flat(const std::vector<double>& flat) {
  if (static_cast<int64_t>(flat.size()) != parameter_count())
    throw std::invalid_argument("set_parameters_flat: size mismatch");
  size_t k = 0;
  for (Tensor& t : parameters())
    for (int64_t i = 0; i < t.size(); ++i) t[i] = flat[k++];
}

BidirectionalFlows estimate_bidirectional(FlowBackbone& backbone, const ChannelStack& stack1,
                                          const ChannelStack& stack2, bool freeze_backward) {
  BidirectionalFlows out;
  out.forward = backbone.forward(stack1, stack2);
  if (freeze_backward) {
    ad::NoGradGuard ng;
    out.backward = backbone.forward(stack2, stack1).flow.values(FlowDirection::backward);
  } else {
    out.backward_recorded = backbone.forward(stack2, stack1);
    out.backward = out.backward_recorded->flow.values(FlowDirection::backward);
  }
  return out;
}

// ----------------------------------------------------------------------
// DirectField

namespace {
int64_t control_dim(int64_t extent, int64_t spacing) {
  return (extent - 1 + spacing - 1) / spacing + 1;  // ceil((extent-1)/spacing) + 1
}
}  // namespace

DirectField::DirectField(int64_t rows, int64_t cols, int64_t control_spacing) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("DirectField: extents must be >= 2");
  if (control_spacing < 1) throw std::invalid_argument("DirectField: control_spacing >= 1");
  desc_.type = "direct_field";
  desc_.rows = rows;
  desc_.cols = cols;
  desc_.control_spacing = control_spacing;
  const int64_t ca = control_dim(rows, control_spacing);
  const int64_t cl = control_dim(cols, control_spacing);
  params_.push_back(Tensor({ca, cl}));
  params_.push_back(Tensor({ca, cl}));
}

DirectField::DirectField(BackboneDescriptor desc)
    : DirectField(desc.rows, desc.cols, desc.control_spacing) {}

FlowEstimate DirectField::forward(const ChannelStack& stack1, const ChannelStack& stack2) {
  if (stack1.axial() != desc_.rows || stack1.lateral() != desc_.cols ||
      stack2.axial() != desc_.rows || stack2.lateral() != desc_.cols)
    throw std::invalid_argument("DirectField: input shape " + stack1.rf.shape_str() +
                                " does not match descriptor (" + std::to_string(desc_.rows) +
                                "," + std::to_string(desc_.cols) + ")");
  FlowEstimate est;
  ad::Var ca = ad::leaf(params_[0]);
  ad::Var cl = ad::leaf(params_[1]);
  const double s = static_cast<double>(desc_.control_spacing);
  est.flow.axial = ad::control_grid_upsample(ca, s, s, desc_.rows, desc_.cols);
  est.flow.lateral = ad::control_grid_upsample(cl, s, s, desc_.rows, desc_.cols);
  if (ad::grad_enabled()) est.param_leaves = {ca, cl};
  return est;
}

DisplacementField DirectField::field() const {
  ad::NoGradGuard ng;
  const double s = static_cast<double>(desc_.control_spacing);
  ad::Var a = ad::control_grid_upsample(ad::constant(params_[0]), s, s, desc_.rows, desc_.cols);
  ad::Var l = ad::control_grid_upsample(ad::constant(params_[1]), s, s, desc_.rows, desc_.cols);
  return {a.value(), l.value(), FlowDirection::forward};
}

// ----------------------------------------------------------------------
// TinyPyramidNet

TinyPyramidNet::TinyPyramidNet(int levels, int features, uint64_t seed) {
  if (levels < 2) throw std::invalid_argument("TinyPyramidNet: levels >= 2");
  if (features < 1) throw std::invalid_argument("TinyPyramidNet: features >= 1");
  desc_.type = "tiny_pyramid";
  desc_.levels = levels;
  desc_.features = features;
  desc_.seed = seed;
  init_weights();
}

TinyPyramidNet::TinyPyramidNet(BackboneDescriptor desc) {
  desc_ = desc;
  if (desc_.levels < 2 || desc_.features < 1)
    throw std::invalid_argument("TinyPyramidNet: bad descriptor");
  init_weights();
}

void TinyPyramidNet::init_weights() {
  const int64_t F = desc_.features;
  const int L = desc_.levels;
  Rng rng(desc_.seed);

  auto conv = [&](int64_t out, int64_t in, double gain) {
    const double std = gain * std::sqrt(2.0 / static_cast<double>(in * 9));
    Tensor w({out, in, 3, 3});
    for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal() * std;
    params_.push_back(std::move(w));
    params_.push_back(Tensor({out}));  // bias, zero
  };

  conv(F, 3, 1.0);                             // encoder level 0
  for (int k = 1; k < L; ++k) conv(F, F, 1.0); // encoder downsampling convs
  conv(F, 2 * F, 1.0);                         // coarsest head, hidden
  conv(2, F, 0.01);                            // coarsest head, flow (small init)
  for (int k = L - 2; k >= 0; --k) {
    conv(F, 2 * F + 2, 1.0);                   // refine head, hidden
    conv(2, F, 0.01);                          // refine head, flow residual
  }
}

FlowEstimate TinyPyramidNet::forward(const ChannelStack& stack1, const ChannelStack& stack2) {
  const int64_t A = stack1.axial(), L = stack1.lateral();
  if (stack2.axial() != A || stack2.lateral() != L)
    throw std::invalid_argument("TinyPyramidNet: stack shapes differ");
  const int64_t m = min_extent();
  if (A < m || L < m)
    throw std::invalid_argument("TinyPyramidNet: extents must be at least " + std::to_string(m) +
                                " (2^(levels-1)); pad the input");
  const int64_t pa = (m - (A % m)) % m;
  const int64_t pl = (m - (L % m)) % m;

  FlowEstimate est;
  std::vector<ad::Var> leaves;
  leaves.reserve(params_.size());
  const bool rec = ad::grad_enabled();
  for (Tensor& p : params_) leaves.push_back(rec ? ad::leaf(p) : ad::constant(p));
  size_t w_idx = 0;
  auto next_conv = [&](const ad::Var& x, int stride) {
    ad::Var w = leaves[w_idx];
    ad::Var b = leaves[w_idx + 1];
    w_idx += 2;
    return ad::conv2d(x, w, b, stride, 1);
  };

  auto pad_stack = [&](const ChannelStack& s) {
    std::vector<ad::Var> ch;
    for (const Tensor* t : {&s.rf, &s.imag_analytic, &s.envelope})
      ch.push_back(ad::constant(pa || pl ? ad::reflect_pad2d(*t, pa, pl) : *t));
    return ad::concat_channels(ch);
  };

  const int NL = desc_.levels;
  constexpr double kSlope = 0.1;

  // Shared feature pyramid for both stacks (same weights, applied twice).
  std::vector<ad::Var> f1(NL), f2(NL);
  {
    const size_t enc_start = w_idx;
    ad::Var x1 = pad_stack(stack1);
    ad::Var x2 = pad_stack(stack2);
    for (int k = 0; k < NL; ++k) {
      const int stride = k == 0 ? 1 : 2;
      w_idx = enc_start + 2 * static_cast<size_t>(k);
      f1[k] = ad::leaky_relu(next_conv(k == 0 ? x1 : f1[k - 1], stride), kSlope);
      w_idx = enc_start + 2 * static_cast<size_t>(k);
      f2[k] = ad::leaky_relu(next_conv(k == 0 ? x2 : f2[k - 1], stride), kSlope);
    }
  }

  auto warp_features = [&](const ad::Var& feat, const ad::Var& flow_chw) {
    ad::Var fa = ad::channel(flow_chw, 0);
    ad::Var fl = ad::channel(flow_chw, 1);
    std::vector<ad::Var> warped;
    const int64_t C = feat.value().dim(0);
    for (int64_t c = 0; c < C; ++c)
      warped.push_back(ad::warp_bilinear(ad::channel(feat, c), fa, fl));
    return ad::concat_channels(warped);
  };

  // Coarse-to-fine flow.
  ad::Var flow;  // (2, h, w) at the current level
  for (int k = NL - 1; k >= 0; --k) {
    ad::Var x;
    ad::Var up;
    if (k == NL - 1) {
      x = ad::concat_channels({f1[k], f2[k]});
    } else {
      const int64_t h = f1[k].value().dim(1), w = f1[k].value().dim(2);
      up = ad::scale(ad::resize_bilinear(flow, h, w), 2.0);
      x = ad::concat_channels({f1[k], warp_features(f2[k], up), up});
    }
    ad::Var hidden = ad::leaky_relu(next_conv(x, 1), kSlope);
    ad::Var out = next_conv(hidden, 1);
    flow = (k == NL - 1) ? out : ad::add(up, out);
    {
      ad::NoGradGuard ng;
      est.pyramid.push_back(DisplacementField{ad::channel(flow, 0).value(),
                                              ad::channel(flow, 1).value(),
                                              FlowDirection::forward});
    }
  }

  est.flow.axial = ad::crop2d(ad::channel(flow, 0), 0, 0, A, L);
  est.flow.lateral = ad::crop2d(ad::channel(flow, 1), 0, 0, A, L);
  if (rec) est.param_leaves = std::move(leaves);
  return est;
}

// ----------------------------------------------------------------------
// factory + checkpoints

std::unique_ptr<FlowBackbone> make_backbone(const BackboneDescriptor& desc) {
  if (desc.type == "tiny_pyramid") return std::make_unique<TinyPyramidNet>(desc);
  if (desc.type == "direct_field") return std::make_unique<DirectField>(desc);
  throw std::invalid_argument("make_backbone: unknown type '" + desc.type + "'");
}

void save_checkpoint(const FlowBackbone& backbone, int64_t step, const std::string& path) {
  json h;
  h["format"] = "elastoflow-ckpt";
  h["version"] = 1;
  h["descriptor"] = json::parse(backbone.descriptor().to_json());
  h["step"] = step;
  h["dtype"] = "f32le";
  json shapes = json::array();
  for (const Tensor& t : backbone.parameters()) {
    json s = json::array();
    for (int64_t d : t.shape()) s.push_back(d);
    shapes.push_back(s);
  }
  h["shapes"] = shapes;
  h["param_count"] = backbone.parameter_count();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << h.dump() << "\n";
  const std::vector<double> flat = backbone.parameters_flat();
  io::detail::write_f32(out, flat.data(), flat.size());
  if (!out) throw std::runtime_error(path + ": write failed");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  json h;
  try {
    h = json::parse(io::detail::read_header_line(in, path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad checkpoint header: " + e.what());
  }
  if (h.value("format", "") != "elastoflow-ckpt")
    throw std::runtime_error(path + ": not an elastoflow checkpoint");
  if (h.at("dtype").get<std::string>() != "f32le")
    throw std::runtime_error(path + ": unsupported dtype");

  LoadedCheckpoint lc;
  lc.backbone = make_backbone(BackboneDescriptor::from_json(h.at("descriptor").dump()));
  lc.step = h.at("step").get<int64_t>();
  const auto count = h.at("param_count").get<int64_t>();
  if (count != lc.backbone->parameter_count())
    throw std::runtime_error(path + ": parameter count does not match descriptor");
  const auto raw = io::detail::read_f32(in, static_cast<size_t>(count), path);
  io::detail::expect_eof(in, path);
  std::vector<double> flat(raw.begin(), raw.end());
  lc.backbone->set_parameters_flat(flat);
  return lc;
}

}  // namespace elastoflow
