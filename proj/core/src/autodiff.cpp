#include "elastoflow/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "detail/bilinear.hpp"

namespace elastoflow::ad {

namespace {

using elastoflow::detail::Bilinear;
using elastoflow::detail::lerp;
using elastoflow::detail::locate;
using elastoflow::detail::sample;

thread_local bool g_grad_enabled = true;

NodePtr make_node(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

void ensure_grad(Node& n) {
  if (!n.grad_ready) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_ready = true;
  }
}

// Attach parents/backprop only when recording and some parent needs grads.
Var finish(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto n = make_node(std::move(value));
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& p : parents)
      if (p.requires_grad()) track = true;
  }
  if (track) {
    n->requires_grad = true;
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backprop = std::move(fn);
  }
  return Var(n);
}

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

Var leaf(Tensor value) {
  auto n = make_node(std::move(value));
  n->requires_grad = g_grad_enabled;
  return Var(n);
}

Var constant(Tensor value) { return Var(make_node(std::move(value))); }

Var detach(const Var& v) { return constant(v.value()); }

void backward(const Var& root) {
  if (!root.valid()) throw std::invalid_argument("backward: invalid root");
  if (root.value().size() != 1) throw std::invalid_argument("backward: root must be scalar");

  // Iterative post-order topological sort (deterministic: parent order).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    n->grad = Tensor::zeros(n->value.shape());
    n->grad_ready = true;
  }
  root.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

// ----------------------------------------------------------------------
// elementwise

Var add(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) throw std::invalid_argument("add: shape mismatch");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return finish(std::move(out), {a, b}, [](Node& n) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *n.parents[static_cast<size_t>(k)];
      if (!p.requires_grad) continue;
      ensure_grad(p);
      for (int64_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) throw std::invalid_argument("sub: shape mismatch");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return finish(std::move(out), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad(pa);
      for (int64_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      for (int64_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) throw std::invalid_argument("mul: shape mismatch");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return finish(std::move(out), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad(pa);
      for (int64_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      for (int64_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  return finish(std::move(out), {a}, [s](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (int64_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * s;
  });
}

Var add_scalar(const Var& a, double c) {
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] += c;
  return finish(std::move(out), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (int64_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
}

Var sub_broadcast(const Var& a, const Var& b) {
  if (b.value().size() != 1) throw std::invalid_argument("sub_broadcast: b must be scalar");
  Tensor out = a.value();
  const double bv = b.value()[0];
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= bv;
  return finish(std::move(out), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad(pa);
      for (int64_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      double s = 0.0;
      for (int64_t i = 0; i < n.grad.size(); ++i) s += n.grad[i];
      pb.grad[0] -= s;
    }
  });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] *= slope;
  return finish(std::move(out), {a}, [slope](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (int64_t i = 0; i < n.grad.size(); ++i)
      p.grad[i] += n.grad[i] * (p.value[i] < 0.0 ? slope : 1.0);
  });
}

Var charbonnier(const Var& a, double gamma, double eps) {
  Tensor out(a.value().shape());
  for (int64_t i = 0; i < out.size(); ++i) {
    const double x = a.value()[i];
    out[i] = std::pow(x * x + eps, gamma);
  }
  return finish(std::move(out), {a}, [gamma, eps](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (int64_t i = 0; i < n.grad.size(); ++i) {
      const double x = p.value[i];
      const double base = x * x + eps;
      // d/dx (base^g) = g * base^(g-1) * 2x = g * value/base * 2x
      p.grad[i] += n.grad[i] * gamma * (n.value[i] / base) * 2.0 * x;
    }
  });
}

// ----------------------------------------------------------------------
// reductions

Var masked_mean(const Var& a, const Mask& mask) {
  const Tensor& v = a.value();
  if (v.rank() != 2 || v.dim(0) != mask.rows || v.dim(1) != mask.cols)
    throw std::invalid_argument("masked_mean: mask/field shape mismatch");
  const int64_t n_in = mask.count();
  if (n_in == 0) throw std::domain_error("masked_mean: empty mask (no inlier pixels)");
  double s = 0.0;
  for (int64_t i = 0; i < v.size(); ++i)
    if (mask.m[static_cast<size_t>(i)]) s += v[i];
  Tensor out = Tensor::scalar(s / static_cast<double>(n_in));
  Mask mcopy = mask;
  return finish(std::move(out), {a}, [mcopy = std::move(mcopy), n_in](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    const double g = n.grad[0] / static_cast<double>(n_in);
    for (int64_t i = 0; i < p.grad.size(); ++i)
      if (mcopy.m[static_cast<size_t>(i)]) p.grad[i] += g;
  });
}

// ----------------------------------------------------------------------
// stencils

Var diff_axial(const Var& a) {
  const Tensor& v = a.value();
  if (v.rank() != 2 || v.dim(0) < 2) throw std::invalid_argument("diff_axial: need rank-2, A>=2");
  const int64_t A = v.dim(0), L = v.dim(1);
  Tensor out({A - 1, L});
  for (int64_t i = 0; i < A - 1; ++i)
    for (int64_t j = 0; j < L; ++j) out.at(i, j) = v.at(i + 1, j) - v.at(i, j);
  return finish(std::move(out), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    const int64_t A1 = n.value.dim(0), L = n.value.dim(1);
    for (int64_t i = 0; i < A1; ++i)
      for (int64_t j = 0; j < L; ++j) {
        const double g = n.grad.at(i, j);
        p.grad.at(i + 1, j) += g;
        p.grad.at(i, j) -= g;
      }
  });
}

Var diff_lateral(const Var& a) {
  const Tensor& v = a.value();
  if (v.rank() != 2 || v.dim(1) < 2) throw std::invalid_argument("diff_lateral: need rank-2, L>=2");
  const int64_t A = v.dim(0), L = v.dim(1);
  Tensor out({A, L - 1});
  for (int64_t i = 0; i < A; ++i)
    for (int64_t j = 0; j < L - 1; ++j) out.at(i, j) = v.at(i, j + 1) - v.at(i, j);
  return finish(std::move(out), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    const int64_t A = n.value.dim(0), L1 = n.value.dim(1);
    for (int64_t i = 0; i < A; ++i)
      for (int64_t j = 0; j < L1; ++j) {
        const double g = n.grad.at(i, j);
        p.grad.at(i, j + 1) += g;
        p.grad.at(i, j) -= g;
      }
  });
}

Var second_diff_axial(const Var& a) {
  const Tensor& v = a.value();
  if (v.rank() != 2 || v.dim(0) < 3)
    throw std::invalid_argument("second_diff_axial: need rank-2, A>=3");
  const int64_t A = v.dim(0), L = v.dim(1);
  Tensor out({A - 2, L});
  for (int64_t i = 0; i < A - 2; ++i)
    for (int64_t j = 0; j < L; ++j)
      out.at(i, j) = v.at(i + 2, j) - 2.0 * v.at(i + 1, j) + v.at(i, j);
  return finish(std::move(out), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    const int64_t A2 = n.value.dim(0), L = n.value.dim(1);
    for (int64_t i = 0; i < A2; ++i)
      for (int64_t j = 0; j < L; ++j) {
        const double g = n.grad.at(i, j);
        p.grad.at(i + 2, j) += g;
        p.grad.at(i + 1, j) -= 2.0 * g;
        p.grad.at(i, j) += g;
      }
  });
}

// ----------------------------------------------------------------------
// sampling

Var warp_bilinear(const Var& image, const Var& flow_axial, const Var& flow_lateral) {
  const Tensor& img = image.value();
  const Tensor& fa = flow_axial.value();
  const Tensor& fl = flow_lateral.value();
  if (img.rank() != 2 || !img.same_shape(fa) || !img.same_shape(fl))
    throw std::invalid_argument("warp_bilinear: shape mismatch");
  const int64_t A = img.dim(0), L = img.dim(1);
  Tensor out({A, L});
  for (int64_t i = 0; i < A; ++i)
    for (int64_t j = 0; j < L; ++j) {
      const Bilinear b = locate(static_cast<double>(i) + fa.at(i, j),
                                static_cast<double>(j) + fl.at(i, j), A, L);
      out.at(i, j) = sample(img, b);
    }
  return finish(std::move(out), {image, flow_axial, flow_lateral}, [](Node& n) {
    Node& pimg = *n.parents[0];
    Node& pfa = *n.parents[1];
    Node& pfl = *n.parents[2];
    const Tensor& img = pimg.value;
    const int64_t A = img.dim(0), L = img.dim(1);
    if (pimg.requires_grad) ensure_grad(pimg);
    if (pfa.requires_grad) ensure_grad(pfa);
    if (pfl.requires_grad) ensure_grad(pfl);
    for (int64_t i = 0; i < A; ++i)
      for (int64_t j = 0; j < L; ++j) {
        const double g = n.grad.at(i, j);
        if (g == 0.0) continue;
        const double rr = static_cast<double>(i) + pfa.value.at(i, j);
        const double cc = static_cast<double>(j) + pfl.value.at(i, j);
        const Bilinear b = locate(rr, cc, A, L);
        const double v00 = img.at(b.r0, b.c0), v01 = img.at(b.r0, b.c1);
        const double v10 = img.at(b.r1, b.c0), v11 = img.at(b.r1, b.c1);
        if (pimg.requires_grad) {
          pimg.grad.at(b.r0, b.c0) += g * (1.0 - b.fr) * (1.0 - b.fc);
          pimg.grad.at(b.r0, b.c1) += g * (1.0 - b.fr) * b.fc;
          pimg.grad.at(b.r1, b.c0) += g * b.fr * (1.0 - b.fc);
          pimg.grad.at(b.r1, b.c1) += g * b.fr * b.fc;
        }
        // Position gradients vanish where the sample is clamped outside.
        const bool r_free = (rr > 0.0 && rr < static_cast<double>(A - 1));
        const bool c_free = (cc > 0.0 && cc < static_cast<double>(L - 1));
        if (pfa.requires_grad && r_free) {
          const double d_dr = lerp(v10, v11, b.fc) - lerp(v00, v01, b.fc);
          pfa.grad.at(i, j) += g * d_dr;
        }
        if (pfl.requires_grad && c_free) {
          const double d_dc = lerp(v01, v11, b.fr) - lerp(v00, v10, b.fr);
          pfl.grad.at(i, j) += g * d_dc;
        }
      }
  });
}

Var resize_bilinear(const Var& a, int64_t rows, int64_t cols) {
  const Tensor& v = a.value();
  const bool chw = (v.rank() == 3);
  if (!chw && v.rank() != 2) throw std::invalid_argument("resize_bilinear: rank 2 or 3");
  const int64_t C = chw ? v.dim(0) : 1;
  const int64_t H = chw ? v.dim(1) : v.dim(0);
  const int64_t W = chw ? v.dim(2) : v.dim(1);
  const double sr = static_cast<double>(H) / static_cast<double>(rows);
  const double sc = static_cast<double>(W) / static_cast<double>(cols);
  Tensor out(chw ? std::vector<int64_t>{C, rows, cols} : std::vector<int64_t>{rows, cols});
  auto src_of = [](int64_t o, double s) { return (static_cast<double>(o) + 0.5) * s - 0.5; };
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < cols; ++j) {
        const Bilinear b = locate(src_of(i, sr), src_of(j, sc), H, W);
        const double v00 = chw ? v.at(c, b.r0, b.c0) : v.at(b.r0, b.c0);
        const double v01 = chw ? v.at(c, b.r0, b.c1) : v.at(b.r0, b.c1);
        const double v10 = chw ? v.at(c, b.r1, b.c0) : v.at(b.r1, b.c0);
        const double v11 = chw ? v.at(c, b.r1, b.c1) : v.at(b.r1, b.c1);
        const double val = lerp(lerp(v00, v01, b.fc), lerp(v10, v11, b.fc), b.fr);
        if (chw)
          out.at(c, i, j) = val;
        else
          out.at(i, j) = val;
      }
  return finish(std::move(out), {a}, [rows, cols, chw, C, H, W, sr, sc](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    auto src_of = [](int64_t o, double s) { return (static_cast<double>(o) + 0.5) * s - 0.5; };
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j) {
          const double g = chw ? n.grad.at(c, i, j) : n.grad.at(i, j);
          if (g == 0.0) continue;
          const Bilinear b = locate(src_of(i, sr), src_of(j, sc), H, W);
          auto acc = [&](int64_t r, int64_t cc2, double w) {
            if (chw)
              p.grad.at(c, r, cc2) += g * w;
            else
              p.grad.at(r, cc2) += g * w;
          };
          acc(b.r0, b.c0, (1.0 - b.fr) * (1.0 - b.fc));
          acc(b.r0, b.c1, (1.0 - b.fr) * b.fc);
          acc(b.r1, b.c0, b.fr * (1.0 - b.fc));
          acc(b.r1, b.c1, b.fr * b.fc);
        }
  });
}

Var control_grid_upsample(const Var& control, double sa, double sl, int64_t rows, int64_t cols) {
  const Tensor& v = control.value();
  if (v.rank() != 2) throw std::invalid_argument("control_grid_upsample: rank-2 control");
  if (sa <= 0.0 || sl <= 0.0) throw std::invalid_argument("control_grid_upsample: spacing > 0");
  const int64_t CA = v.dim(0), CL = v.dim(1);
  Tensor out({rows, cols});
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) {
      const Bilinear b = locate(static_cast<double>(i) / sa, static_cast<double>(j) / sl, CA, CL);
      out.at(i, j) = sample(v, b);
    }
  return finish(std::move(out), {control}, [sa, sl, CA, CL](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    const int64_t rows = n.value.dim(0), cols = n.value.dim(1);
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < cols; ++j) {
        const double g = n.grad.at(i, j);
        if (g == 0.0) continue;
        const Bilinear b =
            locate(static_cast<double>(i) / sa, static_cast<double>(j) / sl, CA, CL);
        p.grad.at(b.r0, b.c0) += g * (1.0 - b.fr) * (1.0 - b.fc);
        p.grad.at(b.r0, b.c1) += g * (1.0 - b.fr) * b.fc;
        p.grad.at(b.r1, b.c0) += g * b.fr * (1.0 - b.fc);
        p.grad.at(b.r1, b.c1) += g * b.fr * b.fc;
      }
  });
}

// ----------------------------------------------------------------------
// conv / structure

Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride, int pad) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  if (x.rank() != 3 || w.rank() != 4) throw std::invalid_argument("conv2d: input CHW, weight OIHW");
  if (w.dim(1) != x.dim(0)) throw std::invalid_argument("conv2d: channel mismatch");
  if (b.rank() != 1 || b.dim(0) != w.dim(0)) throw std::invalid_argument("conv2d: bias shape");
  if (stride < 1) throw std::invalid_argument("conv2d: stride >= 1");
  const int64_t Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int64_t Cout = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const int64_t Ho = (H + 2 * pad - KH) / stride + 1;
  const int64_t Wo = (W + 2 * pad - KW) / stride + 1;
  if (Ho < 1 || Wo < 1) throw std::invalid_argument("conv2d: output would be empty");
  Tensor out({Cout, Ho, Wo});
  for (int64_t co = 0; co < Cout; ++co)
    for (int64_t i = 0; i < Ho; ++i)
      for (int64_t j = 0; j < Wo; ++j) {
        double acc = b[co];
        for (int64_t ci = 0; ci < Cin; ++ci)
          for (int64_t kr = 0; kr < KH; ++kr) {
            const int64_t r = i * stride - pad + kr;
            if (r < 0 || r >= H) continue;
            for (int64_t kc = 0; kc < KW; ++kc) {
              const int64_t c = j * stride - pad + kc;
              if (c < 0 || c >= W) continue;
              acc += x.at(ci, r, c) * w.at4(co, ci, kr, kc);
            }
          }
        out.at(co, i, j) = acc;
      }
  return finish(std::move(out), {input, weight, bias}, [stride, pad](Node& n) {
    Node& px = *n.parents[0];
    Node& pw = *n.parents[1];
    Node& pb = *n.parents[2];
    const Tensor& x = px.value;
    const Tensor& w = pw.value;
    const int64_t Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int64_t Cout = w.dim(0), KH = w.dim(2), KW = w.dim(3);
    const int64_t Ho = n.value.dim(1), Wo = n.value.dim(2);
    if (px.requires_grad) ensure_grad(px);
    if (pw.requires_grad) ensure_grad(pw);
    if (pb.requires_grad) ensure_grad(pb);
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t i = 0; i < Ho; ++i)
        for (int64_t j = 0; j < Wo; ++j) {
          const double g = n.grad.at(co, i, j);
          if (g == 0.0) continue;
          if (pb.requires_grad) pb.grad[co] += g;
          for (int64_t ci = 0; ci < Cin; ++ci)
            for (int64_t kr = 0; kr < KH; ++kr) {
              const int64_t r = i * stride - pad + kr;
              if (r < 0 || r >= H) continue;
              for (int64_t kc = 0; kc < KW; ++kc) {
                const int64_t c = j * stride - pad + kc;
                if (c < 0 || c >= W) continue;
                if (pw.requires_grad) pw.grad.at4(co, ci, kr, kc) += g * x.at(ci, r, c);
                if (px.requires_grad) px.grad.at(ci, r, c) += g * w.at4(co, ci, kr, kc);
              }
            }
        }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: empty");
  int64_t C = 0;
  const int64_t H = parts[0].value().rank() == 3 ? parts[0].value().dim(1) : parts[0].value().dim(0);
  const int64_t W = parts[0].value().rank() == 3 ? parts[0].value().dim(2) : parts[0].value().dim(1);
  std::vector<int64_t> nch;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    int64_t c, h, w;
    if (v.rank() == 3) {
      c = v.dim(0); h = v.dim(1); w = v.dim(2);
    } else if (v.rank() == 2) {
      c = 1; h = v.dim(0); w = v.dim(1);
    } else {
      throw std::invalid_argument("concat_channels: rank 2 or 3");
    }
    if (h != H || w != W) throw std::invalid_argument("concat_channels: spatial mismatch");
    nch.push_back(c);
    C += c;
  }
  Tensor out({C, H, W});
  int64_t off = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    const int64_t len = nch[k] * H * W;
    for (int64_t i = 0; i < len; ++i) out[off * H * W + i] = v[i];
    off += nch[k];
  }
  return finish(std::move(out), parts, [nch, H, W](Node& n) {
    int64_t off = 0;
    for (size_t k = 0; k < n.parents.size(); ++k) {
      Node& p = *n.parents[k];
      const int64_t len = nch[k] * H * W;
      if (p.requires_grad) {
        ensure_grad(p);
        for (int64_t i = 0; i < len; ++i) p.grad[i] += n.grad[off * H * W + i];
      }
      off += nch[k];
    }
  });
}

Var channel(const Var& stack, int64_t c) {
  const Tensor& v = stack.value();
  if (v.rank() != 3 || c < 0 || c >= v.dim(0)) throw std::invalid_argument("channel: bad index");
  const int64_t H = v.dim(1), W = v.dim(2);
  Tensor out({H, W});
  for (int64_t i = 0; i < H * W; ++i) out[i] = v[c * H * W + i];
  return finish(std::move(out), {stack}, [c, H, W](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (int64_t i = 0; i < H * W; ++i) p.grad[c * H * W + i] += n.grad[i];
  });
}

Var crop2d(const Var& a, int64_t r0, int64_t c0, int64_t rows, int64_t cols) {
  const Tensor& v = a.value();
  if (v.rank() != 2) throw std::invalid_argument("crop2d: rank-2");
  if (r0 < 0 || c0 < 0 || r0 + rows > v.dim(0) || c0 + cols > v.dim(1))
    throw std::invalid_argument("crop2d: out of range");
  Tensor out({rows, cols});
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) out.at(i, j) = v.at(r0 + i, c0 + j);
  return finish(std::move(out), {a}, [r0, c0, rows, cols](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < cols; ++j) p.grad.at(r0 + i, c0 + j) += n.grad.at(i, j);
  });
}

Tensor reflect_pad2d(const Tensor& a, int64_t pad_rows, int64_t pad_cols) {
  if (a.rank() != 2) throw std::invalid_argument("reflect_pad2d: rank-2");
  const int64_t A = a.dim(0), L = a.dim(1);
  if (pad_rows >= A || pad_cols >= L)
    throw std::invalid_argument("reflect_pad2d: pad must be smaller than extent");
  Tensor out({A + pad_rows, L + pad_cols});
  for (int64_t i = 0; i < A + pad_rows; ++i) {
    const int64_t si = i < A ? i : 2 * A - 2 - i;
    for (int64_t j = 0; j < L + pad_cols; ++j) {
      const int64_t sj = j < L ? j : 2 * L - 2 - j;
      out.at(i, j) = a.at(si, sj);
    }
  }
  return out;
}

}  // namespace elastoflow::ad
