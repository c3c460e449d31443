#pragma once

#include <optional>
#include <string>
#include <vector>

#include "elastoflow/tensor.hpp"

namespace elastoflow {

/// Axial strain field: slope of the axial displacement per sample,
/// dimensionless.
struct StrainMap {
  Tensor values;
  int window_len = 0;
};

/// At each pixel, the slope of the least-squares line fitted to the axial
/// displacement over a centered axial window; edge pixels use truncated
/// windows. window_len must be odd, >= 3, and no larger than the axial extent.
StrainMap lsq_strain(const Tensor& w_axial, int window_len);

/// Half-open pixel rectangle [a0, a1) x [l0, l1).
struct WindowRect {
  int64_t a0 = 0, a1 = 0, l0 = 0, l1 = 0;
  int64_t area() const { return (a1 - a0) * (l1 - l0); }
  bool overlaps(const WindowRect& o) const {
    return a0 < o.a1 && o.a0 < a1 && l0 < o.l1 && o.l0 < l1;
  }
};

struct WindowPair {
  WindowRect target;
  WindowRect background;
  std::string label;
};

/// Throws when a rectangle is empty, out of bounds, or the two overlap.
void validate(const WindowPair& pair, int64_t rows, int64_t cols);

struct MetricsEntry {
  std::string label;
  double mean_target = 0.0;
  double mean_background = 0.0;
  double var_target = 0.0;      // population variance
  double var_background = 0.0;
  std::optional<double> sr;     // empty when mean_background == 0
  double cnr = 0.0;             // +inf sentinel when variances vanish but means differ
};

struct MetricsReport {
  std::vector<MetricsEntry> entries;

  std::string to_csv() const;
  std::string to_json() const;
};

/// SR = mean_t / mean_b; CNR = sqrt(2 (mean_b - mean_t)^2 / (var_b + var_t)).
MetricsEntry cnr_sr(const StrainMap& strain, const WindowPair& windows);

MetricsReport evaluate_windows(const StrainMap& strain, const std::vector<WindowPair>& windows);

}  // namespace elastoflow
