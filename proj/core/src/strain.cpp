#include "elastoflow/strain.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace elastoflow {

StrainMap lsq_strain(const Tensor& w_axial, int window_len) {
  if (w_axial.rank() != 2) throw std::invalid_argument("lsq_strain: field must be rank-2");
  const int64_t A = w_axial.dim(0), L = w_axial.dim(1);
  if (window_len < 3 || window_len % 2 == 0)
    throw std::invalid_argument("lsq_strain: window_len must be odd and >= 3");
  if (window_len > A)
    throw std::invalid_argument("lsq_strain: window_len exceeds the axial extent");

  const int64_t h = (window_len - 1) / 2;
  StrainMap out{Tensor({A, L}), window_len};
  for (int64_t j = 0; j < L; ++j)
    for (int64_t i = 0; i < A; ++i) {
      const int64_t lo = std::max<int64_t>(0, i - h);
      const int64_t hi = std::min<int64_t>(A - 1, i + h);
      const int64_t n = hi - lo + 1;
      double sum_k = 0.0, sum_w = 0.0;
      for (int64_t k = lo; k <= hi; ++k) {
        sum_k += static_cast<double>(k);
        sum_w += w_axial.at(k, j);
      }
      const double kbar = sum_k / static_cast<double>(n);
      const double wbar = sum_w / static_cast<double>(n);
      double num = 0.0, den = 0.0;
      for (int64_t k = lo; k <= hi; ++k) {
        const double dk = static_cast<double>(k) - kbar;
        num += dk * (w_axial.at(k, j) - wbar);
        den += dk * dk;
      }
      out.values.at(i, j) = num / den;
    }
  return out;
}

void validate(const WindowPair& pair, int64_t rows, int64_t cols) {
  auto check = [&](const WindowRect& r, const char* name) {
    if (r.a0 < 0 || r.l0 < 0 || r.a1 > rows || r.l1 > cols || r.a0 >= r.a1 || r.l0 >= r.l1)
      throw std::invalid_argument("window '" + pair.label + "': " + name +
                                  " rectangle empty or out of bounds");
  };
  check(pair.target, "target");
  check(pair.background, "background");
  if (pair.target.overlaps(pair.background))
    throw std::invalid_argument("window '" + pair.label + "': target and background overlap");
}

namespace {

struct Stats {
  double mean = 0.0;
  double var = 0.0;  // population
};

Stats window_stats(const Tensor& field, const WindowRect& r) {
  double s = 0.0;
  const double n = static_cast<double>(r.area());
  for (int64_t i = r.a0; i < r.a1; ++i)
    for (int64_t j = r.l0; j < r.l1; ++j) s += field.at(i, j);
  const double mean = s / n;
  double acc = 0.0;
  for (int64_t i = r.a0; i < r.a1; ++i)
    for (int64_t j = r.l0; j < r.l1; ++j) {
      const double d = field.at(i, j) - mean;
      acc += d * d;
    }
  return {mean, acc / n};
}

std::string fmt_g17(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

MetricsEntry cnr_sr(const StrainMap& strain, const WindowPair& windows) {
  validate(windows, strain.values.dim(0), strain.values.dim(1));
  const Stats t = window_stats(strain.values, windows.target);
  const Stats b = window_stats(strain.values, windows.background);

  MetricsEntry e;
  e.label = windows.label;
  e.mean_target = t.mean;
  e.mean_background = b.mean;
  e.var_target = t.var;
  e.var_background = b.var;
  if (b.mean != 0.0) e.sr = t.mean / b.mean;

  const double diff = b.mean - t.mean;
  const double var_sum = b.var + t.var;
  if (var_sum > 0.0)
    e.cnr = std::sqrt(2.0 * diff * diff / var_sum);
  else
    e.cnr = (diff == 0.0) ? 0.0 : std::numeric_limits<double>::infinity();
  return e;
}

MetricsReport evaluate_windows(const StrainMap& strain, const std::vector<WindowPair>& windows) {
  MetricsReport report;
  for (const WindowPair& w : windows) report.entries.push_back(cnr_sr(strain, w));
  return report;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "label,mean_target,mean_background,var_target,var_background,sr,cnr\n";
  for (const MetricsEntry& e : entries) {
    os << e.label << "," << fmt_g17(e.mean_target) << "," << fmt_g17(e.mean_background) << ","
       << fmt_g17(e.var_target) << "," << fmt_g17(e.var_background) << ","
       << (e.sr ? fmt_g17(*e.sr) : std::string()) << "," << fmt_g17(e.cnr) << "\n";
  }
  return os.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const MetricsEntry& e : entries) {
    nlohmann::json j;
    j["label"] = e.label;
    j["mean_target"] = e.mean_target;
    j["mean_background"] = e.mean_background;
    j["var_target"] = e.var_target;
    j["var_background"] = e.var_background;
    if (e.sr)
      j["sr"] = *e.sr;
    else
      j["sr"] = nullptr;
    if (std::isinf(e.cnr)) {
      j["cnr"] = nullptr;
      j["cnr_infinite"] = true;
    } else {
      j["cnr"] = e.cnr;
    }
    arr.push_back(j);
  }
  return arr.dump(2);
}

}  // namespace elastoflow
