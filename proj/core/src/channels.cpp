#include "elastoflow/channels.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace elastoflow {

namespace {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffers {
  int64_t n;
  double* in;
  fftw_complex* spec;
  fftw_complex* full;
  fftw_complex* out;
  fftw_plan fwd;
  fftw_plan bwd;

  explicit FftwBuffers(int64_t len) : n(len) {
    in = fftw_alloc_real(static_cast<size_t>(n));
    spec = fftw_alloc_complex(static_cast<size_t>(n / 2 + 1));
    full = fftw_alloc_complex(static_cast<size_t>(n));
    out = fftw_alloc_complex(static_cast<size_t>(n));
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, spec, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_1d(static_cast<int>(n), full, out, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  ~FftwBuffers() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(in);
    fftw_free(spec);
    fftw_free(full);
    fftw_free(out);
  }

  FftwBuffers(const FftwBuffers&) = delete;
  FftwBuffers& operator=(const FftwBuffers&) = delete;
};

}  // namespace

AnalyticSignal analytic_signal(const RfFrame& frame) {
  validate(frame);
  const int64_t A = frame.axial(), L = frame.lateral();
  AnalyticSignal sig{frame.samples, Tensor({A, L})};

  FftwBuffers fft(A);
  const double inv_n = 1.0 / static_cast<double>(A);
  for (int64_t j = 0; j < L; ++j) {
    for (int64_t i = 0; i < A; ++i) fft.in[i] = frame.samples.at(i, j);
    fftw_execute(fft.fwd);

    // Analytic spectrum: keep DC and Nyquist, double positive frequencies,
    // zero the negative half.
    for (int64_t k = 0; k < A; ++k) {
      fft.full[k][0] = 0.0;
      fft.full[k][1] = 0.0;
    }
    const int64_t half = A / 2;
    fft.full[0][0] = fft.spec[0][0];
    fft.full[0][1] = fft.spec[0][1];
    for (int64_t k = 1; k < (A + 1) / 2; ++k) {
      fft.full[k][0] = 2.0 * fft.spec[k][0];
      fft.full[k][1] = 2.0 * fft.spec[k][1];
    }
    if (A % 2 == 0) {
      fft.full[half][0] = fft.spec[half][0];
      fft.full[half][1] = fft.spec[half][1];
    }
    fftw_execute(fft.bwd);
    for (int64_t i = 0; i < A; ++i) sig.imag.at(i, j) = fft.out[i][1] * inv_n;
  }
  return sig;
}

Tensor envelope(const RfFrame& frame) {
  const AnalyticSignal sig = analytic_signal(frame);
  Tensor env(sig.real.shape());
  for (int64_t i = 0; i < env.size(); ++i) env[i] = std::hypot(sig.real[i], sig.imag[i]);
  return env;
}

ChannelStack build_channel_stack(const RfFrame& frame, NormalizePolicy policy) {
  const AnalyticSignal sig = analytic_signal(frame);
  ChannelStack stack;
  stack.rf = sig.real;
  stack.imag_analytic = sig.imag;
  stack.envelope = Tensor(sig.real.shape());
  for (int64_t i = 0; i < stack.envelope.size(); ++i)
    stack.envelope[i] = std::hypot(sig.real[i], sig.imag[i]);

  if (policy == NormalizePolicy::shared_unit_std) {
    const double sd = stack.rf.stddev();
    if (sd > 0.0) {
      const double s = 1.0 / sd;
      for (int64_t i = 0; i < stack.rf.size(); ++i) {
        stack.rf[i] *= s;
        stack.imag_analytic[i] *= s;
        stack.envelope[i] *= s;
      }
    }
  }
  return stack;
}

}  // namespace elastoflow
