#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <vector>

#include "rcflow/latent.hpp"

namespace rcflow {

/// Low/high spatial-frequency components of a field; low + high reconstructs it.
struct FreqSplit {
  LatentField low;
  LatentField high;
  double rho = 0.0;
};

namespace detail {

// FFTW's planner is not re-entrant; execution of an existing plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
struct FftwPlanDestroy {
  void operator()(fftw_plan p) const noexcept {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using FftwPlan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, FftwPlanDestroy>;

template <class T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return std::unique_ptr<T[], FftwFree>(p);
}

/// Per-axis normalized frequency of bin k on an n-point grid: min(k, n-k) / floor(n/2).
inline double axis_frequency(std::size_t k, std::size_t n) {
  if (n < 2) return 0.0;
  return static_cast<double>(std::min(k, n - k)) / static_cast<double>(n / 2);
}

/// Radial frequency of bin (ky, kx) divided by the grid's maximum radial frequency.
inline double normalized_radius(std::size_t ky, std::size_t kx, std::size_t h, std::size_t w) {
  const double fy = axis_frequency(ky, h);
  const double fx = axis_frequency(kx, w);
  const double r_max = std::hypot(h < 2 ? 0.0 : 1.0, w < 2 ? 0.0 : 1.0);
  if (r_max == 0.0) return 0.0;
  return std::hypot(fy, fx) / r_max;
}

inline bool is_low_bin(std::size_t ky, std::size_t kx, std::size_t h, std::size_t w, double rho) {
  if (ky == 0 && kx == 0) return true;
  // Slack absorbs rounding so that rho = 1 keeps the corner bins.
  return normalized_radius(ky, kx, h, w) <= rho + 1e-12;
}

} // namespace detail

/// Splits every (frame, channel) plane of `x` with a hard radial low-pass in the 2D DFT domain.
/// The temporal and channel axes are not mixed.
inline FreqSplit freq_decompose(const LatentField& x, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("freq_decompose: rho must lie in [0,1]");
  detail::require_finite(x.values(), "freq_decompose input");

  const Shape& s = x.shape();
  const int h = static_cast<int>(s.height);
  const int w = static_cast<int>(s.width);
  const int half_w = w / 2 + 1;
  const int planes = static_cast<int>(s.frames * s.channels);
  const std::size_t real_n = x.size();
  const std::size_t spec_plane = static_cast<std::size_t>(h) * half_w;
  const std::size_t spec_n = spec_plane * planes;

  auto real_buf = detail::fftw_buffer<double>(real_n);
  auto spectrum = detail::fftw_buffer<fftw_complex>(spec_n);
  auto masked = detail::fftw_buffer<fftw_complex>(spec_n);

  detail::FftwPlan forward, inverse;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int dims[2] = {h, w};
    forward.reset(fftw_plan_many_dft_r2c(2, dims, planes, real_buf.get(), nullptr, 1, h * w,
                                         spectrum.get(), nullptr, 1, static_cast<int>(spec_plane),
                                         FFTW_ESTIMATE));
    inverse.reset(fftw_plan_many_dft_c2r(2, dims, planes, masked.get(), nullptr, 1,
                                         static_cast<int>(spec_plane), real_buf.get(), nullptr, 1,
                                         h * w, FFTW_ESTIMATE));
  }
  if (!forward || !inverse) throw NumericError("freq_decompose: FFT planning failed");

  std::copy(x.values().begin(), x.values().end(), real_buf.get());
  fftw_execute(forward.get());

  std::vector<char> low_bin(spec_plane);
  for (int ky = 0; ky < h; ++ky)
    for (int kx = 0; kx < half_w; ++kx)
      low_bin[static_cast<std::size_t>(ky) * half_w + kx] =
          detail::is_low_bin(ky, kx, s.height, s.width, rho);

  const double norm = 1.0 / (static_cast<double>(h) * w);
  auto component = [&](bool keep_low) {
    for (std::size_t i = 0; i < spec_n; ++i) {
      const bool keep = (low_bin[i % spec_plane] != 0) == keep_low;
      masked[i][0] = keep ? spectrum[i][0] : 0.0;
      masked[i][1] = keep ? spectrum[i][1] : 0.0;
    }
    fftw_execute(inverse.get());
    LatentField out(s);
    auto o = out.values();
    for (std::size_t i = 0; i < real_n; ++i) o[i] = real_buf[i] * norm;
    detail::require_finite(o, "freq_decompose");
    return out;
  };

  FreqSplit split;
  split.low = component(true);
  split.high = component(false);
  split.rho = rho;
  return split;
}

/// Masked high-frequency transfer:
///   LF(z_edit) + lambda*M*HF(z_src) + (1 - lambda*M)*HF(z_edit).
/// With M = 1 everywhere this is the unmasked replacement. Returns `z_edit` untouched whenever
/// lambda*M vanishes identically.
inline LatentField hf_transfer(const LatentField& z_edit, const LatentField& z_src, const Mask& mask,
                               double lambda, double rho) {
  require_same_shape(z_edit, z_src, "hf_transfer");
  mask.require_broadcast(z_edit.shape(), "hf_transfer");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("hf_transfer: lambda must lie in [0,1]");
  if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("hf_transfer: rho must lie in [0,1]");
  if (lambda == 0.0 || mask.all_equal(0.0)) return z_edit;

  const FreqSplit edit = freq_decompose(z_edit, rho);
  const FreqSplit src = freq_decompose(z_src, rho);

  LatentField out(z_edit.shape());
  auto o = out.values();
  auto le = edit.low.values();
  auto he = edit.high.values();
  auto hs = src.high.values();
  for_each_masked(z_edit.shape(), mask, [&](std::size_t i, double m) {
    const double w = lambda * m;
    o[i] = le[i] + w * hs[i] + (1.0 - w) * he[i];
  });
  detail::require_finite(o, "hf_transfer");
  return out;
}

} // namespace rcflow
