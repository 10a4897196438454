#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rcflow/errors.hpp"

namespace rcflow {

/// Extents of a latent video, row-major over (frame, channel, row, column).
struct Shape {
  std::size_t frames = 1;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  constexpr std::size_t plane() const noexcept { return height * width; }

  std::size_t count() const {
    validate();
    std::size_t n = frames;
    for (std::size_t e : {channels, height, width}) {
      if (n > std::numeric_limits<std::size_t>::max() / e)
        throw StructuralError("shape element count overflows: " + str());
      n *= e;
    }
    return n;
  }

  void validate() const {
    if (frames == 0 || channels == 0 || height == 0 || width == 0)
      throw StructuralError("shape extents must be >= 1, got " + str());
  }

  std::string str() const {
    return std::to_string(frames) + "x" + std::to_string(channels) + "x" + std::to_string(height) +
           "x" + std::to_string(width);
  }

  /// Same frame count and spatial extents; channels may differ.
  bool same_grid(const Shape& o) const noexcept {
    return frames == o.frames && height == o.height && width == o.width;
  }

  friend bool operator==(const Shape&, const Shape&) = default;
};

namespace detail {

inline void require_finite(std::span<const double> data, const char* op) {
  for (double v : data)
    if (!std::isfinite(v))
      throw NumericError(std::string(op) + ": produced a non-finite value");
}

} // namespace detail

/// Dense real-valued (frames, channels, height, width) array.
class LatentField {
public:
  LatentField() : LatentField(Shape{}) {}

  explicit LatentField(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape.count(), fill) {}

  LatentField(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.count())
      throw StructuralError("data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_.str());
    detail::require_finite(data_, "LatentField");
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::size_t index(std::size_t f, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return ((f * shape_.channels + c) * shape_.height + y) * shape_.width + x;
  }
  double at(std::size_t f, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[index(f, c, y, x)];
  }
  double& at(std::size_t f, std::size_t c, std::size_t y, std::size_t x) {
    return data_[index(f, c, y, x)];
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const LatentField&, const LatentField&) = default;

private:
  Shape shape_;
  std::vector<double> data_;
};

/// Single-channel weight map in [0,1], broadcast over the channels of a latent.
class Mask {
public:
  Mask() : Mask(Shape{}) {}

  explicit Mask(Shape shape, double fill = 1.0) : Mask(shape, std::vector<double>(shape.count(), fill)) {}

  Mask(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (shape_.channels != 1)
      throw StructuralError("mask must have exactly one channel, got " + shape_.str());
    if (data_.size() != shape_.count())
      throw StructuralError("mask data length does not match shape " + shape_.str());
    for (double v : data_)
      if (!(v >= 0.0 && v <= 1.0))
        throw DomainError("mask values must lie in [0,1]");
  }

  static Mask ones(const Shape& latent) { return Mask(grid_of(latent), 1.0); }
  static Mask zeros(const Shape& latent) { return Mask(grid_of(latent), 0.0); }

  /// Single-channel shape over the same grid as `latent`.
  static Shape grid_of(const Shape& latent) {
    return {latent.frames, 1, latent.height, latent.width};
  }

  const Shape& shape() const noexcept { return shape_; }
  std::span<const double> values() const noexcept { return data_; }

  double at(std::size_t f, std::size_t y, std::size_t x) const {
    return data_[(f * shape_.height + y) * shape_.width + x];
  }

  bool broadcasts_to(const Shape& latent) const noexcept { return shape_.same_grid(latent); }

  void require_broadcast(const Shape& latent, const char* op) const {
    if (!broadcasts_to(latent))
      throw StructuralError(std::string(op) + ": mask " + shape_.str() +
                            " does not broadcast over " + latent.str());
  }

  bool all_equal(double v) const noexcept {
    return std::all_of(data_.begin(), data_.end(), [v](double m) { return m == v; });
  }

  friend bool operator==(const Mask&, const Mask&) = default;

private:
  Shape shape_;
  std::vector<double> data_;
};

/// Visits every element of `latent` together with its broadcast mask weight.
template <class Fn>
void for_each_masked(const Shape& latent, const Mask& mask, Fn&& fn) {
  const auto plane = latent.plane();
  const auto m = mask.values();
  std::size_t i = 0;
  for (std::size_t f = 0; f < latent.frames; ++f)
    for (std::size_t c = 0; c < latent.channels; ++c)
      for (std::size_t p = 0; p < plane; ++p, ++i) fn(i, m[f * plane + p]);
}

inline void require_same_shape(const LatentField& a, const LatentField& b, const char* op) {
  if (a.shape() != b.shape())
    throw StructuralError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                          b.shape().str());
}

/// a*x + y, elementwise.
inline LatentField axpy(double a, const LatentField& x, const LatentField& y) {
  require_same_shape(x, y, "axpy");
  LatentField out = y;
  auto o = out.values();
  auto xs = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * xs[i] + o[i];
  detail::require_finite(o, "axpy");
  return out;
}

inline LatentField operator+(const LatentField& a, const LatentField& b) { return axpy(1.0, a, b); }
inline LatentField operator-(const LatentField& a, const LatentField& b) { return axpy(-1.0, b, a); }

inline LatentField scaled(double a, const LatentField& x) {
  LatentField out = x;
  for (double& v : out.values()) v *= a;
  detail::require_finite(out.values(), "scaled");
  return out;
}

/// Straight-path interpolation (1-t)*z0 + t*eps. Exact at t = 0 and t = 1.
inline LatentField lerp_noise(const LatentField& z0, const LatentField& eps, double t) {
  require_same_shape(z0, eps, "lerp_noise");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("lerp_noise: t must lie in [0,1]");
  if (t == 0.0) return z0;
  if (t == 1.0) return eps;
  LatentField out(z0.shape());
  auto o = out.values();
  auto a = z0.values();
  auto b = eps.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (1.0 - t) * a[i] + t * b[i];
  detail::require_finite(o, "lerp_noise");
  return out;
}

inline double max_abs_diff(const LatentField& a, const LatentField& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// max|a - ref| / (1 + max|ref|).
inline double relative_error(const LatentField& a, const LatentField& ref) {
  return max_abs_diff(a, ref) / (1.0 + ref.max_abs());
}

inline double l2_norm(const LatentField& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

inline double rms(const LatentField& a) {
  return a.size() == 0 ? 0.0 : l2_norm(a) / std::sqrt(static_cast<double>(a.size()));
}

inline double rms_diff(const LatentField& a, const LatentField& b) { return rms(a - b); }

} // namespace rcflow
