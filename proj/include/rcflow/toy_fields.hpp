#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <vector>

#include "rcflow/flow.hpp"

namespace rcflow {

/// Synthetic relighting scene. A textured disc (the foreground) moves horizontally across frames
/// over a flat background:
///
///   x(c) = M_true * (S ⊙ g) + (1 - M_true) * B
///
/// The illumination-agnostic parameters shape S and M_true:
///   [0] texture frequency (cycles across the frame), [1] motion in pixels per frame,
///   [2] disc radius as a fraction of min(height, width).
/// The illumination-specific parameters shape g and B:
///   [0] gain, [1] ramp slope, [2] ramp angle in radians, [3] background level.
/// g = gain * (1 + slope * (cos(angle) u + sin(angle) v)) with u, v the pixel-centre coordinates
/// mapped to (-1, 1).
///
/// A reference frame in the condition replaces frame 0 of the render. A structural field is added
/// to S with weight `structural_weight`.
struct ToyScene {
  Shape shape;

  static constexpr std::size_t agnostic_arity = 3;
  static constexpr std::size_t illum_arity = 4;
  static constexpr double structural_weight = 0.1;

  void check(const ConditionBundle& c) const {
    shape.validate();
    if (c.agnostic_params.size() != agnostic_arity)
      throw StructuralError("toy scene expects " + std::to_string(agnostic_arity) +
                            " illumination-agnostic parameters, got " + std::to_string(c.agnostic_params.size()));
    if (c.illum_params.size() != illum_arity)
      throw StructuralError("toy scene expects " + std::to_string(illum_arity) +
                            " illumination-specific parameters, got " + std::to_string(c.illum_params.size()));
    if (c.structural && c.structural->shape() != shape)
      throw StructuralError("structural condition shape " + c.structural->shape().str() + " != scene " + shape.str());
    if (c.reference_frame) {
      const Shape& r = c.reference_frame->shape();
      if (r.frames != 1 || r.channels != shape.channels || r.height != shape.height || r.width != shape.width)
        throw StructuralError("reference frame must be 1x" + std::to_string(shape.channels) + "x" +
                              std::to_string(shape.height) + "x" + std::to_string(shape.width));
    }
  }

  double disc_center_x(std::size_t f, double motion) const {
    const double mid = 0.5 * static_cast<double>(shape.frames - 1);
    return 0.5 * static_cast<double>(shape.width) + motion * (static_cast<double>(f) - mid);
  }

  /// Binary foreground support of the disc.
  Mask foreground(const std::vector<double>& agnostic) const {
    const double motion = agnostic.at(1);
    const double radius = agnostic.at(2) * static_cast<double>(std::min(shape.height, shape.width));
    const double cy = 0.5 * static_cast<double>(shape.height);
    const Shape grid = Mask::grid_of(shape);
    std::vector<double> m(grid.count());
    std::size_t i = 0;
    for (std::size_t f = 0; f < shape.frames; ++f) {
      const double cx = disc_center_x(f, motion);
      for (std::size_t y = 0; y < shape.height; ++y)
        for (std::size_t x = 0; x < shape.width; ++x, ++i) {
          const double dx = static_cast<double>(x) + 0.5 - cx;
          const double dy = static_cast<double>(y) + 0.5 - cy;
          m[i] = dx * dx + dy * dy <= radius * radius ? 1.0 : 0.0;
        }
    }
    return Mask(grid, std::move(m));
  }

  /// Texture S, carried along with the disc.
  LatentField structure(const std::vector<double>& agnostic) const {
    const double freq = agnostic.at(0);
    const double motion = agnostic.at(1);
    const double two_pi = 2.0 * std::numbers::pi;
    const double cy = 0.5 * static_cast<double>(shape.height);
    LatentField s(shape);
    for (std::size_t f = 0; f < shape.frames; ++f) {
      const double cx = disc_center_x(f, motion);
      for (std::size_t c = 0; c < shape.channels; ++c)
        for (std::size_t y = 0; y < shape.height; ++y)
          for (std::size_t x = 0; x < shape.width; ++x) {
            const double px = (static_cast<double>(x) + 0.5 - cx) / static_cast<double>(shape.width);
            const double py = (static_cast<double>(y) + 0.5 - cy) / static_cast<double>(shape.height);
            s.at(f, c, y, x) = (1.0 + 0.5 * std::sin(two_pi * freq * px) * std::cos(two_pi * freq * py)) *
                               (1.0 + 0.1 * static_cast<double>(c));
          }
    }
    return s;
  }

  /// Illumination gain g at pixel (y, x); identical for every frame and channel.
  double gain(const std::vector<double>& illum, std::size_t y, std::size_t x) const {
    const double u = (2.0 * static_cast<double>(x) + 1.0) / static_cast<double>(shape.width) - 1.0;
    const double v = (2.0 * static_cast<double>(y) + 1.0) / static_cast<double>(shape.height) - 1.0;
    return illum[0] * (1.0 + illum[1] * (std::cos(illum[2]) * u + std::sin(illum[2]) * v));
  }
};

inline LatentField render_target(const ToyScene& scene, const ConditionBundle& c) {
  scene.check(c);
  const Mask fg = scene.foreground(c.agnostic_params);
  LatentField s = scene.structure(c.agnostic_params);
  if (c.structural) s = axpy(ToyScene::structural_weight, *c.structural, s);
  const double background = c.illum_params[3];

  const Shape& sh = scene.shape;
  LatentField x(sh);
  for (std::size_t f = 0; f < sh.frames; ++f)
    for (std::size_t ch = 0; ch < sh.channels; ++ch)
      for (std::size_t y = 0; y < sh.height; ++y)
        for (std::size_t px = 0; px < sh.width; ++px) {
          const double m = fg.at(f, y, px);
          x.at(f, ch, y, px) = m * s.at(f, ch, y, px) * scene.gain(c.illum_params, y, px) + (1.0 - m) * background;
        }
  if (c.reference_frame) {
    const auto ref = c.reference_frame->values();
    std::copy(ref.begin(), ref.end(), x.values().begin());
  }
  detail::require_finite(x.values(), "render_target");
  return x;
}

class ConstantField final : public VelocityField {
public:
  explicit ConstantField(LatentField k) : k_(std::move(k)) {}

  LatentField evaluate(const LatentField& z, double, const ConditionBundle&) const override {
    require_same_shape(z, k_, "ConstantField");
    return k_;
  }

private:
  LatentField k_;
};

inline std::unique_ptr<VelocityField> constant_field(LatentField k) {
  return std::make_unique<ConstantField>(std::move(k));
}

/// (x(c) - z) / t: the exact flow of a point mass at the rendered target. Constant (x - eps) along
/// the straight path, so Euler integration is exact on any schedule.
class PointField final : public VelocityField {
public:
  explicit PointField(ToyScene scene) : scene_(std::move(scene)) {}

  LatentField evaluate(const LatentField& z, double t, const ConditionBundle& c) const override {
    if (!(t > 0.0)) throw DomainError("PointField: t must be > 0");
    return scaled(1.0 / t, render_target(scene_, c) - z);
  }

  const ToyScene& scene() const noexcept { return scene_; }

private:
  ToyScene scene_;
};

inline std::unique_ptr<VelocityField> point_field(ToyScene scene) {
  return std::make_unique<PointField>(std::move(scene));
}

/// Weighted point masses sharing one shape.
struct MixtureDataset {
  std::vector<double> weights;
  std::vector<LatentField> points;

  static void validate_weights(const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("mixture weights must be finite and >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DomainError("mixture weights must sum to 1");
  }

  void validate() const {
    if (points.empty()) throw StructuralError("mixture dataset needs at least one component");
    if (weights.size() != points.size()) throw StructuralError("mixture weights/points arity mismatch");
    validate_weights(weights);
    for (const auto& p : points) require_same_shape(p, points.front(), "MixtureDataset");
  }
};

/// Posterior mean E[x | z_t = z] for a point-mass mixture under z_t = (1-t) x + t eps:
/// w_k ∝ pi_k exp(-|z - (1-t) x_k|^2 / (2 t^2)). Exponents are shifted by their maximum before
/// exponentiation. If the weights still degenerate (non-finite distances), the nearest component
/// wins, lowest index on ties.
inline LatentField posterior_mean(const LatentField& z, double t, const MixtureDataset& data) {
  if (!(t > 0.0)) throw DomainError("mixture posterior: t must be > 0");
  const std::size_t k = data.points.size();
  std::vector<double> sq(k), logw(k);
  for (std::size_t j = 0; j < k; ++j) {
    require_same_shape(z, data.points[j], "mixture posterior");
    double d = 0.0;
    const auto p = data.points[j].values();
    const auto zv = z.values();
    for (std::size_t i = 0; i < zv.size(); ++i) {
      const double e = zv[i] - (1.0 - t) * p[i];
      d += e * e;
    }
    sq[j] = d;
    logw[j] = data.weights[j] > 0.0 ? std::log(data.weights[j]) - d / (2.0 * t * t)
                                    : -std::numeric_limits<double>::infinity();
  }

  double shift = -std::numeric_limits<double>::infinity();
  for (double l : logw)
    if (std::isfinite(l)) shift = std::max(shift, l);

  std::vector<double> w(k, 0.0);
  double total = 0.0;
  if (std::isfinite(shift)) {
    for (std::size_t j = 0; j < k; ++j) {
      w[j] = std::isfinite(logw[j]) ? std::exp(logw[j] - shift) : 0.0;
      total += w[j];
    }
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (sq[j] < sq[best]) best = j;
    return data.points[best];
  }

  LatentField mean(z.shape());
  auto m = mean.values();
  for (std::size_t j = 0; j < k; ++j) {
    if (w[j] == 0.0) continue;
    const double a = w[j] / total;
    const auto p = data.points[j].values();
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += a * p[i];
  }
  return mean;
}

/// Marginal flow of an unconditioned point-mass mixture: (E[x | z_t = z] - z) / t.
class MixtureField final : public VelocityField {
public:
  explicit MixtureField(MixtureDataset data) : data_(std::move(data)) { data_.validate(); }

  LatentField evaluate(const LatentField& z, double t, const ConditionBundle&) const override {
    return scaled(1.0 / t, posterior_mean(z, t, data_) - z);
  }

  const MixtureDataset& dataset() const noexcept { return data_; }

private:
  MixtureDataset data_;
};

inline std::unique_ptr<VelocityField> mixture_field(MixtureDataset data) {
  return std::make_unique<MixtureField>(std::move(data));
}

/// One component of a condition-dependent mixture: x_k(c) = x(c) + offset_scale * N(0, I; seed).
struct SceneComponent {
  double weight = 1.0;
  double offset_scale = 0.0;
  std::uint64_t offset_seed = 0;
};

/// Mixture whose dataset is rebuilt per condition from the scene render, so the condition moves
/// every component together while the seeded offsets stay fixed.
class SceneMixtureField final : public VelocityField {
public:
  SceneMixtureField(ToyScene scene, std::vector<SceneComponent> components)
      : scene_(std::move(scene)), components_(std::move(components)) {
    if (components_.empty()) throw StructuralError("scene mixture needs at least one component");
    std::vector<double> weights;
    for (const auto& c : components_) {
      weights.push_back(c.weight);
      offsets_.push_back(scaled(c.offset_scale, sample_noise(c.offset_seed, scene_.shape)));
    }
    MixtureDataset::validate_weights(weights);
  }

  MixtureDataset dataset_for(const ConditionBundle& c) const {
    const LatentField x = render_target(scene_, c);
    MixtureDataset d;
    for (std::size_t k = 0; k < components_.size(); ++k) {
      d.weights.push_back(components_[k].weight);
      d.points.push_back(x + offsets_[k]);
    }
    return d;
  }

  LatentField evaluate(const LatentField& z, double t, const ConditionBundle& c) const override {
    if (!(t > 0.0)) throw DomainError("SceneMixtureField: t must be > 0");
    return scaled(1.0 / t, posterior_mean(z, t, dataset_for(c)) - z);
  }

  const ToyScene& scene() const noexcept { return scene_; }

private:
  ToyScene scene_;
  std::vector<SceneComponent> components_;
  std::vector<LatentField> offsets_;
};

} // namespace rcflow
