#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rcflow/latent.hpp"
#include "rcflow/random.hpp"

namespace rcflow {

/// Timestep grid 0 = t_0 < t_1 < ... < t_N = 1.
class Schedule {
public:
  explicit Schedule(std::vector<double> knots) : knots_(std::move(knots)) {
    if (knots_.size() < 2) throw DomainError("schedule needs at least two knots");
    if (knots_.front() != 0.0 || knots_.back() != 1.0)
      throw DomainError("schedule must start at exactly 0 and end at exactly 1");
    for (std::size_t i = 1; i < knots_.size(); ++i)
      if (!(knots_[i] > knots_[i - 1]))
        throw DomainError("schedule knots must be strictly increasing (index " + std::to_string(i) + ")");
  }

  std::size_t steps() const noexcept { return knots_.size() - 1; }
  double t(std::size_t i) const { return knots_.at(i); }
  const std::vector<double>& knots() const noexcept { return knots_; }

  friend bool operator==(const Schedule&, const Schedule&) = default;

private:
  std::vector<double> knots_;
};

/// t_i = i / T.
inline Schedule make_uniform_schedule(std::size_t steps) {
  if (steps == 0) throw DomainError("make_uniform_schedule: T must be >= 1");
  std::vector<double> knots(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) knots[i] = static_cast<double>(i) / static_cast<double>(steps);
  knots.back() = 1.0;
  return Schedule(std::move(knots));
}

/// Decoupled conditioning record. Source and target bundles of one edit share the
/// illumination-agnostic members and differ only in the illumination-specific ones.
struct ConditionBundle {
  std::optional<LatentField> reference_frame; // frames == 1
  std::optional<LatentField> structural;
  std::vector<double> illum_params;
  std::vector<double> agnostic_params;

  friend bool operator==(const ConditionBundle&, const ConditionBundle&) = default;
};

inline bool is_valid_pair(const ConditionBundle& src, const ConditionBundle& tar) {
  return src.agnostic_params == tar.agnostic_params && src.structural == tar.structural;
}

/// Deterministic velocity field (z, t, c) -> V. Implementations must be re-entrant.
class VelocityField {
public:
  virtual ~VelocityField() = default;
  virtual LatentField evaluate(const LatentField& z, double t, const ConditionBundle& c) const = 0;
};

struct NfeCounter {
  std::size_t count = 0;
  void add(std::size_t n = 1) noexcept { count += n; }
};

struct Snapshot {
  double t;
  LatentField z;
};

struct RunTrace {
  std::vector<Snapshot> snapshots;
  NfeCounter nfe;

  /// Appends (t, z); timesteps must strictly decrease.
  void record(double t, const LatentField& z) {
    if (!snapshots.empty() && !(t < snapshots.back().t))
      throw DomainError("RunTrace: snapshot timesteps must strictly decrease");
    snapshots.push_back({t, z});
  }
};

/// Evaluates `field`, counts one NFE, and rejects a wrong-shaped or non-finite result with a
/// message naming the timestep.
inline LatentField evaluate_counted(const VelocityField& field, const LatentField& z, double t,
                                    const ConditionBundle& c, NfeCounter& nfe) {
  LatentField v = field.evaluate(z, t, c);
  nfe.add();
  std::ostringstream at;
  at.precision(17);
  at << "t=" << t;
  if (v.shape() != z.shape())
    throw StructuralError("velocity field returned shape " + v.shape().str() + " for input " +
                          z.shape().str() + " at " + at.str());
  for (double x : v.values())
    if (!std::isfinite(x)) throw NumericError("velocity field returned non-finite values at " + at.str());
  return v;
}

/// z + (t_hi - t_lo) * V.
inline LatentField euler_step(const LatentField& z, double t_hi, double t_lo, const LatentField& v) {
  if (!(t_hi > t_lo)) throw DomainError("euler_step: requires t_hi > t_lo");
  require_same_shape(z, v, "euler_step");
  try {
    return axpy(t_hi - t_lo, v, z);
  } catch (const NumericError&) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "euler_step: non-finite latent stepping from t=" << t_hi << " to t=" << t_lo;
    throw NumericError(msg.str());
  }
}

struct GenerateResult {
  LatentField output;
  RunTrace trace;
};

/// Plain Euler sampling from eps at t_N = 1 down to t_0 = 0. The field is evaluated at
/// t_N ... t_1, never at t_0, so NFE = N.
inline GenerateResult generate(const VelocityField& field, const ConditionBundle& c, const LatentField& eps,
                               const Schedule& schedule) {
  detail::require_finite(eps.values(), "generate: eps");
  GenerateResult r{eps, {}};
  const std::size_t n = schedule.steps();
  r.trace.record(schedule.t(n), r.output);
  for (std::size_t i = n; i >= 1; --i) {
    const LatentField v = evaluate_counted(field, r.output, schedule.t(i), c, r.trace.nfe);
    r.output = euler_step(r.output, schedule.t(i), schedule.t(i - 1), v);
    r.trace.record(schedule.t(i - 1), r.output);
  }
  return r;
}

} // namespace rcflow
