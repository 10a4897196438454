#pragma once

#include <optional>
#include <vector>

#include "rcflow/flow.hpp"
#include "rcflow/frequency.hpp"

namespace rcflow {

/// Knobs of one residual-corrected edit. An empty mask means M = 1 everywhere (full-scene edit).
struct EditConfig {
  Schedule schedule = make_uniform_schedule(50);
  std::size_t reuse_interval = 10;
  double hf_lambda = 0.5;
  double hf_rho = 0.8;
  std::optional<Mask> mask;
  bool hf_enabled = true;

  void validate(const Shape& latent) const {
    if (reuse_interval < 1 || reuse_interval > schedule.steps())
      throw DomainError("reuse interval r must satisfy 1 <= r <= N (N=" + std::to_string(schedule.steps()) +
                        ", r=" + std::to_string(reuse_interval) + ")");
    if (!(hf_lambda >= 0.0 && hf_lambda <= 1.0)) throw DomainError("hf_lambda must lie in [0,1]");
    if (!(hf_rho >= 0.0 && hf_rho <= 1.0)) throw DomainError("hf_rho must lie in [0,1]");
    if (mask) mask->require_broadcast(latent, "EditConfig");
  }

  Mask effective_mask(const Shape& latent) const { return mask ? *mask : Mask::ones(latent); }
};

struct EditReport {
  std::size_t nfe = 0;
  std::size_t residual_recomputations = 0;
  std::vector<double> per_step_residual_norm; // L2 norm of the residual applied at each step
  LatentField output;
  RunTrace src_trace;  // source interpolation z_t at every residual refresh
  RunTrace edit_trace; // z_edit at t_N, ..., t_0
};

/// Number of residual refreshes for N steps at reuse interval r: ceil(N / r).
constexpr std::size_t residual_refreshes(std::size_t steps, std::size_t r) noexcept {
  return (steps + r - 1) / r;
}

/// Constant velocity z0 - eps; one Euler pass over any schedule carries eps to z0.
inline LatentField restoration_velocity(const LatentField& z0, const LatentField& eps) {
  require_same_shape(z0, eps, "restoration_velocity");
  return z0 - eps;
}

/// V0 - V_src(z_t) with z_t = (1-t) z0 + t eps. Costs one field evaluation.
inline LatentField consistency_residual(const VelocityField& field, const LatentField& z0,
                                        const LatentField& eps, double t, const ConditionBundle& c_src,
                                        NfeCounter& nfe) {
  if (!(t > 0.0 && t <= 1.0)) throw DomainError("consistency_residual: t must lie in (0,1]");
  const LatentField z_t = lerp_noise(z0, eps, t);
  return restoration_velocity(z0, eps) - evaluate_counted(field, z_t, t, c_src, nfe);
}

/// v_tar + M * v_res.
inline LatentField residual_corrected_velocity(const LatentField& v_tar, const LatentField& v_res,
                                               const Mask& mask) {
  require_same_shape(v_tar, v_res, "residual_corrected_velocity");
  mask.require_broadcast(v_tar.shape(), "residual_corrected_velocity");
  if (mask.all_equal(0.0)) return v_tar;
  if (mask.all_equal(1.0)) return v_tar + v_res;
  LatentField out = v_tar;
  auto o = out.values();
  auto r = v_res.values();
  for_each_masked(v_tar.shape(), mask, [&](std::size_t i, double m) { o[i] += m * r[i]; });
  detail::require_finite(o, "residual_corrected_velocity");
  return out;
}

/// Residual-corrected flow edit. Starting from eps at t_N, each step adds the (masked)
/// consistency residual to the target-condition velocity and Euler-steps the edit latent; the
/// residual is refreshed on the first step of every block of `reuse_interval` steps and reused
/// verbatim in between. With HF transfer enabled, the edit latent's high band is blended with the
/// source interpolation at the new timestep after every step.
///
/// NFE = N + ceil(N / r).
inline EditReport run_edit(const VelocityField& field, const LatentField& z0, const ConditionBundle& c_src,
                           const ConditionBundle& c_tar, const LatentField& eps, const EditConfig& config) {
  require_same_shape(z0, eps, "run_edit");
  config.validate(z0.shape());
  const Mask mask = config.effective_mask(z0.shape());
  const Schedule& sched = config.schedule;
  const std::size_t n = sched.steps();
  const std::size_t r = config.reuse_interval;

  EditReport rep;
  const LatentField v0 = restoration_velocity(z0, eps);
  LatentField residual(z0.shape());
  LatentField z_edit = eps;
  rep.edit_trace.record(sched.t(n), z_edit);

  for (std::size_t i = n; i >= 1; --i) {
    const double t_hi = sched.t(i);
    const double t_lo = sched.t(i - 1);
    if ((n - i) % r == 0) {
      const LatentField z_t = lerp_noise(z0, eps, t_hi);
      residual = v0 - evaluate_counted(field, z_t, t_hi, c_src, rep.src_trace.nfe);
      rep.src_trace.record(t_hi, z_t);
      ++rep.residual_recomputations;
    }
    const LatentField v_tar = evaluate_counted(field, z_edit, t_hi, c_tar, rep.edit_trace.nfe);
    z_edit = euler_step(z_edit, t_hi, t_lo, residual_corrected_velocity(v_tar, residual, mask));
    if (config.hf_enabled)
      z_edit = hf_transfer(z_edit, lerp_noise(z0, eps, t_lo), mask, config.hf_lambda, config.hf_rho);
    rep.edit_trace.record(t_lo, z_edit);
    rep.per_step_residual_norm.push_back(l2_norm(residual));
  }

  rep.nfe = rep.src_trace.nfe.count + rep.edit_trace.nfe.count;
  rep.output = std::move(z_edit);
  return rep;
}

} // namespace rcflow
