#pragma once

#include <cstdint>
#include <vector>

#include "rcflow/flow.hpp"
#include "rcflow/rcf.hpp"

namespace rcflow {

enum class NoiseMode {
  fresh_per_step, // n_avg new draws at every step
  fixed,          // one draw for the whole run
};

struct FlowEditConfig {
  Schedule schedule = make_uniform_schedule(50);
  NoiseMode noise_mode = NoiseMode::fresh_per_step;
  std::size_t n_avg = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_avg < 1) throw DomainError("FlowEdit n_avg must be >= 1");
    if (noise_mode == NoiseMode::fixed && n_avg != 1) throw DomainError("fixed-noise FlowEdit requires n_avg = 1");
  }
};

struct FlowEditResult {
  LatentField output;
  RunTrace trace;      // z_edit, starting from z0 at t_N
  RunTrace pred_trace; // z_pred = z_t + z_edit - z0 (first draw), t_N ... t_0
  std::size_t nfe = 0;
};

/// Noise of draw `draw` at step `step`. Fixed mode ignores both indices.
inline LatentField flowedit_noise(const FlowEditConfig& cfg, const Shape& shape, std::size_t step,
                                  std::size_t draw) {
  if (cfg.noise_mode == NoiseMode::fixed) return sample_noise(cfg.seed, shape);
  return sample_noise(derive_seed(cfg.seed, step, draw), shape);
}

/// FlowEdit: z_edit starts at z0 and follows V = mean_j [V_tar(z_pred_j) - V_src(z_t_j)], with
/// z_t_j = (1-t) z0 + t eps_j and z_pred_j = z_t_j + (z_edit - z0). NFE = 2 * n_avg * N.
inline FlowEditResult flowedit_run(const VelocityField& field, const LatentField& z0, const ConditionBundle& c_src,
                                   const ConditionBundle& c_tar, const FlowEditConfig& cfg) {
  cfg.validate();
  detail::require_finite(z0.values(), "flowedit_run: z0");
  const Schedule& sched = cfg.schedule;
  const std::size_t n = sched.steps();

  FlowEditResult res{z0, {}, {}, 0};
  NfeCounter nfe;
  res.trace.record(sched.t(n), res.output);

  const LatentField fixed_eps = sample_noise(cfg.seed, z0.shape());
  for (std::size_t i = n; i >= 1; --i) {
    const double t = sched.t(i);
    const LatentField offset = res.output - z0;
    LatentField v(z0.shape());
    for (std::size_t j = 0; j < cfg.n_avg; ++j) {
      const LatentField eps = cfg.noise_mode == NoiseMode::fixed ? fixed_eps : flowedit_noise(cfg, z0.shape(), i, j);
      const LatentField z_t = lerp_noise(z0, eps, t);
      const LatentField z_pred = z_t + offset;
      if (j == 0) res.pred_trace.record(t, z_pred);
      v = v + (evaluate_counted(field, z_pred, t, c_tar, nfe) - evaluate_counted(field, z_t, t, c_src, nfe));
    }
    if (cfg.n_avg > 1) v = scaled(1.0 / static_cast<double>(cfg.n_avg), v);
    res.output = euler_step(res.output, t, sched.t(i - 1), v);
    res.trace.record(sched.t(i - 1), res.output);
  }
  // At t_0 the interpolant is z0 for every draw, so z_pred = z0 + (z_edit - z0).
  res.pred_trace.record(sched.t(0), z0 + (res.output - z0));
  res.nfe = nfe.count;
  return res;
}

struct StepDeviation {
  double t;
  double deviation; // max|z_pred - z_edit| / (1 + max|z_edit|)
};

struct EquivalenceReport {
  std::vector<StepDeviation> steps;
  double max_deviation = 0.0;
  double tol = 0.0;
  bool passed = false;
  std::size_t flowedit_nfe = 0;
  std::size_t rcf_nfe = 0;
};

/// Runs fixed-noise FlowEdit and the unmasked residual-corrected edit (r = 1, no HF transfer) on
/// the same noise and compares the FlowEdit z_pred trajectory against the edit trajectory at
/// every knot.
inline EquivalenceReport equivalence_check(const VelocityField& field, const LatentField& z0,
                                           const ConditionBundle& c_src, const ConditionBundle& c_tar,
                                           const Schedule& schedule, std::uint64_t seed, double tol) {
  FlowEditConfig fe_cfg{schedule, NoiseMode::fixed, 1, seed};
  const FlowEditResult fe = flowedit_run(field, z0, c_src, c_tar, fe_cfg);

  EditConfig rcf_cfg;
  rcf_cfg.schedule = schedule;
  rcf_cfg.reuse_interval = 1;
  rcf_cfg.hf_lambda = 0.0;
  rcf_cfg.hf_enabled = false;
  const EditReport rcf = run_edit(field, z0, c_src, c_tar, sample_noise(seed, z0.shape()), rcf_cfg);

  EquivalenceReport rep;
  rep.tol = tol;
  rep.flowedit_nfe = fe.nfe;
  rep.rcf_nfe = rcf.nfe;
  const auto& a = fe.pred_trace.snapshots;
  const auto& b = rcf.edit_trace.snapshots;
  for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) {
    const double d = relative_error(a[k].z, b[k].z);
    rep.steps.push_back({b[k].t, d});
    rep.max_deviation = std::max(rep.max_deviation, d);
  }
  rep.passed = a.size() == b.size() && rep.max_deviation <= tol;
  return rep;
}

} // namespace rcflow
