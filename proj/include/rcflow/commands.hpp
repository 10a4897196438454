#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "rcflow/config.hpp"
#include "rcflow/flowedit.hpp"
#include "rcflow/mask.hpp"
#include "rcflow/metrics.hpp"
#include "rcflow/rcf.hpp"
#include "rcflow/stackfile.hpp"
#include "rcflow/toy_fields.hpp"

namespace rcflow {

/// Everything a command needs, materialized from a validated config.
struct Experiment {
  ExperimentConfig cfg;
  ToyScene scene;
  std::unique_ptr<VelocityField> field;
  ConditionBundle c_src;
  ConditionBundle c_tar;
  LatentField z0;
  Mask mask;
  LatentField eps;
  Schedule schedule = make_uniform_schedule(1);

  /// Source and target bundles are equal, i.e. this is an identity run.
  bool identity() const { return c_src == c_tar; }

  EditConfig edit_config(std::size_t r) const {
    EditConfig e;
    e.schedule = schedule;
    e.reuse_interval = r;
    e.hf_lambda = cfg.hf_lambda;
    e.hf_rho = cfg.hf_rho;
    e.hf_enabled = cfg.hf_enabled;
    e.mask = mask;
    return e;
  }
};

namespace detail {

inline LatentField load_input(const std::string& key, const std::filesystem::path& path) {
  try {
    return read_stack(path);
  } catch (const FormatError& e) {
    throw ConfigError(key + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

inline ConditionBundle make_bundle(const std::string& prefix, const ConditionSpec& spec, const ToyScene& scene) {
  ConditionBundle c;
  c.illum_params = spec.illum;
  c.agnostic_params = spec.agnostic;
  if (spec.reference) c.reference_frame = load_input(prefix + ".reference", *spec.reference);
  if (spec.structural) c.structural = load_input(prefix + ".structural", *spec.structural);
  try {
    scene.check(c);
  } catch (const StructuralError& e) {
    throw ConfigError(prefix + ": " + e.what());
  }
  return c;
}

} // namespace detail

inline Experiment resolve(const ExperimentConfig& cfg) {
  Experiment ex;
  ex.cfg = cfg;
  ex.scene = ToyScene{cfg.shape};
  ex.schedule = cfg.schedule();
  ex.c_src = detail::make_bundle("src", cfg.src, ex.scene);
  ex.c_tar = detail::make_bundle("tar", cfg.tar, ex.scene);

  switch (cfg.field) {
  case FieldKind::constant:
    ex.field = constant_field(LatentField(cfg.shape, cfg.constant_value));
    break;
  case FieldKind::point:
    ex.field = point_field(ex.scene);
    break;
  case FieldKind::mixture:
    ex.field = std::make_unique<SceneMixtureField>(ex.scene, cfg.components);
    break;
  }

  if (cfg.source) {
    ex.z0 = detail::load_input("source", *cfg.source);
    if (ex.z0.shape() != cfg.shape)
      throw ConfigError("source: stack shape " + ex.z0.shape().str() + " != configured shape " + cfg.shape.str());
  } else {
    ex.z0 = render_target(ex.scene, ex.c_src);
  }

  switch (cfg.mask) {
  case MaskSource::ones:
    ex.mask = Mask::ones(cfg.shape);
    break;
  case MaskSource::zeros:
    ex.mask = Mask::zeros(cfg.shape);
    break;
  case MaskSource::scene:
    ex.mask = ex.scene.foreground(ex.c_src.agnostic_params);
    break;
  case MaskSource::file: {
    const LatentField raw = detail::load_input("mask", cfg.mask_path);
    try {
      ex.mask = downsample_mask(Mask(raw.shape(), std::vector<double>(raw.values().begin(), raw.values().end())),
                                cfg.shape);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("mask: ") + e.what());
    }
    break;
  }
  }

  ex.eps = sample_noise(cfg.seed, cfg.shape);
  return ex;
}

struct CommandResult {
  MetricsReport metrics;
  bool check_failed = false;
};

namespace detail {

inline void write_outputs(const std::filesystem::path& dir, const LatentField& out, MetricsReport& m) {
  std::filesystem::create_directories(dir);
  write_stack(dir / "output.fpstack", out);
  const ExportRange range = export_frames(dir, out, 0);
  m.set("export_channel", range.channel);
  m.set("export_min", range.min);
  m.set("export_max", range.max);
}

inline void write_metrics(const std::filesystem::path& dir, const MetricsReport& m) {
  std::filesystem::create_directories(dir);
  write_file(dir / "metrics.txt", m.str());
}

inline void edit_metrics(const Experiment& ex, const LatentField& out, MetricsReport& m) {
  const LatentField source_render = render_target(ex.scene, ex.c_src);
  m.set("fg_structure_score", fg_structure_score(out, source_render, ex.mask));
  m.set("bg_change_rms", bg_change_rms(out, ex.z0, ex.mask));
}

} // namespace detail

/// Plain sampling from eps under the target condition.
inline CommandResult cmd_generate(const Experiment& ex) {
  CommandResult res;
  const GenerateResult g = generate(*ex.field, ex.c_tar, ex.eps, ex.schedule);
  res.metrics.set("command", std::string("generate"));
  res.metrics.set("nfe", g.trace.nfe.count);
  detail::write_outputs(ex.cfg.out, g.output, res.metrics);
  detail::write_metrics(ex.cfg.out, res.metrics);
  return res;
}

inline CommandResult cmd_edit(const Experiment& ex) {
  CommandResult res;
  const EditReport rep = run_edit(*ex.field, ex.z0, ex.c_src, ex.c_tar, ex.eps, ex.edit_config(ex.cfg.reuse_interval));
  auto& m = res.metrics;
  m.set("command", std::string("edit"));
  m.set("nfe", rep.nfe);
  m.set("residual_recomputations", rep.residual_recomputations);
  m.set("reuse_interval", ex.cfg.reuse_interval);
  if (ex.identity()) {
    const double err = relative_error(rep.output, ex.z0);
    m.set("identity_error", err);
    if (ex.cfg.check_identity) {
      res.check_failed = !(err <= ex.cfg.identity_tol);
      m.set("identity_check", !res.check_failed);
    }
  }
  detail::edit_metrics(ex, rep.output, m);
  detail::write_outputs(ex.cfg.out, rep.output, m);
  detail::write_metrics(ex.cfg.out, m);
  return res;
}

inline CommandResult cmd_flowedit(const Experiment& ex) {
  CommandResult res;
  FlowEditConfig fe{ex.schedule, ex.cfg.flowedit_noise, ex.cfg.flowedit_n_avg, ex.cfg.seed};
  const FlowEditResult r = flowedit_run(*ex.field, ex.z0, ex.c_src, ex.c_tar, fe);
  auto& m = res.metrics;
  m.set("command", std::string("flowedit"));
  m.set("nfe", r.nfe);
  m.set("noise_mode", std::string(ex.cfg.flowedit_noise == NoiseMode::fixed ? "fixed" : "fresh"));
  m.set("n_avg", ex.cfg.flowedit_n_avg);
  if (ex.identity()) m.set("identity_error", relative_error(r.output, ex.z0));
  detail::edit_metrics(ex, r.output, m);
  detail::write_outputs(ex.cfg.out, r.output, m);
  detail::write_metrics(ex.cfg.out, m);
  return res;
}

/// Writes equivalence.txt (one "t deviation" row per knot) and fails the check when any deviation
/// exceeds the tolerance.
inline CommandResult cmd_equivalence(const Experiment& ex) {
  CommandResult res;
  const EquivalenceReport rep =
      equivalence_check(*ex.field, ex.z0, ex.c_src, ex.c_tar, ex.schedule, ex.cfg.seed, ex.cfg.equivalence_tol);
  auto& m = res.metrics;
  m.set("command", std::string("equivalence"));
  m.set("passed", rep.passed);
  m.set("max_deviation", rep.max_deviation);
  m.set("tol", rep.tol);
  m.set("flowedit_nfe", rep.flowedit_nfe);
  m.set("rcf_nfe", rep.rcf_nfe);
  res.check_failed = !rep.passed;

  std::string table = "# t deviation\n";
  char buf[96];
  for (const auto& s : rep.steps) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", s.t, s.deviation);
    table += buf;
  }
  std::filesystem::create_directories(ex.cfg.out);
  write_file(ex.cfg.out / "equivalence.txt", table);
  detail::write_metrics(ex.cfg.out, m);
  return res;
}

struct SweepRow {
  std::size_t r;
  std::size_t nfe;
  double reuse_gap;                     // RMS(edit(r) - edit(1))
  std::optional<double> identity_error; // identity runs only
};

inline std::vector<SweepRow> sweep_reuse(const Experiment& ex, const std::vector<std::size_t>& r_values) {
  const EditReport base = run_edit(*ex.field, ex.z0, ex.c_src, ex.c_tar, ex.eps, ex.edit_config(1));
  std::vector<SweepRow> rows;
  for (std::size_t r : r_values) {
    const EditReport rep = r == 1 ? base : run_edit(*ex.field, ex.z0, ex.c_src, ex.c_tar, ex.eps, ex.edit_config(r));
    SweepRow row{r, rep.nfe, rms_diff(rep.output, base.output), std::nullopt};
    if (ex.identity()) row.identity_error = relative_error(rep.output, ex.z0);
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_sweep(const std::vector<SweepRow>& rows) {
  std::string out = "r\tnfe\treuse_gap\tidentity_error\n";
  char buf[128];
  for (const auto& row : rows) {
    char ident[40] = "-";
    if (row.identity_error) std::snprintf(ident, sizeof ident, "%.9g", *row.identity_error);
    std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.9g\t%s\n", row.r, row.nfe, row.reuse_gap, ident);
    out += buf;
  }
  return out;
}

inline CommandResult cmd_sweep_reuse(const Experiment& ex) {
  CommandResult res;
  const auto rows = sweep_reuse(ex, ex.cfg.sweep_r);
  std::filesystem::create_directories(ex.cfg.out);
  write_file(ex.cfg.out / "sweep.tsv", format_sweep(rows));
  auto& m = res.metrics;
  m.set("command", std::string("sweep-reuse"));
  for (const auto& row : rows) {
    const std::string k = "r" + std::to_string(row.r) + ".";
    m.set(k + "nfe", row.nfe);
    m.set(k + "reuse_gap", row.reuse_gap);
    if (row.identity_error) m.set(k + "identity_error", *row.identity_error);
  }
  detail::write_metrics(ex.cfg.out, m);
  return res;
}

} // namespace rcflow
