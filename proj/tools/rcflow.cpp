#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rcflow/commands.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kIoFailure = 1,
  kConfigError = 2,
  kNumericFailure = 3,
  kCheckFailed = 4,
};

int run(const std::string& command, const rcflow::ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const rcflow::Experiment ex = rcflow::resolve(cfg);
  rcflow::CommandResult res;
  if (command == "generate") res = rcflow::cmd_generate(ex);
  else if (command == "edit") res = rcflow::cmd_edit(ex);
  else if (command == "flowedit") res = rcflow::cmd_flowedit(ex);
  else if (command == "equivalence") res = rcflow::cmd_equivalence(ex);
  else res = rcflow::cmd_sweep_reuse(ex);

  std::cout << res.metrics.str();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  std::cerr << "rcflow " << command << ": wrote " << cfg.out.string() << " in " << elapsed.count() << " s\n";
  return res.check_failed ? kCheckFailed : kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual-corrected flow editing on analytic velocity fields"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reuse;
  std::optional<double> lambda, rho;

  for (const char* name : {"generate", "edit", "flowedit", "equivalence", "sweep-reuse"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Experiment config (key = value lines)")->required();
    sub->add_option("--out", out, "Output directory (overrides 'out')");
    sub->add_option("--seed", seed, "Noise seed (overrides 'seed')");
    sub->add_option("--r", reuse, "Residual reuse interval (overrides 'reuse_interval')");
    sub->add_option("--lambda", lambda, "HF transfer intensity (overrides 'hf_lambda')");
    sub->add_option("--rho", rho, "Frequency threshold (overrides 'hf_rho')");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  rcflow::ExperimentConfig cfg;
  try {
    auto kv = rcflow::parse_key_values(rcflow::read_file(config_path));
    if (out) rcflow::override_key(kv, "out", *out);
    if (seed) rcflow::override_key(kv, "seed", std::to_string(*seed));
    if (reuse) rcflow::override_key(kv, "reuse_interval", std::to_string(*reuse));
    // Shortest round-trip representation keeps the override exact.
    auto real = [](double v) {
      char buf[32];
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, p);
    };
    if (lambda) rcflow::override_key(kv, "hf_lambda", real(*lambda));
    if (rho) rcflow::override_key(kv, "hf_rho", real(*rho));
    cfg = rcflow::config_from_key_values(kv);
  } catch (const rcflow::IoError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const rcflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    return run(command, cfg);
  } catch (const rcflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const rcflow::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  }
}
