#include <gtest/gtest.h>

#include <random>

#include "rcflow/commands.hpp"
#include "support/generators.hpp"

namespace rcflow {
namespace {

namespace fs = std::filesystem;
using testing::random_field;

class TempDir {
public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("rcflow_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
  fs::path path_;
};

std::string metric(const CommandResult& r, const std::string& key) {
  const std::string* v = r.metrics.get(key);
  return v ? *v : std::string("<missing>");
}

// ---- stack files ----

TEST(StackFile, RoundTripsWithinNineDigits) {
  std::mt19937_64 rng(1);
  const auto x = random_field(rng, {2, 5, 10, 10}, -1e6, 1e6);
  const auto y = parse_stack(format_stack(x));
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(y[i] - x[i]), 1e-6 * std::abs(x[i])) << i;
}

TEST(StackFile, FormatIsStable) {
  const LatentField x(Shape{1, 1, 2, 3}, {0.5, -1.0, 3.25, 1e-10, 2.0, 123456789.0});
  EXPECT_EQ(format_stack(x), "FPSTACK 1 1 1 2 3\n0.5 -1 3.25\n1e-10 2 123456789\n");
  EXPECT_EQ(format_stack(parse_stack(format_stack(x))), format_stack(x));
}

TEST(StackFile, RejectsMalformedInput) {
  EXPECT_THROW(parse_stack(""), FormatError);
  EXPECT_THROW(parse_stack("P5 1 1 1 1\n0\n"), FormatError);
  EXPECT_THROW(parse_stack("FPSTACK 2 1 1 1 1\n0\n"), FormatError);
  EXPECT_THROW(parse_stack("FPSTACK 1 1 1 0 1\n"), FormatError);
  EXPECT_THROW(parse_stack("FPSTACK 1 1 1 1 -2\n0\n"), FormatError);
  EXPECT_THROW(parse_stack("FPSTACK 1 1 1 1 2\n0\n"), FormatError);
  EXPECT_THROW(parse_stack("FPSTACK 1 1 1 1 1\n0 1\n"), FormatError);
  EXPECT_THROW(parse_stack("FPSTACK 1 1 1 1 1\nabc\n"), FormatError);
  EXPECT_THROW(parse_stack("FPSTACK 1 1 1 1 1\nnan\n"), FormatError);
  EXPECT_THROW(parse_stack("FPSTACK 1 1 1 1 1\n1.5x\n"), FormatError);
  EXPECT_NO_THROW(parse_stack("FPSTACK 1 1 1 1 2\n  7\n\n -3 \n"));
}

TEST(StackFile, MissingFileIsAnIoError) {
  EXPECT_THROW(read_stack("/nonexistent/dir/x.fpstack"), IoError);
}

TEST(ExportFrames, WritesOnePgmPerFrame) {
  TempDir dir;
  LatentField x(Shape{2, 1, 2, 2}, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0});
  const auto range = export_frames(dir.path(), x);
  EXPECT_EQ(range.min, 0.0);
  EXPECT_EQ(range.max, 7.0);
  const std::string f0 = read_file(dir / "frame_000.pgm");
  const std::string f1 = read_file(dir / "frame_001.pgm");
  const std::string header = "P5\n2 2\n255\n";
  ASSERT_EQ(f0.size(), header.size() + 4);
  EXPECT_EQ(f0.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(f0[header.size()]), 0);
  EXPECT_EQ(static_cast<unsigned char>(f1.back()), 255);
  EXPECT_FALSE(fs::exists(dir / "frame_002.pgm"));
}

// ---- config ----

std::string config_error(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "<no error>";
}

TEST(Config, Defaults) {
  const auto cfg = parse_config("");
  EXPECT_EQ(cfg.steps, 50u);
  EXPECT_EQ(cfg.reuse_interval, 10u);
  EXPECT_EQ(cfg.hf_lambda, 0.5);
  EXPECT_EQ(cfg.hf_rho, 0.8);
  EXPECT_TRUE(cfg.hf_enabled);
  EXPECT_EQ(cfg.src, cfg.tar);
  EXPECT_EQ(cfg.sweep_r, (std::vector<std::size_t>{1, 2, 5, 10}));
}

TEST(Config, ParsesEveryKnownKey) {
  const auto cfg = parse_config(R"(
    # comment line
    seed = 12
    shape = 3 2 8 6
    knots = 0 0.25 0.5 1
    reuse_interval = 2      # trailing comment
    hf_lambda = 0.25
    hf_rho = 0.6
    hf_enabled = false
    mask = scene
    field = mixture
    component.0.weight = 0.75
    component.0.offset = 0
    component.0.seed = 4
    component.1.weight = 0.25
    component.1.offset = 0.1
    component.1.seed = 5
    src.illum = 1 0 0 0.3
    src.agnostic = 3 1 0.3
    tar.illum = 2 0.1 0 0.3
    out = /tmp/x
    flowedit.noise = fixed
    flowedit.n_avg = 1
    equivalence.tol = 1e-8
    sweep.r_values = 1 3
    check_identity = true
    identity_tol = 1e-4
  )");
  EXPECT_EQ(cfg.seed, 12u);
  EXPECT_EQ(cfg.shape, (Shape{3, 2, 8, 6}));
  EXPECT_EQ(cfg.schedule().steps(), 3u);
  EXPECT_EQ(cfg.reuse_interval, 2u);
  EXPECT_FALSE(cfg.hf_enabled);
  EXPECT_EQ(cfg.mask, MaskSource::scene);
  EXPECT_EQ(cfg.field, FieldKind::mixture);
  ASSERT_EQ(cfg.components.size(), 2u);
  EXPECT_EQ(cfg.components[1].offset_seed, 5u);
  EXPECT_EQ(cfg.tar.illum, (std::vector<double>{2, 0.1, 0, 0.3}));
  EXPECT_EQ(cfg.tar.agnostic, cfg.src.agnostic);
  EXPECT_EQ(cfg.flowedit_noise, NoiseMode::fixed);
  EXPECT_EQ(cfg.sweep_r, (std::vector<std::size_t>{1, 3}));
  EXPECT_TRUE(cfg.check_identity);
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_NE(config_error("hf_lamda = 0.5").find("hf_lamda"), std::string::npos);
  EXPECT_NE(config_error("hf_lambda = 1.5").find("hf_lambda"), std::string::npos);
  EXPECT_NE(config_error("hf_rho = -0.1").find("hf_rho"), std::string::npos);
  EXPECT_NE(config_error("steps = 10\nreuse_interval = 11").find("reuse_interval"), std::string::npos);
  EXPECT_NE(config_error("reuse_interval = 0").find("reuse_interval"), std::string::npos);
  EXPECT_NE(config_error("seed = 1\nseed = 2").find("seed"), std::string::npos);
  EXPECT_NE(config_error("steps = 0").find("steps"), std::string::npos);
  EXPECT_NE(config_error("shape = 1 1 8").find("shape"), std::string::npos);
  EXPECT_NE(config_error("src.illum = 1 0 0").find("src.illum"), std::string::npos);
  EXPECT_NE(config_error("knots = 0 0.5 0.4 1").find("knots"), std::string::npos);
  EXPECT_NE(config_error("steps = 4\nreuse_interval = 1\nsweep.r_values = 1 5").find("sweep.r_values"), std::string::npos);
  EXPECT_NE(config_error("flowedit.noise = fixed\nflowedit.n_avg = 2").find("flowedit.n_avg"), std::string::npos);
  EXPECT_NE(config_error("field = mixture\ncomponent.0.weight = 0.5").find("weight"), std::string::npos);
  EXPECT_NE(config_error("just words").find("line 1"), std::string::npos);
}

TEST(Config, OverrideReplacesOrAppends) {
  auto kv = parse_key_values("seed = 1\n");
  override_key(kv, "seed", "9");
  override_key(kv, "hf_rho", "0.5");
  const auto cfg = config_from_key_values(kv);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.hf_rho, 0.5);
}

// ---- metrics ----

TEST(Metrics, ReportKeepsInsertionOrder) {
  MetricsReport m;
  m.set("b", std::size_t{2});
  m.set("a", 0.5);
  m.set("flag", true);
  m.set("b", std::size_t{3});
  EXPECT_EQ(m.str(), "b=3\na=0.5\nflag=true\n");
  ASSERT_NE(m.get("a"), nullptr);
  EXPECT_EQ(m.get("zzz"), nullptr);
}

TEST(Metrics, StructureScore) {
  std::mt19937_64 rng(2);
  const Shape s{1, 1, 8, 8};
  const auto a = random_field(rng, s), b = random_field(rng, s);
  const Mask ones = Mask::ones(s);
  EXPECT_NEAR(fg_structure_score(a, a, ones), 1.0, 1e-12);
  EXPECT_NEAR(fg_structure_score(scaled(3.0, a), a, ones), 1.0, 1e-12);
  EXPECT_LT(fg_structure_score(a, b, ones), 0.9);
  EXPECT_EQ(fg_structure_score(a, b, Mask::zeros(s)), 0.0);
  EXPECT_EQ(fg_structure_score(LatentField(s, 1.0), LatentField(s, 2.0), ones), 1.0);
  EXPECT_EQ(fg_structure_score(LatentField(s, 1.0), a, ones), 0.0);
}

TEST(Metrics, BackgroundChange) {
  const Shape s{1, 1, 1, 4};
  const LatentField a(s, {1.0, 2.0, 3.0, 4.0}), b(s, {1.0, 2.0, 0.0, 0.0});
  const Mask m(Mask::grid_of(s), std::vector<double>{0.0, 0.0, 1.0, 1.0});
  EXPECT_EQ(bg_change_rms(a, b, m), 0.0);
  EXPECT_NEAR(bg_change_rms(a, b, Mask::zeros(s)), std::sqrt(25.0 / 4.0), 1e-15);
  EXPECT_EQ(bg_change_rms(a, b, Mask::ones(s)), 0.0);
}

// ---- commands ----

std::string base_config(const fs::path& out, std::size_t steps = 50) {
  return "seed = 3\nshape = 2 1 16 16\nsteps = " + std::to_string(steps) + "\nout = " + out.string() + "\n";
}

TEST(Commands, GenerateConstantField) {
  TempDir dir;
  const auto cfg = parse_config(base_config(dir / "g") + "field = constant\nfield.constant = 0.25\n");
  const auto res = cmd_generate(resolve(cfg));
  EXPECT_EQ(metric(res, "nfe"), "50");
  const auto out = read_stack(dir / "g" / "output.fpstack");
  const auto expect = sample_noise(3, cfg.shape) + LatentField(cfg.shape, 0.25);
  EXPECT_LE(max_abs_diff(out, expect), 1e-8 * (1.0 + expect.max_abs()));
  EXPECT_TRUE(fs::exists(dir / "g" / "frame_001.pgm"));
  EXPECT_TRUE(fs::exists(dir / "g" / "metrics.txt"));
}

TEST(Commands, RerunsAreByteIdentical) {
  TempDir dir;
  const std::string body = "field = point\ntar.illum = 1.5 0.2 0.5 0.8\nmask = scene\n";
  cmd_edit(resolve(parse_config(base_config(dir / "a") + body)));
  cmd_edit(resolve(parse_config(base_config(dir / "b") + body)));
  for (const char* f : {"output.fpstack", "frame_000.pgm", "frame_001.pgm", "metrics.txt"})
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
}

TEST(Commands, EditIdentity) {
  TempDir dir;
  const auto cfg = parse_config(base_config(dir / "e") + "field = point\ncheck_identity = true\n");
  const auto res = cmd_edit(resolve(cfg));
  EXPECT_EQ(metric(res, "nfe"), "55");
  EXPECT_LE(std::stod(metric(res, "identity_error")), 1e-5);
  EXPECT_EQ(metric(res, "identity_check"), "true");
  EXPECT_FALSE(res.check_failed);
}

TEST(Commands, ZeroMaskWithoutTransferMatchesGenerate) {
  TempDir dir;
  const std::string body = "field = mixture\ncomponent.0.weight = 0.5\ncomponent.0.offset = 0\n"
                           "component.1.weight = 0.5\ncomponent.1.offset = 0.2\ncomponent.1.seed = 8\n"
                           "tar.illum = 1.5 0.2 0.5 0.8\n";
  cmd_generate(resolve(parse_config(base_config(dir / "g") + body)));
  cmd_edit(resolve(parse_config(base_config(dir / "e") + body + "mask = zeros\nhf_lambda = 0\n")));
  EXPECT_EQ(read_file(dir / "g" / "output.fpstack"), read_file(dir / "e" / "output.fpstack"));
}

TEST(Commands, FlowEditCounts) {
  TempDir dir;
  const auto cfg = parse_config(base_config(dir / "f") + "field = point\ntar.illum = 2 0 0 0.2\nflowedit.n_avg = 2\n");
  EXPECT_EQ(metric(cmd_flowedit(resolve(cfg)), "nfe"), "200");
}

TEST(Commands, FixedNoiseIdentityReproducesTheInputStack) {
  TempDir dir;
  std::mt19937_64 rng(4);
  write_stack(dir / "in.fpstack", random_field(rng, {2, 1, 16, 16}));
  const auto cfg = parse_config(base_config(dir / "f") + "field = point\nflowedit.noise = fixed\nsource = " +
                                (dir / "in.fpstack").string() + "\n");
  const auto res = cmd_flowedit(resolve(cfg));
  EXPECT_EQ(metric(res, "identity_error"), "0");
  EXPECT_EQ(read_file(dir / "in.fpstack"), read_file(dir / "f" / "output.fpstack"));
}

TEST(Commands, EquivalencePasses) {
  TempDir dir;
  const auto cfg = parse_config(base_config(dir / "q", 20) +
                                "field = mixture\ncomponent.0.weight = 0.5\ncomponent.0.offset = 0\n"
                                "component.1.weight = 0.5\ncomponent.1.offset = 0.3\ncomponent.1.seed = 21\n"
                                "tar.illum = 1.3 -0.1 1.0 0.5\n");
  const auto res = cmd_equivalence(resolve(cfg));
  EXPECT_EQ(metric(res, "passed"), "true");
  EXPECT_FALSE(res.check_failed);
  const std::string table = read_file(dir / "q" / "equivalence.txt");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 22);
}

TEST(Commands, SweepReuse) {
  TempDir dir;
  const auto cfg = parse_config(base_config(dir / "s") + "field = point\nmask = scene\ntar.illum = 1.5 0.2 0.5 0.8\n"
                                                         "sweep.r_values = 1 2 5 10 50\n");
  const Experiment ex = resolve(cfg);
  const auto rows = sweep_reuse(ex, cfg.sweep_r);
  ASSERT_EQ(rows.size(), 5u);
  const std::size_t nfe[] = {100, 75, 60, 55, 51};
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].nfe, nfe[i]) << rows[i].r;
  EXPECT_EQ(rows[0].reuse_gap, 0.0);
  EXPECT_FALSE(rows[0].identity_error.has_value());
  cmd_sweep_reuse(ex);
  const std::string tsv = read_file(dir / "s" / "sweep.tsv");
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "r\tnfe\treuse_gap\tidentity_error");
}

TEST(Commands, ResolveErrorsNameTheKey) {
  auto expect_key = [](const std::string& text, const std::string& key) {
    try {
      resolve(parse_config(text));
      ADD_FAILURE() << "expected ConfigError for " << key;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  };
  expect_key("source = /nonexistent.fpstack\n", "source");
  expect_key("mask = /nonexistent_mask.fpstack\n", "mask");
  expect_key("src.reference = /nonexistent_ref.fpstack\n", "src.reference");
}

TEST(Commands, MaskFileIsPooledToTheLatentGrid) {
  TempDir dir;
  write_stack(dir / "mask.fpstack", LatentField(Shape{2, 1, 32, 32}, 1.0));
  const auto cfg = parse_config(base_config(dir / "m") + "mask = " + (dir / "mask.fpstack").string() + "\n");
  const Experiment ex = resolve(cfg);
  EXPECT_EQ(ex.mask.shape(), (Shape{2, 1, 16, 16}));
  EXPECT_TRUE(ex.mask.all_equal(1.0));
}

} // namespace
} // namespace rcflow
