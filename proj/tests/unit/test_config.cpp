#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "sqw/config.hpp"
#include "sqw/harness.hpp"

using namespace sqw;
namespace fs = std::filesystem;

namespace {

std::string violations_of(const std::string& text) {
  try {
    validate(parse_config_text(text));
  } catch (const ConfigError& err) {
    return err.what();
  }
  return {};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sqw_test_" + name);
  fs::remove_all(dir);
  return dir;
}

const char* kGap = R"(schema: 1
seed: 7
graph: {kind: cycle, size: 16}
family: {kind: identity}
estimators: [gapprob]
params:
  n_samples: 1000
  ball: {root: 0, radius: 4}
  etas: [0.003, 0.01, 0.03]
  z_points: [[0.99, 0], [1.01, 0], [0, 1.01]]
)";

}  // namespace

TEST(Config, MinimalConfigFillsDefaults) {
  const auto cfg = parse_config_text("schema: 1\ngraph: {kind: cycle, size: 16}\nestimators: [gapprob]\n");
  EXPECT_NO_THROW(validate(cfg));
  EXPECT_EQ(cfg.graph.kind, GraphSpec::Kind::Cycle);
  EXPECT_EQ(cfg.family.kind, FamilySpec::Kind::Identity);
  EXPECT_EQ(cfg.params.n_samples, 1000);
  EXPECT_DOUBLE_EQ(cfg.params.s, 0.2);
  EXPECT_NEAR(cfg.params.beta_value(), 0.2 / 1.2 - 1e-3, 1e-15);
  EXPECT_TRUE(cfg.selects(Estimator::GapProb));
}

TEST(Config, DecayRejectsLargeS) {
  const auto msg = violations_of(
      "schema: 1\ngraph: {kind: cycle, size: 60}\nfamily: {kind: near_identity, strengths: [0.2]}\n"
      "estimators: [decay]\nparams: {s: 0.5}\n");
  EXPECT_NE(msg.find("s must be < 1/3"), std::string::npos) << msg;
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_config_text("schema: 1\nestimators: [gapprob]\nparams: {gamma_rate: 3}\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& err) {
    ASSERT_EQ(err.violations().size(), 1u);
    EXPECT_NE(err.violations()[0].find("gamma_rate"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text("schema: 1\nestimators: [gapprob]\ncolour: red\n"), ConfigError);
}

TEST(Config, SchemaAndEstimatorChecks) {
  EXPECT_THROW(parse_config_text("schema: 2\nestimators: [gapprob]\n"), ConfigError);
  EXPECT_THROW(parse_config_text("estimators: [gapprob]\n"), ConfigError);
  EXPECT_THROW(parse_config_text("schema: 1\nestimators: [teleport]\n"), ConfigError);
  EXPECT_FALSE(violations_of("schema: 1\nestimators: []\n").empty());
  EXPECT_FALSE(violations_of("schema: 1\nfamily: {kind: haar}\nestimators: [gapprob]\n").empty());
}

TEST(Config, CollectsEveryViolation) {
  try {
    validate(parse_config_text(
        "schema: 1\ngraph: {kind: cycle, size: 60}\nfamily: {kind: near_identity, strengths: [0.2]}\n"
        "estimators: [decay, fracmom]\nparams: {s: 0.5, n_samples: 1, e: [0, 1], f: [5, 7]}\n"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& err) {
    EXPECT_GE(err.violations().size(), 2u);
  }
}

TEST(Config, FmecRequiresEdgesAndBetaRange) {
  const std::string base =
      "schema: 1\ngraph: {kind: cycle, size: 16}\nfamily: {kind: near_identity, strengths: [0.2]}\n"
      "estimators: [check-fmec]\n";
  EXPECT_FALSE(violations_of(base + "params: {s: 0.3}\n").empty());
  EXPECT_TRUE(violations_of(base + "params: {s: 0.3, beta: 0.2, e: [8, 9], f: [1, 0]}\n").empty());
  EXPECT_NE(violations_of(base + "params: {s: 0.3, beta: 0.35, e: [8, 9], f: [1, 0]}\n").find("beta"),
            std::string::npos);
  EXPECT_FALSE(violations_of(base + "params: {s: 0.3, beta: 0.2, e: [8, 3], f: [1, 0]}\n").empty());
}

TEST(Config, ArcEndpointsAvoidTestEigenvalues) {
  const std::string base = "schema: 1\nestimators: [spectrum]\nparams: {arcs: [[0.5, 2.0]], test_eigenvalues: ";
  EXPECT_TRUE(violations_of(base + "[1.0]}\n").empty());
  EXPECT_FALSE(violations_of(base + "[2.0000001]}\n").empty());
}

TEST(Config, HashIsStableAndIgnoresOutput) {
  auto a = parse_config_text(kGap);
  auto b = parse_config_text(kGap);
  b.output = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
  b.seed = 8;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, KetIndexFollowsKetConvention) {
  const auto g = Digraph::build(GraphSpec::cycle(5));
  const int e = ket_index(g, {2, 1});
  EXPECT_EQ(g.edge(e).from, 1);
  EXPECT_EQ(g.edge(e).to, 2);
  EXPECT_THROW(ket_index(g, {0, 2}), std::invalid_argument);
}

TEST(Harness, GapRunWritesOneRowPerCell) {
  const auto dir = fresh_dir("gap");
  std::ostringstream log;
  const auto summary = run(parse_config_text(kGap), {dir.string(), 1, true}, log);
  EXPECT_EQ(summary.exit_code(), 0) << log.str();
  ASSERT_TRUE(fs::exists(dir / "gapprob.csv"));
  ASSERT_TRUE(fs::exists(dir / "gapprob.json"));
  ASSERT_TRUE(fs::exists(dir / "records.csv"));
  std::istringstream body(read_body((dir / "gapprob.csv").string()));
  std::string line;
  int lines = 0;
  while (std::getline(body, line)) ++lines;
  EXPECT_EQ(lines, 1 + 9);
  const auto report = verify(dir.string());
  EXPECT_GE(report.checked, 1);
  EXPECT_TRUE(report.mismatches.empty());
}

TEST(Harness, RerunIsByteIdentical) {
  const auto cfg = parse_config_text(kGap);
  const auto a = fresh_dir("rerun_a");
  const auto b = fresh_dir("rerun_b");
  std::ostringstream log;
  run(cfg, {a.string(), 1, true}, log);
  run(cfg, {b.string(), 2, true}, log);
  EXPECT_EQ(read_body((a / "gapprob.csv").string()), read_body((b / "gapprob.csv").string()));
}

TEST(Harness, VerifyDetectsTampering) {
  const auto dir = fresh_dir("tamper");
  std::ostringstream log;
  run(parse_config_text(kGap), {dir.string(), 1, true}, log);
  const auto csv = dir / "gapprob.csv";
  std::stringstream content;
  content << std::ifstream(csv).rdbuf();
  std::string text = content.str();
  const auto pos = text.rfind('0');
  ASSERT_NE(pos, std::string::npos);
  text[pos] = '1';
  std::ofstream(csv, std::ios::trunc) << text;
  EXPECT_FALSE(verify(dir.string()).mismatches.empty());

  const std::string body = read_body(csv.string());
  std::ofstream(csv, std::ios::trunc) << "# config_hash=deadbeef\n" << body;
  EXPECT_FALSE(verify(dir.string()).mismatches.empty());
}

TEST(Harness, ZeroSlackOnNoisyEstimateFails) {
  const auto dir = fresh_dir("zero_slack");
  std::ostringstream log;
  const auto cfg = parse_config_text(
      "schema: 1\nseed: 3\ngraph: {kind: path, size: 2}\nestimators: [fracmom]\n"
      "params: {s: 0.5, n_samples: 2000, z_points: [[0.5, 0], [0.9, 0], [1.1, 0]], e: [0, 1], "
      "f: [1, 0], slack_sigma: 0}\n");
  const auto summary = run(cfg, {dir.string(), 1, true}, log);
  EXPECT_EQ(summary.exit_code(), 1);
  ASSERT_FALSE(summary.failures.empty());
  EXPECT_NE(log.str().find("FAIL"), std::string::npos);
  EXPECT_FALSE(summary.failures[0].record.empty());
}

TEST(Harness, DecayLadderWritesCurvesAndSummary) {
  const auto cfg = parse_config_text(
      "schema: 1\nseed: 1\ngraph: {kind: cycle, size: 20}\n"
      "family: {kind: near_identity, strengths: [0.2, 0.1, 0.05]}\nestimators: [decay]\n"
      "params: {n_samples: 40}\n");
  const auto out = run_estimator(cfg, Estimator::Decay, Executor(1));
  std::vector<std::string> names;
  for (const auto& f : out.files) names.push_back(f.name);
  EXPECT_EQ(names.size(), 4u);
  EXPECT_NE(std::find(names.begin(), names.end(), "decay_summary.csv"), names.end());
  for (const auto& f : out.files)
    if (f.name != "decay_summary.csv") {
      EXPECT_EQ(f.header.front(), "distance");
      EXPECT_NE(std::find(f.header.begin(), f.header.end(), "fit_g"), f.header.end());
    }
}
