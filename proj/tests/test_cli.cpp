#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tep/cli.hpp"
#include "tep/config.hpp"

using namespace tep;
using config::RunConfig;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("tep_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunConfig blobs_train(const fs::path& out) {
  auto cfg = RunConfig::parse(
      "dataset = blobs\n"
      "blobs_per_class = 20\n"
      "blobs_test_per_class = 10\n"
      "blobs_dim = 4\n"
      "hidden = 6\n"
      "epochs = 3\n"
      "batch_size = 10\n"
      "temperature = 0.05\n"
      "chains = 2\n"
      "steps = 20\n"
      "burn_in = 5\n"
      "threads = 1\n");
  cfg.set("out", out.string());
  return cfg;
}

}  // namespace

TEST(Config, ParsesCommentsAndWhitespace) {
  auto cfg = RunConfig::parse("# comment\n  alpha = 1.5 \n\nname=hello world\nflag = yes\nlist = 1, 2,3\n");
  EXPECT_DOUBLE_EQ(cfg.get_double("alpha", 0.0), 1.5);
  EXPECT_EQ(cfg.get_string("name", ""), "hello world");
  EXPECT_TRUE(cfg.get_bool("flag", false));
  EXPECT_EQ(cfg.get_doubles("list", {}), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(cfg.get_size("missing", 7), 7u);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(RunConfig::parse("novalue\n"), config::ConfigError);
  EXPECT_THROW(RunConfig::parse(" = 3\n"), config::ConfigError);
  auto cfg = RunConfig::parse("x = abc\nn = -3\nb = maybe\nl = ,\n");
  EXPECT_THROW(cfg.get_double("x", 0.0), config::ConfigError);
  EXPECT_THROW(cfg.get_size("n", 0), config::ConfigError);
  EXPECT_THROW(cfg.get_bool("b", false), config::ConfigError);
  EXPECT_THROW(cfg.get_doubles("l", {}), config::ConfigError);
  EXPECT_THROW(cfg.require_string("absent"), config::ConfigError);
  EXPECT_THROW(RunConfig::from_file("/nonexistent/tep.cfg"), config::ConfigError);
}

TEST(Config, UnknownKeysAreRejected) {
  auto cfg = RunConfig::parse("known = 1\ntypo = 2\n");
  cfg.get_size("known", 0);
  try {
    cfg.reject_unknown();
    FAIL();
  } catch (const config::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("typo"), std::string::npos);
  }
}

TEST(Config, ResolvedRenderingRoundTrips) {
  auto cfg = RunConfig::parse("b = 0.1\n");
  cfg.get_double("b", 0.0);
  cfg.get_double("a", 1.0 / 3.0);
  cfg.get_doubles("g", {1e-3, 1.0});
  const auto text = cfg.render_resolved();
  EXPECT_EQ(text.rfind("a = ", 0), 0u);  // sorted
  auto again = RunConfig::parse(text);
  EXPECT_EQ(again.get_double("a", 0.0), 1.0 / 3.0);
  EXPECT_EQ(again.get_doubles("g", {}), (std::vector<double>{1e-3, 1.0}));
}

TEST(Config, LaterSetWins) {
  auto cfg = RunConfig::parse("k = 1\n");
  cfg.set("k", "2");
  EXPECT_EQ(cfg.get_size("k", 0), 2u);
}

TEST(Cli, VerifyPassesAndWritesOutputs) {
  const auto out = scratch("verify");
  auto cfg = RunConfig::parse("n_instances = 4\ntrial_distributions = 5\n");
  cfg.set("out", out.string());
  std::ostringstream log;
  EXPECT_EQ(cli::run_command("verify", cfg, log), cli::kOk) << log.str();
  EXPECT_TRUE(fs::exists(out / "verify.csv"));
  EXPECT_TRUE(fs::exists(out / "verify.cfg"));
  EXPECT_NE(slurp(out / "verify.cfg").find("n_instances = 4"), std::string::npos);
  fs::remove_all(out);
}

TEST(Cli, VerifyNamesInjectedFailure) {
  const auto out = scratch("verify_bad");
  auto cfg = RunConfig::parse("n_instances = 3\ntrial_distributions = 5\n");
  cfg.set("out", out.string());
  auto hooks = checks::default_hooks();
  hooks.decomposition_residual = [](const System& sys, const ParamVector& theta, Temperature t) {
    // Sign error in the KL term.
    return checks::default_hooks().decomposition_residual(sys, theta, t) + 0.5 * t.value();
  };
  std::ostringstream log;
  EXPECT_EQ(cli::run_command("verify", cfg, log, hooks), cli::kCheckFailed);
  EXPECT_NE(log.str().find("decomposition_residual"), std::string::npos) << log.str();
  fs::remove_all(out);
}

TEST(Cli, UsageErrorsExitWithTwo) {
  std::ostringstream log;
  auto zero = RunConfig::parse("n_instances = 0\n");
  zero.set("out", scratch("zero").string());
  EXPECT_EQ(cli::run_command("verify", zero, log), cli::kUsage);
  auto unknown = RunConfig::parse("n_instance = 3\n");
  unknown.set("out", scratch("unknown").string());
  EXPECT_EQ(cli::run_command("verify", unknown, log), cli::kUsage);
  EXPECT_NE(log.str().find("n_instance"), std::string::npos);
  RunConfig empty;
  EXPECT_EQ(cli::run_command("frobnicate", empty, log), cli::kUsage);
  auto missing = RunConfig::parse("images = /nonexistent/images\n");
  missing.set("out", scratch("missing").string());
  EXPECT_EQ(cli::run_command("train", missing, log), cli::kUsage);
}

TEST(Cli, TrainIsByteIdenticalAcrossRuns) {
  const auto a = scratch("train_a"), b = scratch("train_b");
  auto ca = blobs_train(a), cb = blobs_train(b);
  std::ostringstream log;
  ASSERT_EQ(cli::run_command("train", ca, log), cli::kOk) << log.str();
  ASSERT_EQ(cli::run_command("train", cb, log), cli::kOk) << log.str();
  const auto metrics = slurp(a / "metrics.csv");
  EXPECT_EQ(metrics, slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "checkpoint.txt"), slurp(b / "checkpoint.txt"));
  EXPECT_EQ(metrics.rfind("epoch,method,beta,train_acc,test_acc,mean_J_estimate\n", 0), 0u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, TrainResumeMatchesUninterrupted) {
  const auto full = scratch("train_full"), part = scratch("train_part"), rest = scratch("train_rest");
  std::ostringstream log;
  auto cf = blobs_train(full);
  ASSERT_EQ(cli::run_command("train", cf, log), cli::kOk) << log.str();
  auto cp = blobs_train(part);
  cp.set("epochs", "1");
  ASSERT_EQ(cli::run_command("train", cp, log), cli::kOk) << log.str();
  auto cr = blobs_train(rest);
  cr.set("resume", (part / "checkpoint.txt").string());
  ASSERT_EQ(cli::run_command("train", cr, log), cli::kOk) << log.str();
  EXPECT_EQ(slurp(full / "checkpoint.txt"), slurp(rest / "checkpoint.txt"));
  EXPECT_EQ(slurp(full / "metrics.csv"), slurp(rest / "metrics.csv"));
  for (const auto& p : {full, part, rest}) fs::remove_all(p);
}

TEST(Cli, ResolvedConfigReproducesRun) {
  const auto a = scratch("train_cfg_a"), b = scratch("train_cfg_b");
  std::ostringstream log;
  auto ca = blobs_train(a);
  ASSERT_EQ(cli::run_command("train", ca, log), cli::kOk);
  auto cb = RunConfig::from_file((a / "train.cfg").string());
  cb.set("out", b.string());
  ASSERT_EQ(cli::run_command("train", cb, log), cli::kOk) << log.str();
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, SweepSinglePointGrid) {
  const auto out = scratch("sweep_one");
  auto cfg = RunConfig::parse(
      "model = spin-glass\ngrid = 1\nprobes = 2\nchains = 2\nsteps = 200\nburn_in = 20\n"
      "snr_repeats = 3\ntemperature = 1\n");
  cfg.set("out", out.string());
  std::ostringstream log;
  const int code = cli::run_command("sweep", cfg, log);
  EXPECT_TRUE(code == cli::kOk || code == cli::kCheckFailed) << log.str();
  std::istringstream in(slurp(out / "sweep.csv"));
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line.rfind("1,", 0), 0u) << line;
  }
  EXPECT_EQ(rows, 3u);  // one row per metric at the single β
  fs::remove_all(out);
}

TEST(Cli, SweepRejectsBadGrid) {
  auto cfg = RunConfig::parse("model = spin-glass\ngrid = 0, 0.5\n");
  cfg.set("out", scratch("sweep_bad").string());
  std::ostringstream log;
  EXPECT_EQ(cli::run_command("sweep", cfg, log), cli::kUsage);
}

TEST(Cli, DiagnoseSmallPasses) {
  const auto out = scratch("diagnose");
  auto cfg = RunConfig::parse("gibbs_samples = 20000\ngibbs_tv_tol = 0.05\ngauss_steps = 1500\n");
  cfg.set("out", out.string());
  std::ostringstream log;
  EXPECT_EQ(cli::run_command("diagnose", cfg, log), cli::kOk) << log.str();
  EXPECT_TRUE(fs::exists(out / "diagnose.csv"));
  fs::remove_all(out);
}
