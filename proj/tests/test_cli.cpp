#include "lightsb/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace lightsb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lightsb_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return detail::read_file(p); }

// loss.csv minus its wallclock column (the last one).
std::string loss_without_wallclock(const fs::path& p) {
  std::istringstream is(slurp(p));
  std::string line;
  std::string out;
  while (std::getline(is, line)) {
    out += line.substr(0, line.rfind(',')) + '\n';
  }
  return out;
}

// A small benchmark pair and a trained model, shared by the tests below.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = scratch("pipeline");
    ASSERT_EQ(cli({"make-benchmark", "--dim", "2", "--k", "3", "--eps", "0.5", "--n", "400", "--seed", "7", "--out",
                   (root_ / "data").string()})
                  .code,
              0);
    const CliRun r = cli({"train", "--x0", (root_ / "data/x0.csv").string(), "--x1", (root_ / "data/x1.csv").string(),
                       "--eps", "0.5", "--k", "4", "--lr", "0.01", "--batch", "64", "--iters", "60", "--eval-every",
                       "20", "--seed", "3", "--out", (root_ / "model").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static fs::path root_;
};

fs::path CliPipeline::root_;

}  // namespace

TEST(Cli, UsageErrorsAreNonZero) {
  EXPECT_NE(cli({}).code, 0);
  EXPECT_NE(cli({"no-such-command"}).code, 0);
  EXPECT_NE(cli({"train", "--x0", "a.csv"}).code, 0);
  EXPECT_NE(cli({"make-swissroll", "--n", "-3", "--out", "x"}).code, 0);
  const fs::path dir = scratch("usage");
  const CliRun r = cli({"trajectories", "--checkpoint", "/nonexistent.json", "--x0", "/nonexistent.csv", "--steps", "3",
                     "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Cli, Version) {
  const CliRun r = cli({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("lightsb"), std::string::npos);
}

TEST(Cli, SwissRollFiles) {
  const fs::path dir = scratch("swiss");
  ASSERT_EQ(cli({"make-swissroll", "--n", "200", "--seed", "1", "--out", dir.string()}).code, 0);
  EXPECT_EQ(load_samples(dir / "x0.csv").size(), 200);
  EXPECT_EQ(load_samples(dir / "x1.csv").dim(), 2);
  const RunManifest m = load_manifest(dir / "manifest.json");
  EXPECT_EQ(m.command, "make-swissroll");
  EXPECT_EQ(m.seed, 1u);
  EXPECT_EQ(m.outputs.at("x1"), (dir / "x1.csv").string());
}

TEST(Cli, TrainingErrorExitCode) {
  const fs::path dir = scratch("diverge");
  detail::write_file(dir / "far.csv", "x0\n1e200\n1e200\n");
  const CliRun r = cli({"train", "--x0", (dir / "far.csv").string(), "--x1", (dir / "far.csv").string(), "--eps",
                     "1e-300", "--k", "2", "--iters", "5", "--out", (dir / "m").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("iteration 1"), std::string::npos) << r.err;
}

TEST(Cli, DimensionMismatchIsReported) {
  const fs::path dir = scratch("mismatch");
  detail::write_file(dir / "a.csv", "x0,x1\n1,2\n3,4\n");
  detail::write_file(dir / "b.csv", "x0\n1\n2\n");
  const CliRun r = cli({"train", "--x0", (dir / "a.csv").string(), "--x1", (dir / "b.csv").string(), "--iters", "2",
                     "--out", (dir / "m").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("D=1"), std::string::npos) << r.err;
}

TEST_F(CliPipeline, TrainWritesCheckpointLossAndManifest) {
  const MixturePotential pot = load_checkpoint(root_ / "model/checkpoint.json");
  EXPECT_EQ(pot.n_components(), 4);
  EXPECT_EQ(pot.epsilon(), 0.5);
  const std::string loss = slurp(root_ / "model/loss.csv");
  EXPECT_EQ(loss.substr(0, loss.find('\n')), "iter,loss,wallclock_ms");
  EXPECT_EQ(std::count(loss.begin(), loss.end(), '\n'), 4);

  const RunManifest m = load_manifest(root_ / "model/manifest.json");
  EXPECT_EQ(m.command, "train");
  EXPECT_EQ(m.config.n_components, 4);
  EXPECT_EQ(m.config.n_iters, 60);
  EXPECT_EQ(m.dataset_hashes.at("x0"), content_digest(load_samples(root_ / "data/x0.csv")));
  EXPECT_EQ(manifest_from_json(manifest_to_json(m)), m);
}

TEST_F(CliPipeline, ReplayIsBitIdentical) {
  const fs::path again = root_ / "model_replay";
  const CliRun r = cli({"replay", "--manifest", (root_ / "model/manifest.json").string(), "--out", again.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(again / "checkpoint.json"), slurp(root_ / "model/checkpoint.json"));
  EXPECT_EQ(loss_without_wallclock(again / "loss.csv"), loss_without_wallclock(root_ / "model/loss.csv"));
}

TEST_F(CliPipeline, TrainWithRestarts) {
  const std::vector<std::string> args{"train",     "--x0", (root_ / "data/x0.csv").string(),
                                      "--x1",      (root_ / "data/x1.csv").string(),
                                      "--eps",     "0.5",  "--k", "4", "--iters", "40", "--eval-every", "10",
                                      "--init",    "spread", "--restarts", "3", "--restart-steps", "15",
                                      "--seed",    "5",    "--out"};
  auto a = args;
  a.push_back((root_ / "restart_a").string());
  auto b = args;
  b.push_back((root_ / "restart_b").string());
  ASSERT_EQ(cli(a).code, 0);
  ASSERT_EQ(cli(b).code, 0);
  EXPECT_EQ(slurp(root_ / "restart_a/checkpoint.json"), slurp(root_ / "restart_b/checkpoint.json"));
  const RunManifest m = load_manifest(root_ / "restart_a/manifest.json");
  EXPECT_EQ(m.config.n_restarts, 3);
  EXPECT_EQ(m.config.restart_steps, 15);
  EXPECT_EQ(m.config.mean_init, MeanInit::spread);

  auto bad = args;
  bad[18] = "40";  // restart steps >= iterations
  bad.push_back((root_ / "restart_bad").string());
  EXPECT_EQ(cli(bad).code, 2);
  auto bad_init = args;
  bad_init[14] = "kmeans";
  bad_init.push_back((root_ / "restart_bad").string());
  EXPECT_NE(cli(bad_init).code, 0);
}

TEST_F(CliPipeline, SampleShapes) {
  const fs::path dir = root_ / "samples";
  detail::write_file(root_ / "cond.csv", "x0,x1\n0,0\n1,-1\n0.5,2\n");
  const CliRun r = cli({"sample", "--checkpoint", (root_ / "model/checkpoint.json").string(), "--cond-input",
                     (root_ / "cond.csv").string(), "--n", "5", "--seed", "2", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const SampleSet s = load_samples(dir / "samples.csv");
  EXPECT_EQ(s.size(), 15);
  EXPECT_EQ(s.dim(), 2);
}

TEST_F(CliPipeline, TrajectoriesBothModes) {
  const std::string ckpt = (root_ / "model/checkpoint.json").string();
  const std::string x0 = (root_ / "data/x0.csv").string();
  ASSERT_EQ(cli({"trajectories", "--checkpoint", ckpt, "--x0", x0, "--mode", "em", "--steps", "20",
                 "--record-stride", "5", "--seed", "1", "--csv", "--out", (root_ / "em").string()})
                .code,
            0);
  const TrajectoryBatch em = load_trajectories(root_ / "em/trajectories.bin");
  EXPECT_EQ(em.n_particles(), 400);
  EXPECT_EQ(em.n_times(), 5);
  EXPECT_TRUE(fs::exists(root_ / "em/trajectories.csv"));

  ASSERT_EQ(cli({"trajectories", "--checkpoint", ckpt, "--x0", x0, "--mode", "bridge", "--times", "0.25,0.5,0.75",
                 "--seed", "1", "--out", (root_ / "bridge").string()})
                .code,
            0);
  const TrajectoryBatch br = load_trajectories(root_ / "bridge/trajectories.bin");
  EXPECT_EQ(br.times, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_EQ(br.at(0), load_samples(root_ / "data/x0.csv"));

  const CliRun again = cli({"replay", "--manifest", (root_ / "bridge/manifest.json").string(), "--out",
                         (root_ / "bridge2").string()});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(slurp(root_ / "bridge2/trajectories.bin"), slurp(root_ / "bridge/trajectories.bin"));
}

TEST_F(CliPipeline, EvaluateMetrics) {
  const std::string ckpt = (root_ / "model/checkpoint.json").string();
  const std::string truth = (root_ / "data/checkpoint.json").string();
  for (const std::string metric : {"cbw2uvp", "kl"}) {
    const fs::path dir = root_ / ("eval_" + metric);
    const CliRun r = cli({"evaluate", "--metric", metric, "--checkpoint", ckpt, "--against", truth, "--n-test", "50",
                       "--n-inner", "10", "--seed", "4", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << metric << ": " << r.err;
    const std::string csv = slurp(dir / "metrics.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n') + 1), metrics_header());
    EXPECT_NE(csv.find(metric + ","), std::string::npos) << csv;
  }
  for (const std::string metric : {"energy", "bw2uvp"}) {
    const fs::path dir = root_ / ("eval_" + metric);
    const CliRun r = cli({"evaluate", "--metric", metric, "--checkpoint", ckpt, "--x0", (root_ / "data/x0.csv").string(),
                       "--against", (root_ / "data/x1.csv").string(), "--seed", "4", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << metric << ": " << r.err;
    EXPECT_NE(slurp(dir / "metrics.csv").find(metric + ","), std::string::npos);
  }
  const CliRun a = cli({"replay", "--manifest", (root_ / "eval_cbw2uvp/manifest.json").string(), "--out",
                     (root_ / "eval_again").string()});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(slurp(root_ / "eval_again/metrics.csv"), slurp(root_ / "eval_cbw2uvp/metrics.csv"));
}
