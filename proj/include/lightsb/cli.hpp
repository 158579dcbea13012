#pragma once

// Subcommand front end shared by the `lightsb` executable and the tests.
//
//   lightsb make-swissroll  --n N --seed S --out DIR
//   lightsb make-benchmark  --dim D --k K --eps E --n N --seed S --out DIR
//   lightsb train           --x0 F --x1 F --eps E --k K --lr LR --batch B --iters I --seed S --out DIR
//                           [--init sample|spread] [--restarts R --restart-steps W]
//   lightsb sample          --checkpoint F --cond-input F --n N --seed S --out DIR
//   lightsb trajectories    --checkpoint F --x0 F --mode em|bridge (--steps N | --times a,b,c) --seed S --out DIR
//   lightsb evaluate        --metric energy|bw2uvp|cbw2uvp|kl --against F [--checkpoint F] [--x0 F] --seed S --out DIR
//   lightsb replay          --manifest F [--out DIR]
//
// Every command writes manifest.json next to its outputs; replaying a manifest
// reproduces the outputs bit for bit (the wallclock column of loss.csv aside).

#include "lightsb/core.hpp"
#include "lightsb/datasets.hpp"
#include "lightsb/dynamics.hpp"
#include "lightsb/evaluation.hpp"
#include "lightsb/io.hpp"
#include "lightsb/mixture_potential.hpp"
#include "lightsb/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lightsb {

inline constexpr const char* kVersion = "lightsb 0.1.0";

namespace fs = std::filesystem;

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string code_version = kVersion;
  std::uint64_t seed = 0;
  SolverConfig config;
  std::map<std::string, std::string> options;
  std::map<std::string, std::string> dataset_hashes;
  std::map<std::string, std::string> outputs;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

inline nlohmann::json config_to_json(const SolverConfig& c) {
  return {{"epsilon", c.epsilon},           {"n_components", c.n_components}, {"learning_rate", c.learning_rate},
          {"batch_size_0", c.batch_size_0}, {"batch_size_1", c.batch_size_1}, {"n_iters", c.n_iters},
          {"seed", c.seed},                 {"init_scale", c.init_scale},     {"eval_every", c.eval_every},
          {"mean_init", c.mean_init == MeanInit::spread ? "spread" : "sample"},
          {"n_restarts", c.n_restarts},     {"restart_steps", c.restart_steps}};
}

inline SolverConfig config_from_json(const nlohmann::json& j) {
  SolverConfig c;
  c.epsilon = j.at("epsilon").get<double>();
  c.n_components = j.at("n_components").get<Index>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size_0 = j.at("batch_size_0").get<Index>();
  c.batch_size_1 = j.at("batch_size_1").get<Index>();
  c.n_iters = j.at("n_iters").get<Index>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.init_scale = j.at("init_scale").get<double>();
  c.eval_every = j.at("eval_every").get<Index>();
  c.mean_init = j.value("mean_init", std::string("sample")) == "spread" ? MeanInit::spread : MeanInit::sample;
  c.n_restarts = j.value("n_restarts", Index{1});
  c.restart_steps = j.value("restart_steps", Index{250});
  return c;
}

inline std::string manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["format"] = "lightsb-manifest";
  j["version"] = 1;
  j["code_version"] = m.code_version;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["seed"] = m.seed;
  j["config"] = config_to_json(m.config);
  j["options"] = m.options;
  j["dataset_hashes"] = m.dataset_hashes;
  j["outputs"] = m.outputs;
  return j.dump(2) + "\n";
}

inline RunManifest manifest_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "lightsb-manifest") {
      throw IoError("not a lightsb manifest");
    }
    RunManifest m;
    m.code_version = j.at("code_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = config_from_json(j.at("config"));
    m.options = j.at("options").get<std::map<std::string, std::string>>();
    m.dataset_hashes = j.at("dataset_hashes").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("manifest: ") + e.what());
  }
}

inline RunManifest load_manifest(const fs::path& path) { return manifest_from_json(detail::read_file(path)); }

inline std::string metrics_header() { return "metric,value,stderr,n,seed\n"; }

inline std::string metrics_row(const std::string& metric, double value, double std_error, Index n, std::uint64_t seed) {
  return metric + ',' + format_double(value) + ',' + format_double(std_error) + ',' + std::to_string(n) + ',' +
         std::to_string(seed) + '\n';
}

namespace cli_detail {

struct Options {
  std::string out;
  std::uint64_t seed = 0;

  // train
  std::string x0;
  std::string x1;
  double eps = 0.1;
  Index k = 10;
  double lr = 1e-2;
  Index batch = 128;
  Index batch1 = 0;
  Index iters = 10000;
  double init_scale = 0.1;
  std::string init = "sample";
  Index restarts = 1;
  Index restart_steps = 250;
  Index eval_every = 1000;
  bool snapshots = false;

  // sample / trajectories / evaluate
  std::string checkpoint;
  std::string cond_input;
  Index n = 1;
  std::string mode = "bridge";
  Index steps = 0;
  std::string times;
  Index record_stride = 1;
  bool csv = false;
  std::string metric;
  std::string against;
  Index n_test = 1000;
  Index n_cond = 0;
  Index n_inner = 100;
  std::string source = "gaussian";
  double source_scale = 1.0;

  // generators
  Index dim = 2;
  Index n_samples = 10000;
  double noise = 0.1;

  std::string manifest;
};

inline SourceSpec make_source(const Options& o) {
  SourceSpec s;
  if (o.source == "gaussian") {
    s.kind = SourceSpec::Kind::gaussian;
  } else if (o.source == "uniform") {
    s.kind = SourceSpec::Kind::uniform;
  } else {
    throw std::invalid_argument("--source must be gaussian or uniform");
  }
  s.scale = o.source_scale;
  return s;
}

inline std::vector<double> parse_times(const std::string& list) {
  std::vector<double> out;
  for (const auto field : detail::split(list, ',')) {
    if (!field.empty()) {
      out.push_back(detail::parse_double(field, "--times"));
    }
  }
  return out;
}

class Runner {
public:
  Runner(const Options& o, std::vector<std::string> argv, std::ostream& out)
      : o_(o), out_(out), dir_(o.out) {
    manifest_.argv = std::move(argv);
    manifest_.seed = o.seed;
  }

  void finish(const std::string& command) {
    manifest_.command = command;
    const fs::path path = dir_ / "manifest.json";
    detail::write_file(path, manifest_to_json(manifest_));
    out_ << "wrote " << path.string() << "\n";
  }

  SampleSet load_dataset(const std::string& key, const std::string& path) {
    SampleSet s = load_samples(fs::path(path));
    manifest_.dataset_hashes[key] = content_digest(s);
    return s;
  }

  void output(const std::string& key, const fs::path& path) { manifest_.outputs[key] = path.string(); }

  void make_swissroll() {
    CounterRng rng(o_.seed);
    CounterRng src = rng.fork();
    CounterRng tgt = rng.fork();
    const SampleSet x0 = standard_gaussian(o_.n_samples, 2, src);
    const SampleSet x1 = swiss_roll(o_.n_samples, tgt, o_.noise);
    save_samples(dir_ / "x0.csv", x0);
    save_samples(dir_ / "x1.csv", x1);
    output("x0", dir_ / "x0.csv");
    output("x1", dir_ / "x1.csv");
    manifest_.options = {{"n", std::to_string(o_.n_samples)}, {"noise", format_double(o_.noise)}};
    finish("make-swissroll");
  }

  void make_benchmark() {
    CounterRng rng(o_.seed);
    const SourceSpec source = make_source(o_);
    const GroundTruthPair pair = make_ground_truth_pair(o_.dim, o_.k, o_.eps, source, o_.n_samples, rng);
    save_samples(dir_ / "x0.csv", pair.x0);
    save_samples(dir_ / "x1.csv", pair.x1);
    save_checkpoint(dir_ / "checkpoint.json", pair.potential);
    output("x0", dir_ / "x0.csv");
    output("x1", dir_ / "x1.csv");
    output("checkpoint", dir_ / "checkpoint.json");
    manifest_.options = {{"dim", std::to_string(o_.dim)},     {"k", std::to_string(o_.k)},
                         {"eps", format_double(o_.eps)},      {"n", std::to_string(o_.n_samples)},
                         {"source", source.name()},           {"source_scale", format_double(source.scale)}};
    out_ << "benchmark pair: D=" << o_.dim << " K*=" << o_.k << " eps=" << o_.eps << " n=" << o_.n_samples << "\n";
    finish("make-benchmark");
  }

  void train() {
    auto [x0, x1] = load_paired(o_.x0, o_.x1);
    manifest_.dataset_hashes["x0"] = content_digest(x0);
    manifest_.dataset_hashes["x1"] = content_digest(x1);
    SolverConfig config;
    config.epsilon = o_.eps;
    config.n_components = o_.k;
    config.learning_rate = o_.lr;
    config.batch_size_0 = o_.batch;
    config.batch_size_1 = o_.batch1 > 0 ? o_.batch1 : o_.batch;
    config.n_iters = o_.iters;
    config.seed = o_.seed;
    config.init_scale = o_.init_scale;
    config.mean_init = o_.init == "spread" ? MeanInit::spread : MeanInit::sample;
    config.n_restarts = o_.restarts;
    config.restart_steps = o_.restart_steps;
    config.eval_every = o_.eval_every;
    config.validate();
    manifest_.config = config;

    std::string loss_csv = "iter,loss,wallclock_ms\n";
    const TrainCallback callback = [&](TrainReport& report, const MixturePotential& current) {
      loss_csv += std::to_string(report.iteration) + ',' + format_double(report.loss) + ',' +
                  format_double(report.wallclock_ms) + '\n';
      if (o_.snapshots) {
        const fs::path snap = dir_ / "snapshots" / ("checkpoint_" + std::to_string(report.iteration) + ".json");
        save_checkpoint(snap, current);
      }
    };
    const TrainResult result = lightsb::train(config, x0, x1, callback);
    save_checkpoint(dir_ / "checkpoint.json", result.potential);
    detail::write_file(dir_ / "loss.csv", loss_csv);
    output("checkpoint", dir_ / "checkpoint.json");
    output("loss", dir_ / "loss.csv");
    if (o_.snapshots) {
      output("snapshots", dir_ / "snapshots");
    }
    out_ << "trained K=" << config.n_components << " eps=" << config.epsilon << " for " << config.n_iters
         << " steps, final minibatch loss " << format_double(result.reports.back().loss) << "\n";
    finish("train");
  }

  void sample() {
    const MixturePotential pot = load_checkpoint(o_.checkpoint);
    const SampleSet inputs = load_dataset("cond_input", o_.cond_input);
    if (inputs.dim() != pot.dim()) {
      throw DimensionError("--cond-input has D=" + std::to_string(inputs.dim()) + ", checkpoint has D=" +
                           std::to_string(pot.dim()));
    }
    manifest_.dataset_hashes["checkpoint"] = file_digest(o_.checkpoint);
    CounterRng rng(o_.seed);
    Matrix all(inputs.size() * o_.n, pot.dim());
    for (Index i = 0; i < inputs.size(); ++i) {
      const SampleSet s = sample_conditional(pot, inputs.row(i).transpose(), o_.n, rng);
      all.middleRows(i * o_.n, o_.n) = s.data();
    }
    save_samples(dir_ / "samples.csv", SampleSet(std::move(all)));
    output("samples", dir_ / "samples.csv");
    manifest_.options = {{"n", std::to_string(o_.n)}};
    out_ << "sampled " << o_.n << " points for each of " << inputs.size() << " inputs\n";
    finish("sample");
  }

  void trajectories() {
    const MixturePotential pot = load_checkpoint(o_.checkpoint);
    manifest_.dataset_hashes["checkpoint"] = file_digest(o_.checkpoint);
    const SampleSet x0 = load_dataset("x0", o_.x0);
    if (x0.dim() != pot.dim()) {
      throw DimensionError("--x0 dimension does not match checkpoint");
    }
    CounterRng rng(o_.seed);
    TrajectoryBatch batch;
    if (o_.mode == "em") {
      if (o_.steps < 1 || !o_.times.empty()) {
        throw std::invalid_argument("--mode em requires --steps and does not accept --times");
      }
      batch = euler_maruyama(pot, x0, o_.steps, rng, o_.record_stride);
      manifest_.options = {{"mode", "em"}, {"steps", std::to_string(o_.steps)},
                           {"record_stride", std::to_string(o_.record_stride)}};
    } else if (o_.mode == "bridge") {
      if (o_.steps != 0) {
        throw std::invalid_argument("--mode bridge takes --times, not --steps");
      }
      batch = sample_bridge_trajectories(pot, x0, parse_times(o_.times), rng);
      manifest_.options = {{"mode", "bridge"}, {"times", o_.times}};
    } else {
      throw std::invalid_argument("--mode must be em or bridge");
    }
    save_trajectories(dir_ / "trajectories.bin", batch);
    output("trajectories", dir_ / "trajectories.bin");
    output("times", times_sidecar(dir_ / "trajectories.bin"));
    if (o_.csv) {
      detail::write_file(dir_ / "trajectories.csv", trajectories_to_csv(batch));
      output("trajectories_csv", dir_ / "trajectories.csv");
    }
    out_ << "simulated " << batch.n_particles() << " trajectories on " << batch.n_times() << " time points\n";
    finish("trajectories");
  }

  void evaluate() {
    CounterRng rng(o_.seed);
    std::string csv = metrics_header();
    const bool against_checkpoint = fs::path(o_.against).extension() == ".json";
    if (o_.metric == "energy" || o_.metric == "bw2uvp") {
      if (o_.checkpoint.empty() || o_.x0.empty() || against_checkpoint) {
        throw std::invalid_argument("--metric " + o_.metric +
                                    " needs --checkpoint, --x0 and a sample file for --against");
      }
      const MixturePotential pot = load_checkpoint(o_.checkpoint);
      manifest_.dataset_hashes["checkpoint"] = file_digest(o_.checkpoint);
      const SampleSet x0 = load_dataset("x0", o_.x0);
      const SampleSet target = load_dataset("against", o_.against);
      if (x0.dim() != pot.dim() || target.dim() != pot.dim()) {
        throw DimensionError("evaluate: dimension mismatch between checkpoint, --x0 and --against");
      }
      const SampleSet generated = push_forward(pot, x0, rng);
      const double value = o_.metric == "energy" ? energy_distance(generated, target) : bw2_uvp(generated, target);
      csv += metrics_row(o_.metric, value, 0.0, generated.size(), o_.seed);
      out_ << o_.metric << " = " << format_double(value) << "\n";
    } else if (o_.metric == "cbw2uvp" || o_.metric == "kl") {
      if (o_.checkpoint.empty() || !against_checkpoint) {
        throw std::invalid_argument("--metric " + o_.metric + " needs --checkpoint and a checkpoint for --against");
      }
      const MixturePotential model = load_checkpoint(o_.checkpoint);
      const MixturePotential truth = load_checkpoint(o_.against);
      manifest_.dataset_hashes["checkpoint"] = file_digest(o_.checkpoint);
      manifest_.dataset_hashes["against"] = file_digest(o_.against);
      const SourceSpec source = make_source(o_);
      MetricEstimate est;
      if (o_.metric == "cbw2uvp") {
        const MomentMode mode = o_.n_cond > 0 ? MomentMode::sampled : MomentMode::exact;
        est = cbw2_uvp(model, truth, source, o_.n_test, o_.n_cond, rng, mode);
      } else {
        const Index dim = truth.dim();
        est = kl_plan_mc(truth, model, [&](CounterRng& r) { return source.draw(dim, r); }, o_.n_test, o_.n_inner,
                         rng);
      }
      csv += metrics_row(o_.metric, est.value, est.std_error, est.n, o_.seed);
      out_ << o_.metric << " = " << format_double(est.value) << " +- " << format_double(est.std_error) << "\n";
      manifest_.options = {{"n_test", std::to_string(o_.n_test)},
                           {"n_cond", std::to_string(o_.n_cond)},
                           {"n_inner", std::to_string(o_.n_inner)},
                           {"source", source.name()}};
    } else {
      throw std::invalid_argument("--metric must be energy, bw2uvp, cbw2uvp or kl");
    }
    manifest_.options["metric"] = o_.metric;
    detail::write_file(dir_ / "metrics.csv", csv);
    output("metrics", dir_ / "metrics.csv");
    finish("evaluate");
  }

private:
  const Options& o_;
  std::ostream& out_;
  fs::path dir_;
  RunManifest manifest_;
};

}  // namespace cli_detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

namespace cli_detail {

inline int replay(const std::string& manifest_path, const std::string& out_override, std::ostream& out,
                  std::ostream& err) {
  const RunManifest m = load_manifest(manifest_path);
  std::vector<std::string> argv = m.argv;
  if (!out_override.empty()) {
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
      if (argv[i] == "--out") {
        argv[i + 1] = out_override;
        replaced = true;
      }
    }
    if (!replaced) {
      argv.push_back("--out");
      argv.push_back(out_override);
    }
  }
  return run_cli(argv, out, err);
}

}  // namespace cli_detail

/// Runs one subcommand; `args` excludes the program name. Returns the process exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using cli_detail::Options;
  Options o;
  CLI::App app{"Light Schrodinger bridge solver"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory")->required();
    sub->add_option("--seed", o.seed, "Random seed");
  };

  auto* swiss = app.add_subcommand("make-swissroll", "Write a Gaussian source and a 2D swiss-roll target");
  add_common(swiss);
  swiss->add_option("--n", o.n_samples, "Samples per distribution")->check(CLI::PositiveNumber);
  swiss->add_option("--noise", o.noise, "Swiss-roll noise std")->check(CLI::NonNegativeNumber);

  auto* bench = app.add_subcommand("make-benchmark", "Generate a source/target pair with a known EOT plan");
  add_common(bench);
  bench->add_option("--dim", o.dim, "Dimension")->check(CLI::PositiveNumber);
  bench->add_option("--k", o.k, "Components of the generating potential")->check(CLI::PositiveNumber);
  bench->add_option("--eps", o.eps, "Entropic regularization")->check(CLI::PositiveNumber);
  bench->add_option("--n", o.n_samples, "Number of pairs")->check(CLI::PositiveNumber);
  bench->add_option("--source", o.source, "Source law: gaussian or uniform");
  bench->add_option("--source-scale", o.source_scale, "Source scale")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Fit a mixture potential to unpaired samples");
  add_common(train);
  train->add_option("--x0", o.x0, "Source samples (CSV or binary)")->required();
  train->add_option("--x1", o.x1, "Target samples (CSV or binary)")->required();
  train->add_option("--eps", o.eps, "Entropic regularization")->check(CLI::PositiveNumber);
  train->add_option("--k", o.k, "Mixture components")->check(CLI::PositiveNumber);
  train->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  train->add_option("--batch", o.batch, "Minibatch size")->check(CLI::PositiveNumber);
  train->add_option("--batch1", o.batch1, "Target minibatch size (defaults to --batch)")->check(CLI::PositiveNumber);
  train->add_option("--iters", o.iters, "Gradient steps")->check(CLI::PositiveNumber);
  train->add_option("--init-scale", o.init_scale, "Initial diagonal of S_k")->check(CLI::PositiveNumber);
  train->add_option("--init", o.init, "Mean seeding: sample or spread")->check(CLI::IsMember({"sample", "spread"}));
  train->add_option("--restarts", o.restarts, "Candidate starts; the best after --restart-steps continues")
      ->check(CLI::PositiveNumber);
  train->add_option("--restart-steps", o.restart_steps, "Steps per candidate start")->check(CLI::PositiveNumber);
  train->add_option("--eval-every", o.eval_every, "Report interval")->check(CLI::PositiveNumber);
  train->add_flag("--snapshots", o.snapshots, "Write a checkpoint at every report");

  auto* sample = app.add_subcommand("sample", "Draw x1 ~ pi(. | x0) for each input row");
  add_common(sample);
  sample->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();
  sample->add_option("--cond-input", o.cond_input, "Input points x0")->required();
  sample->add_option("--n", o.n, "Samples per input")->check(CLI::PositiveNumber);

  auto* traj = app.add_subcommand("trajectories", "Simulate bridge trajectories from x0");
  add_common(traj);
  traj->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();
  traj->add_option("--x0", o.x0, "Start points")->required();
  traj->add_option("--mode", o.mode, "em or bridge")->check(CLI::IsMember({"em", "bridge"}));
  auto* steps = traj->add_option("--steps", o.steps, "Euler-Maruyama steps")->check(CLI::PositiveNumber);
  auto* times = traj->add_option("--times", o.times, "Comma-separated bridge times in (0, 1)");
  steps->excludes(times);
  traj->add_option("--record-stride", o.record_stride, "Record every n-th EM step")->check(CLI::PositiveNumber);
  traj->add_flag("--csv", o.csv, "Also write trajectories.csv");

  auto* eval = app.add_subcommand("evaluate", "Compute a quality metric");
  add_common(eval);
  eval->add_option("--metric", o.metric, "energy, bw2uvp, cbw2uvp or kl")
      ->required()
      ->check(CLI::IsMember({"energy", "bw2uvp", "cbw2uvp", "kl"}));
  eval->add_option("--against", o.against, "Reference sample file or checkpoint (.json)")->required();
  eval->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  eval->add_option("--x0", o.x0, "Source points pushed through the model (energy, bw2uvp)");
  eval->add_option("--n-test", o.n_test, "Test inputs for cbw2uvp / outer samples for kl")->check(CLI::PositiveNumber);
  eval->add_option("--n-cond", o.n_cond, "Sampled conditional size for cbw2uvp (0 = exact moments)");
  eval->add_option("--n-inner", o.n_inner, "Inner samples for kl")->check(CLI::PositiveNumber);
  eval->add_option("--source", o.source, "Source law of test inputs: gaussian or uniform");
  eval->add_option("--source-scale", o.source_scale, "Source scale")->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("replay", "Re-run a command from its manifest.json");
  rep->add_option("--manifest", o.manifest, "Manifest path")->required();
  rep->add_option("--out", o.out, "Override the output directory");

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("lightsb");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) {
    argv.push_back(a.data());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (rep->parsed()) {
      return cli_detail::replay(o.manifest, o.out, out, err);
    }
    cli_detail::Runner runner(o, args, out);
    if (swiss->parsed()) {
      runner.make_swissroll();
    } else if (bench->parsed()) {
      runner.make_benchmark();
    } else if (train->parsed()) {
      runner.train();
    } else if (sample->parsed()) {
      runner.sample();
    } else if (traj->parsed()) {
      runner.trajectories();
    } else if (eval->parsed()) {
      runner.evaluate();
    }
  } catch (const TrainingError& e) {
    err << "error: training aborted at iteration " << e.iteration() << ": " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace lightsb
