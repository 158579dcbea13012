// Generates a pair with a known entropic OT plan, fits a fresh potential to the
// unpaired samples and reports how close the learned conditionals are.
//
//   benchmark_demo [dim] [eps] [k_true] [k_model] [iters] [lr] [batch] [seed] [restarts]

#include "lightsb/lightsb.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

int main(int argc, char** argv) {
  auto arg = [&](int i, const char* fallback) { return std::string(argc > i ? argv[i] : fallback); };
  const lightsb::Index dim = std::stol(arg(1, "2"));
  const double eps = std::stod(arg(2, "0.1"));
  const lightsb::Index k_true = std::stol(arg(3, "5"));

  lightsb::SolverConfig config;
  config.epsilon = eps;
  config.n_components = std::stol(arg(4, "10"));
  config.n_iters = std::stol(arg(5, "10000"));
  config.learning_rate = std::stod(arg(6, "0.01"));
  config.batch_size_0 = config.batch_size_1 = std::stol(arg(7, "128"));
  config.seed = std::stoull(arg(8, "1"));
  config.n_restarts = std::stol(arg(9, "1"));

  lightsb::CounterRng rng(config.seed + 1000);
  const lightsb::GroundTruthPair pair =
      lightsb::make_ground_truth_pair(dim, k_true, eps, lightsb::SourceSpec{}, 20000, rng);
  // Unpaired training data: an independent source sample for x0.
  lightsb::CounterRng source_rng = rng.fork();
  const lightsb::SampleSet x0 = pair.source.sample(dim, 20000, source_rng);

  const auto start = std::chrono::steady_clock::now();
  const lightsb::TrainResult result = lightsb::train(config, x0, pair.x1);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  lightsb::CounterRng eval_rng(7);
  const auto uvp = lightsb::cbw2_uvp(result.potential, pair, 1000, 0, eval_rng);
  std::printf("D=%ld eps=%g K=%ld iters=%ld lr=%g restarts=%ld  cBW2-UVP = %.4f%% (+- %.4f)  train %.2fs\n",
              static_cast<long>(dim), eps, static_cast<long>(config.n_components),
              static_cast<long>(config.n_iters), config.learning_rate, static_cast<long>(config.n_restarts), uvp.value,
              uvp.std_error, seconds);
  return 0;
}
