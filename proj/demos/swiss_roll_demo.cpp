// Gaussian -> swiss roll at a chosen epsilon; writes bridge trajectories for
// 64 start points to swiss_roll_trajectories.csv for plotting.
//
//   swiss_roll_demo [eps] [lr] [iters]

#include "lightsb/io.hpp"
#include "lightsb/lightsb.hpp"

#include <cstdio>
#include <fstream>
#include <string>

int main(int argc, char** argv) {
  lightsb::SolverConfig config;
  config.epsilon = argc > 1 ? std::stod(argv[1]) : 0.1;
  config.learning_rate = argc > 2 ? std::stod(argv[2]) : 1e-3;
  config.n_iters = argc > 3 ? std::stol(argv[3]) : 10000;
  config.n_components = 500;
  config.eval_every = config.n_iters / 10 > 0 ? config.n_iters / 10 : 1;

  lightsb::CounterRng rng(0);
  const lightsb::SampleSet x0 = lightsb::standard_gaussian(10000, 2, rng);
  const lightsb::SampleSet x1 = lightsb::swiss_roll(10000, rng);

  const auto result = lightsb::train(config, x0, x1, [](lightsb::TrainReport& r, const lightsb::MixturePotential&) {
    std::printf("iter %6ld  loss %.6f  (%.0f ms)\n", static_cast<long>(r.iteration), r.loss, r.wallclock_ms);
  });

  const lightsb::SampleSet starts = lightsb::standard_gaussian(64, 2, rng);
  std::vector<double> times;
  for (int j = 1; j < 20; ++j) {
    times.push_back(j / 20.0);
  }
  const auto batch = lightsb::sample_bridge_trajectories(result.potential, starts, times, rng);
  std::ofstream("swiss_roll_trajectories.csv") << lightsb::trajectories_to_csv(batch);
  std::printf("wrote swiss_roll_trajectories.csv\n");
  return 0;
}
