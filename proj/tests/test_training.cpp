#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace lightsb;

namespace {

SolverConfig small_config() {
  SolverConfig c;
  c.epsilon = 0.5;
  c.n_components = 3;
  c.learning_rate = 1e-2;
  c.batch_size_0 = 16;
  c.batch_size_1 = 16;
  c.n_iters = 50;
  c.seed = 9;
  c.eval_every = 10;
  return c;
}

double relative_error(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(InitParams, DefaultValues) {
  SolverConfig c = small_config();
  c.init_scale = 0.1;
  CounterRng rng(1);
  const Matrix target = oracle::random_matrix(40, 2, rng);
  const MixturePotential pot = init_params(c, SampleSet(target), rng);
  for (Index k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(pot.log_weights()[k], std::log(1.0 / 3.0));
    for (Index d = 0; d < 2; ++d) {
      EXPECT_DOUBLE_EQ(pot.log_scales()(k, d), std::log(0.1));
    }
  }
}

TEST(InitParams, MeansAreTargetRows) {
  for (const MeanInit mode : {MeanInit::sample, MeanInit::spread}) {
    SolverConfig c = small_config();
    c.n_components = 7;
    c.mean_init = mode;
    CounterRng rng(2);
    const Matrix target = oracle::random_matrix(30, 3, rng);
    const MixturePotential pot = init_params(c, SampleSet(target), rng);
    for (Index k = 0; k < 7; ++k) {
      bool found = false;
      for (Index i = 0; i < target.rows() && !found; ++i) {
        found = target.row(i) == pot.means().row(k);
      }
      EXPECT_TRUE(found);
    }
  }
}

TEST(InitParams, Deterministic) {
  const SolverConfig c = small_config();
  CounterRng g(3);
  const SampleSet target(oracle::random_matrix(50, 2, g));
  CounterRng a(4);
  CounterRng b(4);
  EXPECT_EQ(init_params(c, target, a), init_params(c, target, b));
}

TEST(InitParams, SpreadAvoidsDuplicates) {
  SolverConfig c = small_config();
  c.n_components = 10;
  c.mean_init = MeanInit::spread;
  CounterRng rng(5);
  const SampleSet target(oracle::random_matrix(200, 2, rng));
  const MixturePotential pot = init_params(c, target, rng);
  std::set<std::pair<double, double>> seen;
  for (Index k = 0; k < 10; ++k) {
    seen.emplace(pot.means()(k, 0), pot.means()(k, 1));
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(EmpiricalLoss, UnitExample) {
  const MixturePotential pot = MixturePotential::standard(1, 1, 1.0);
  const Matrix zero = Matrix::Zero(1, 1);
  EXPECT_NEAR(empirical_loss(pot, zero, zero), 0.5 * std::log(2.0 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(empirical_loss(pot, zero, zero), 0.91894, 1e-5);
}

TEST(EmpiricalLoss, WeightScalingInvariance) {
  CounterRng rng(6);
  const MixturePotential pot = oracle::random_potential(2, 4, 0.3, rng);
  const MixturePotential scaled(pot.epsilon(), pot.log_weights().array() + 3.7, pot.means(), pot.log_scales());
  const Matrix b0 = oracle::random_matrix(20, 2, rng);
  const Matrix b1 = oracle::random_matrix(25, 2, rng);
  EXPECT_NEAR(empirical_loss(pot, b0, b1), empirical_loss(scaled, b0, b1), 1e-12);
}

TEST(EmpiricalLoss, MatchesNaiveArithmetic) {
  CounterRng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const MixturePotential pot = oracle::random_potential(3, 5, 1.0, rng);
    const Matrix b0 = oracle::random_matrix(30, 3, rng);
    const Matrix b1 = oracle::random_matrix(30, 3, rng);
    const double expected = oracle::naive_loss(pot, b0, b1);
    EXPECT_NEAR(empirical_loss(pot, b0, b1), expected, 1e-12 * std::max(1.0, std::abs(expected)));
  }
}

TEST(EmpiricalLoss, NonFiniteAborts) {
  const MixturePotential pot = MixturePotential::standard(1, 1, 1e-300);
  const Matrix b0 = Matrix::Constant(1, 1, 1e10);
  const Matrix b1 = Matrix::Constant(1, 1, 1e10);
  EXPECT_THROW(empirical_loss(pot, b0, b1), Error);
}

TEST(EmpiricalLoss, DimensionChecked) {
  const MixturePotential pot = MixturePotential::standard(2, 1, 1.0);
  EXPECT_THROW(empirical_loss(pot, Matrix::Zero(3, 1), Matrix::Zero(3, 2)), DimensionError);
}

TEST(LossGradient, MatchesFiniteDifferences) {
  CounterRng rng(8);
  for (const Index dim : {1, 3}) {
    for (const Index k : {1, 4}) {
      const MixturePotential pot = oracle::random_potential(dim, k, 0.7, rng);
      const Matrix b0 = oracle::random_matrix(12, dim, rng);
      const Matrix b1 = oracle::random_matrix(12, dim, rng);
      const Vector raw = to_raw(pot);
      auto f = [&](const Vector& r) { return empirical_loss(from_raw(r, dim, k, pot.epsilon()), b0, b1); };
      const Vector fd = oracle::central_difference(f, raw, 1e-5);
      EXPECT_LE(relative_error(loss_gradient(pot, b0, b1), fd), 1e-5) << "dim " << dim << " k " << k;
    }
  }
}

TEST(LossGradient, UniformShiftDirectionIsZero) {
  CounterRng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const MixturePotential pot = oracle::random_potential(2, 1 + trial % 5, 0.4, rng);
    const Matrix b0 = oracle::random_matrix(20, 2, rng);
    const Matrix b1 = oracle::random_matrix(17, 2, rng);
    const Vector g = loss_gradient(pot, b0, b1);
    EXPECT_NEAR(g.head(pot.n_components()).sum(), 0.0, 1e-10);
  }
}

TEST(LossGradient, VanishesAtPopulationOptimum) {
  // K = 1 truth with a large self-generated pair: the gradient at the truth
  // shrinks like 1 / sqrt(N).
  CounterRng rng(10);
  const MixturePotential truth(0.5, Vector::Zero(1), Matrix::Constant(1, 2, 0.3), Matrix::Constant(1, 2, std::log(0.7)));
  double previous = 1e300;
  for (const Index n : {1000, 16000, 256000}) {
    const SampleSet x0 = SourceSpec{}.sample(2, n, rng);
    const SampleSet x1 = push_forward(truth, x0, rng);
    const SampleSet x0b = SourceSpec{}.sample(2, n, rng);
    const double norm = loss_gradient(truth, x0b.data(), x1.data()).norm();
    EXPECT_LT(norm, previous);
    previous = norm;
  }
  EXPECT_LT(previous, 0.02);
}

TEST(LossGradient, ThreadCountDoesNotChangeBits) {
  CounterRng rng(11);
  const MixturePotential pot = oracle::random_potential(3, 6, 0.2, rng);
  const Matrix b0 = oracle::random_matrix(300, 3, rng);
  const Matrix b1 = oracle::random_matrix(257, 3, rng);
  set_num_threads(1);
  const LossAndGradient a = loss_and_gradient(pot, b0, b1);
  set_num_threads(4);
  const LossAndGradient b = loss_and_gradient(pot, b0, b1);
  set_num_threads(0);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.gradient, b.gradient);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  Vector p = Vector::Zero(4);
  Vector g(4);
  g << 3.0, -0.2, 1e-3, -50.0;
  AdamState st(4);
  adam_step(st, p, g, 0.01);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(p[i], -0.01 * (g[i] > 0 ? 1.0 : -1.0), 1e-7);
  }
}

TEST(Adam, ZeroGradientIsNoOp) {
  Vector p(3);
  p << 1.0, -2.0, 0.5;
  const Vector before = p;
  AdamState st(3);
  for (int i = 0; i < 5; ++i) {
    adam_step(st, p, Vector::Zero(3), 0.1);
  }
  EXPECT_EQ(p, before);
}

TEST(Adam, MatchesReferenceOverHundredSteps) {
  CounterRng rng(12);
  const Index n = 7;
  Vector p = oracle::random_matrix(1, n, rng).row(0).transpose();
  std::vector<double> q(p.data(), p.data() + n);
  AdamState st(n);
  oracle::ReferenceAdam ref(static_cast<std::size_t>(n));
  for (int step = 0; step < 100; ++step) {
    const Vector g = oracle::random_matrix(1, n, rng).row(0).transpose();
    adam_step(st, p, g, 3e-3);
    ref.step(q, std::vector<double>(g.data(), g.data() + n), 3e-3);
  }
  for (Index i = 0; i < n; ++i) {
    EXPECT_NEAR(p[i], q[static_cast<std::size_t>(i)], 1e-12);
  }
}

TEST(Train, Deterministic) {
  CounterRng rng(13);
  const SampleSet x0(oracle::random_matrix(200, 2, rng));
  const SampleSet x1(oracle::random_matrix(200, 2, rng, 0.5));
  const SolverConfig c = small_config();
  const TrainResult a = train(c, x0, x1);
  const TrainResult b = train(c, x0, x1);
  EXPECT_EQ(a.potential, b.potential);
  ASSERT_EQ(a.reports.size(), b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    EXPECT_EQ(a.reports[i].loss, b.reports[i].loss);
  }
}

TEST(Train, ReportsAtIntervalsAndEnd) {
  CounterRng rng(14);
  const SampleSet x0(oracle::random_matrix(100, 1, rng));
  const SampleSet x1(oracle::random_matrix(100, 1, rng));
  SolverConfig c = small_config();
  c.n_iters = 25;
  int calls = 0;
  const TrainResult r = train(c, x0, x1, [&](TrainReport& rep, const MixturePotential&) {
    ++calls;
    rep.metrics["seen"] = 1.0;
  });
  ASSERT_EQ(r.reports.size(), 3u);
  EXPECT_EQ(r.reports[0].iteration, 10);
  EXPECT_EQ(r.reports[1].iteration, 20);
  EXPECT_EQ(r.reports[2].iteration, 25);
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(r.reports[2].metrics.at("seen"), 1.0);
}

TEST(Train, LossDecreasesOnGaussianPair) {
  CounterRng rng(15);
  const MixturePotential truth(0.3, Vector::Zero(1), Matrix::Constant(1, 2, 1.5), Matrix::Constant(1, 2, std::log(0.5)));
  const SampleSet x0 = SourceSpec{}.sample(2, 4000, rng);
  const SampleSet x1 = push_forward(truth, SourceSpec{}.sample(2, 4000, rng), rng);
  SolverConfig c = small_config();
  c.epsilon = 0.3;
  c.n_components = 2;
  c.n_iters = 1500;
  c.batch_size_0 = c.batch_size_1 = 128;
  c.eval_every = 1500;
  const MixturePotential start = init_params(c, x1, rng);
  const double before = empirical_loss(start, x0, x1);
  const TrainResult r = train(c, x0, x1);
  const double after = empirical_loss(r.potential, x0, x1);
  EXPECT_LT(after, before);
  // The population objective is bounded below by its value at the truth, up to sampling noise.
  EXPECT_GT(after, empirical_loss(truth, x0, x1) - 0.05);
}

TEST(Train, RestartsAreDeterministicAndValidated) {
  CounterRng rng(16);
  const SampleSet x0(oracle::random_matrix(300, 2, rng));
  const SampleSet x1(oracle::random_matrix(300, 2, rng, 0.5));
  SolverConfig c = small_config();
  c.n_iters = 60;
  c.n_restarts = 3;
  c.restart_steps = 20;
  const TrainResult a = train(c, x0, x1);
  const TrainResult b = train(c, x0, x1);
  EXPECT_EQ(a.potential, b.potential);
  EXPECT_EQ(a.reports.front().iteration, 30);
  c.restart_steps = 60;
  EXPECT_THROW(train(c, x0, x1), std::invalid_argument);
}

TEST(Train, NonFiniteLossReportsIteration) {
  const SampleSet x0(Matrix::Constant(4, 1, 1e200));
  const SampleSet x1(Matrix::Constant(4, 1, 1e200));
  SolverConfig c = small_config();
  c.epsilon = 1e-300;
  try {
    train(c, x0, x1);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.iteration(), 1);
    EXPECT_NE(std::string(e.what()).find("epsilon"), std::string::npos);
  }
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SolverConfig{};
  c.batch_size_1 = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
