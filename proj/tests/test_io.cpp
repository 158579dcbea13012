#include "oracles.hpp"

#include "lightsb/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace lightsb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lightsb_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Dataset, CsvAndBinaryRoundTrip) {
  CounterRng rng(1);
  const SampleSet s(oracle::random_matrix(57, 4, rng, 1e3));
  const fs::path dir = scratch("roundtrip");
  save_samples(dir / "a.csv", s);
  save_samples(dir / "a.bin", s);
  EXPECT_EQ(load_samples(dir / "a.csv"), s);
  EXPECT_EQ(load_samples(dir / "a.bin"), s);
  EXPECT_EQ(content_digest(load_samples(dir / "a.csv")), content_digest(s));
  EXPECT_EQ(file_digest(dir / "a.bin"), content_digest(s));
}

TEST(Dataset, CsvErrorsCarryLineNumbers) {
  const fs::path dir = scratch("errors");
  write_text(dir / "bad.csv", "x0,x1\n1,2\n3\n");
  const std::string msg = error_of([&] { load_samples(dir / "bad.csv"); });
  EXPECT_NE(msg.find("bad.csv:3"), std::string::npos) << msg;

  write_text(dir / "junk.csv", "x0\n1.5\nabc\n");
  const std::string junk = error_of([&] { load_samples(dir / "junk.csv"); });
  EXPECT_NE(junk.find("junk.csv:3"), std::string::npos) << junk;

  write_text(dir / "header.csv", "a,b\n1,2\n");
  EXPECT_THROW(load_samples(dir / "header.csv"), IoError);
}

TEST(Dataset, RejectsNonFinite) {
  const fs::path dir = scratch("nan");
  write_text(dir / "nan.csv", "x0,x1\n1,2\nnan,3\n");
  const std::string msg = error_of([&] { load_samples(dir / "nan.csv"); });
  EXPECT_NE(msg.find("nan.csv:3"), std::string::npos) << msg;
  write_text(dir / "inf.csv", "x0\ninf\n");
  EXPECT_THROW(load_samples(dir / "inf.csv"), IoError);
}

TEST(Dataset, BinaryRejectsTruncation) {
  CounterRng rng(2);
  const std::string bytes = samples_to_binary(SampleSet(oracle::random_matrix(5, 2, rng)));
  EXPECT_THROW(samples_from_binary(bytes.substr(0, bytes.size() - 3)), IoError);
  EXPECT_THROW(samples_from_binary("NOTMAGIC" + bytes.substr(8)), IoError);
}

TEST(Dataset, PairedDimensionMismatch) {
  const fs::path dir = scratch("paired");
  write_text(dir / "a.csv", "x0,x1\n1,2\n");
  write_text(dir / "b.csv", "x0\n1\n");
  const std::string msg = error_of([&] { load_paired(dir / "a.csv", dir / "b.csv"); });
  EXPECT_NE(msg.find("D=2"), std::string::npos);
  EXPECT_NE(msg.find("D=1"), std::string::npos);
  EXPECT_THROW(load_paired(dir / "a.csv", dir / "b.csv"), DimensionError);
}

TEST(Dataset, MissingFile) { EXPECT_THROW(load_samples(fs::path("/nonexistent/lightsb.csv")), IoError); }

TEST(Dataset, LargeDigestStable) {
  CounterRng rng(3);
  Matrix big(1000000, 10);
  for (Index i = 0; i < big.size(); ++i) {
    big.data()[i] = rng.normal();
  }
  const SampleSet s(std::move(big));
  const fs::path dir = scratch("large");
  save_samples(dir / "big.bin", s);
  const std::string d1 = content_digest(s);
  EXPECT_EQ(d1.size(), 64u);
  EXPECT_EQ(file_digest(dir / "big.bin"), d1);
  EXPECT_EQ(content_digest(load_samples(dir / "big.bin")), d1);
  fs::remove_all(dir);
}

TEST(Hash, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Trajectories, BinaryRoundTrip) {
  CounterRng rng(4);
  const MixturePotential pot = oracle::random_potential(3, 2, 0.4, rng);
  const TrajectoryBatch tb = sample_bridge_trajectories(pot, SampleSet(oracle::random_matrix(7, 3, rng)),
                                                        {0.125, 0.5, 0.875}, rng);
  const fs::path dir = scratch("traj");
  save_trajectories(dir / "t.bin", tb);
  EXPECT_TRUE(fs::exists(times_sidecar(dir / "t.bin")));
  EXPECT_EQ(fs::file_size(dir / "t.bin"), 32u + 7u * 5u * 3u * sizeof(double));
  EXPECT_EQ(load_trajectories(dir / "t.bin"), tb);
  const std::string csv = trajectories_to_csv(tb);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "particle,t,x0,x1,x2");
}

TEST(Plan, BinaryRoundTrip) {
  CounterRng rng(5);
  const Matrix s0 = oracle::random_matrix(4, 2, rng);
  const Matrix s1 = oracle::random_matrix(6, 2, rng);
  const DiscretePlan p = sinkhorn_oracle(s0, s1, Vector::Constant(4, 0.25), Vector::Constant(6, 1.0 / 6.0), 1.0,
                                         1e-12, 1000);
  const DiscretePlan back = plan_from_binary(plan_to_binary(p));
  EXPECT_EQ(back.support0, p.support0);
  EXPECT_EQ(back.support1, p.support1);
  EXPECT_EQ(back.log_plan, p.log_plan);
}

TEST(Checkpoint, FileRoundTripAndFields) {
  CounterRng rng(6);
  const MixturePotential pot = oracle::random_potential(2, 3, 0.05, rng);
  const fs::path dir = scratch("ckpt");
  save_checkpoint(dir / "c.json", pot);
  EXPECT_EQ(load_checkpoint(dir / "c.json"), pot);
  const std::string text = checkpoint_to_json(pot);
  for (const char* field : {"dim", "n_components", "epsilon", "log_weights", "means", "log_scales"}) {
    EXPECT_NE(text.find(std::string("\"") + field + "\""), std::string::npos) << field;
  }
}
