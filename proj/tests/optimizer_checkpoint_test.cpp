#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "drgrl/checkpoint.hpp"
#include "drgrl/errors.hpp"
#include "drgrl/optimizer.hpp"
#include "drgrl/policy.hpp"

namespace drgrl {
namespace {

TEST(Adam, FirstStepMovesEachCoordinateByLearningRate) {
  // With bias correction, the first update is lr * g / (|g| + eps).
  Optimizer opt(OptimizerConfig{}, 3);
  std::vector<double> theta = {0.0, 1.0, -2.0};
  const std::vector<double> grad = {0.5, -3.0, 1e-3};
  opt.Step(theta, grad, 0.1);
  EXPECT_NEAR(theta[0], -0.1, 1e-8);
  EXPECT_NEAR(theta[1], 1.1, 1e-8);
  EXPECT_NEAR(theta[2], -2.1, 1e-6);
}

TEST(Adam, MatchesHandRolledRecurrence) {
  OptimizerConfig cfg;
  cfg.beta1 = 0.8;
  cfg.beta2 = 0.95;
  Optimizer opt(cfg, 1);
  std::vector<double> theta = {1.0};
  double m = 0, v = 0, x = 1.0;
  const double grads[] = {0.3, -0.1, 0.7, 0.2};
  for (int t = 1; t <= 4; ++t) {
    const double g = grads[t - 1];
    opt.Step(theta, std::vector<double>{g}, 0.05);
    m = 0.8 * m + 0.2 * g;
    v = 0.95 * v + 0.05 * g * g;
    x -= 0.05 * (m / (1 - std::pow(0.8, t))) / (std::sqrt(v / (1 - std::pow(0.95, t))) + 1e-8);
    EXPECT_NEAR(theta[0], x, 1e-12);
  }
  EXPECT_EQ(opt.step_count(), 4);
}

TEST(Adam, ResetClearsMoments) {
  Optimizer a(OptimizerConfig{}, 2), b(OptimizerConfig{}, 2);
  std::vector<double> ta = {0.0, 0.0}, tb = {0.0, 0.0};
  a.Step(ta, std::vector<double>{5.0, -5.0}, 0.1);
  a.Reset();
  ta = {0.0, 0.0};
  a.Step(ta, std::vector<double>{0.2, 0.4}, 0.1);
  b.Step(tb, std::vector<double>{0.2, 0.4}, 0.1);
  EXPECT_EQ(ta, tb);
}

TEST(Sgd, PlainStepWithDecay) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kSgd;
  cfg.weight_decay = 0.5;
  Optimizer opt(cfg, 2);
  std::vector<double> theta = {2.0, -1.0};
  opt.Step(theta, std::vector<double>{1.0, 0.0}, 0.1);
  EXPECT_DOUBLE_EQ(theta[0], 2.0 - 0.1 * (1.0 + 1.0));
  EXPECT_DOUBLE_EQ(theta[1], -1.0 - 0.1 * (-0.5));
}

TEST(Optimizer, RejectsSizeMismatchAndParsesKinds) {
  Optimizer opt(OptimizerConfig{}, 2);
  std::vector<double> theta = {0.0, 0.0};
  EXPECT_THROW(opt.Step(theta, std::vector<double>{1.0}, 0.1), Error);
  EXPECT_EQ(ParseOptimizerKind("adam"), OptimizerKind::kAdam);
  EXPECT_EQ(ParseOptimizerKind("sgd"), OptimizerKind::kSgd);
  EXPECT_THROW(ParseOptimizerKind("lion"), ConfigError);
}

PolicyParams SampleParams() {
  PolicyArch a;
  a.vocab_size = 7;
  a.context_window = 3;
  a.hidden_width = 4;
  a.prompt_features = PromptFeatures::kBigram;
  Rng rng(31);
  PolicyParams p = PolicyParams::Random(a, 0.5, rng);
  // Values whose decimal rendering would lose bits.
  p.mutable_theta()[0] = 0.1 + 0.2;
  p.mutable_theta()[1] = -0.0;
  p.mutable_theta()[2] = 1e-310;
  return p;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const PolicyParams p = SampleParams();
  std::stringstream buf;
  SaveCheckpoint(p, buf);
  const PolicyParams q = LoadCheckpoint(buf);
  EXPECT_EQ(q.arch(), p.arch());
  ASSERT_EQ(q.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(q.theta()[i]), std::bit_cast<std::uint64_t>(p.theta()[i]));
  }
  EXPECT_FALSE(q.frozen());
}

TEST(Checkpoint, IdenticalParametersSerializeIdentically) {
  std::stringstream a, b;
  SaveCheckpoint(SampleParams(), a);
  SaveCheckpoint(SampleParams(), b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, 8), "DRGRLPOL");
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "drgrl_ckpt_test.bin";
  const PolicyParams p = SampleParams();
  SaveCheckpoint(p, path);
  const PolicyParams q = LoadCheckpoint(path);
  EXPECT_TRUE(std::equal(p.theta().begin(), p.theta().end(), q.theta().begin()));
  std::filesystem::remove(path);
  EXPECT_THROW(LoadCheckpoint(path), ConfigError);
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream buf;
  SaveCheckpoint(SampleParams(), buf);
  const std::string good = buf.str();

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  std::stringstream s1(bad_magic);
  EXPECT_THROW(LoadCheckpoint(s1), Error);

  std::string bad_version = good;
  bad_version[8] = 9;
  std::stringstream s2(bad_version);
  EXPECT_THROW(LoadCheckpoint(s2), Error);

  std::stringstream s3(good.substr(0, good.size() - 5));
  EXPECT_THROW(LoadCheckpoint(s3), Error);
}

}  // namespace
}  // namespace drgrl
