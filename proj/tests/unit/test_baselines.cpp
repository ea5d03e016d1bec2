#include "cesd/baselines.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cesd;

namespace {

// A discriminator whose logits ignore the input and equal `logits`.
Discriminator constant_discriminator(const Vec& logits) {
  Discriminator d;
  Layer l;
  l.weight = Mat::Zero(logits.size(), 2);
  l.bias = logits;
  d.net.layers = {l};
  d.opt = make_adam(d.net);
  d.n = static_cast<int>(logits.size());
  return d;
}

}  // namespace

TEST(DiaynReward, PerfectUniformAndHalf) {
  Vec sure = Vec::Constant(10, -1000.0);
  sure(3) = 0.0;
  RowVec s(2);
  s << 0.1, 0.2;
  EXPECT_NEAR(diayn_reward(constant_discriminator(sure), s, 3), std::log(10.0), 1e-12);
  EXPECT_NEAR(diayn_reward(constant_discriminator(Vec::Zero(10)), s, 7), 0.0, 1e-12);

  // q(z|s) = 0.5 with the rest spread evenly over nine skills.
  Vec half = Vec::Constant(10, std::log(0.5 / 9.0));
  half(0) = std::log(0.5);
  EXPECT_NEAR(diayn_reward(constant_discriminator(half), s, 0), std::log(0.5) + std::log(10.0), 1e-12);
  EXPECT_NEAR(diayn_reward(constant_discriminator(half), s, 0), 1.6094379124341003, 1e-12);
}

TEST(DiaynReward, NeverAboveLogN) {
  Rng rng(1);
  const Discriminator d = make_discriminator(2, 16, 6, rng);
  Mat obs = Mat::Random(200, 2) * 5.0;
  std::vector<int> z(200);
  for (int i = 0; i < 200; ++i) z[static_cast<std::size_t>(i)] = i % 6;
  for (double r : diayn_reward(d, obs, z)) EXPECT_LE(r, std::log(6.0) + 1e-12);
  z[4] = 6;
  EXPECT_THROW(diayn_reward(d, obs, z), std::out_of_range);
}

TEST(DiscriminatorUpdate, SeparableDataLossVanishes) {
  Rng rng(2);
  Discriminator d = make_discriminator(2, 32, 4, rng);
  // Four well-separated blobs, one per skill.
  const double cx[4] = {-0.7, 0.7, -0.7, 0.7}, cy[4] = {-0.7, -0.7, 0.7, 0.7};
  std::normal_distribution<double> g(0.0, 0.05);
  Mat obs(128, 2);
  std::vector<int> z(128);
  for (int i = 0; i < 128; ++i) {
    const int k = i % 4;
    z[static_cast<std::size_t>(i)] = k;
    obs.row(i) << cx[k] + g(rng), cy[k] + g(rng);
  }
  double loss = 0.0;
  for (int i = 0; i < 1500; ++i) loss = discriminator_update(d, obs, z, 1e-2);
  EXPECT_LT(loss, 0.02);
}

TEST(DiscriminatorUpdate, IndependentLabelsPlateauAtLogN) {
  Rng rng(3);
  Discriminator d = make_discriminator(2, 16, 5, rng);
  std::uniform_real_distribution<double> u(-1, 1);
  Mat obs(4000, 2);
  std::vector<int> z(4000);
  for (int i = 0; i < 4000; ++i) {
    obs.row(i) << u(rng), u(rng);
    z[static_cast<std::size_t>(i)] = i % 5;  // balanced, unrelated to position
  }
  std::shuffle(z.begin(), z.end(), rng);
  double loss = 0.0;
  for (int i = 0; i < 300; ++i) loss = discriminator_update(d, obs, z, 1e-3);
  EXPECT_NEAR(loss, std::log(5.0), 0.02);
}

TEST(DiscriminatorUpdate, SingleClassLossIsNegLogSoftmax) {
  Rng rng(4);
  Discriminator d = make_discriminator(2, 8, 3, rng);
  const Mat obs = Mat::Random(6, 2);
  const Mat lp = log_softmax_rows(forward(d.net, obs));
  EXPECT_NEAR(discriminator_update(d, obs, std::vector<int>(6, 2), 1e-3), -lp.col(2).mean(), 1e-12);
  EXPECT_THROW(discriminator_update(d, Mat(0, 2), {}, 1e-3), std::invalid_argument);
}

TEST(AptReward, LineExample) {
  Mat f(4, 1);
  f << 0, 1, 2, 4;
  EXPECT_EQ(apt_reward(f, 1), (std::vector<double>{1, 1, 1, 2}));
}

TEST(AptReward, DuplicatesScoreZero) {
  Mat f(6, 2);
  f << 1, 2, 1, 2, 3, 4, 3, 4, 5, 6, 5, 6;
  for (double r : apt_reward(f, 1)) EXPECT_EQ(r, 0.0);
}

TEST(AptReward, EqualsSingleClusterRewards) {
  const Mat f = Mat::Random(80, 4);
  EXPECT_EQ(apt_reward(f, 16), cluster_entropy_rewards(f, std::vector<int>(80, 0), 16));
  EXPECT_THROW(apt_reward(f.topRows(16), 16), std::invalid_argument);
  EXPECT_THROW(apt_reward(f, 0), std::invalid_argument);
}
