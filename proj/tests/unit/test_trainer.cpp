#include "cesd/io.hpp"
#include "cesd/trainer.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace cesd;

namespace {

RunConfig tiny(AgentKind kind) {
  RunConfig c;
  c.agent = kind;
  c.n_skills = 4;
  c.batch_size = 32;
  c.seed_frames = 300;
  c.total_frames = 700;
  c.snapshot_every = 200;
  c.critic_hidden = c.actor_hidden = c.encoder_hidden = 16;
  c.proto_iters = 2;
  c.knn_k = 4;
  c.buffer_capacity = 1000;
  c.seed = 5;
  return c;
}

std::string log_text(const PretrainResult& r, int n) {
  std::ostringstream os;
  write_train_log(os, r.log, n);
  return os.str();
}

std::string checkpoint_bytes(const Checkpoint& c) {
  std::ostringstream os;
  write_checkpoint(os, c);
  return os.str();
}

}  // namespace

TEST(Pretrain, WarmupOnlyLeavesNetworksUntouched) {
  RunConfig c = tiny(AgentKind::cesd);
  c.total_frames = 250;
  const MazeSpec maze = load_maze("square");
  const auto r = pretrain(c, maze);
  Rng rng(c.seed);
  EXPECT_EQ(checkpoint_bytes(r.checkpoint), checkpoint_bytes(to_checkpoint(make_networks(c, rng))));
  for (const auto& row : r.log) EXPECT_EQ(row.updates, 0);
  EXPECT_EQ(r.log.back().frame, 250);
  EXPECT_GT(r.log.back().metrics.coverage, 0.0);
}

TEST(Pretrain, SnapshotsAndUpdateCounts) {
  const RunConfig c = tiny(AgentKind::cesd);
  const auto r = pretrain(c, load_maze("square"));
  ASSERT_EQ(r.log.size(), 4u);  // 200, 400, 600, 700
  EXPECT_EQ(r.log[0].updates, 0);
  EXPECT_EQ(r.log[1].updates, 50);  // frames 302..400, every other frame
  EXPECT_EQ(r.log[3].frame, 700);
  for (const auto& row : r.log) EXPECT_EQ(row.metrics.skill_entropy.size(), 4u);
}

TEST(Pretrain, FixedSeedIsBitIdentical) {
  for (AgentKind kind : {AgentKind::cesd, AgentKind::entropy, AgentKind::diayn}) {
    const RunConfig c = tiny(kind);
    const MazeSpec maze = load_maze("square");
    const auto a = pretrain(c, maze);
    const auto b = pretrain(c, maze);
    EXPECT_EQ(log_text(a, 4), log_text(b, 4)) << to_string(kind);
    EXPECT_EQ(checkpoint_bytes(a.checkpoint), checkpoint_bytes(b.checkpoint)) << to_string(kind);
  }
}

TEST(Pretrain, SeedChangesRun) {
  RunConfig c = tiny(AgentKind::cesd);
  const MazeSpec maze = load_maze("square");
  const auto a = pretrain(c, maze);
  c.seed = 6;
  EXPECT_NE(log_text(a, 4), log_text(pretrain(c, maze), 4));
}

TEST(Pretrain, KnnSpaceChangesIntrinsicReward) {
  for (AgentKind kind : {AgentKind::cesd, AgentKind::entropy}) {
    RunConfig c = tiny(kind);
    const MazeSpec maze = load_maze("square");
    const auto a = pretrain(c, maze);
    c.knn_space = "feature";
    const auto b = pretrain(c, maze);
    EXPECT_EQ(a.log[0].metrics.coverage, b.log[0].metrics.coverage) << to_string(kind);  // warmup only
    EXPECT_NE(log_text(a, 4), log_text(b, 4)) << to_string(kind);
  }
}

TEST(Pretrain, RejectsInvalidConfig) {
  RunConfig c = tiny(AgentKind::cesd);
  c.n_step = 0;
  EXPECT_THROW(pretrain(c, load_maze("square")), std::invalid_argument);
}

TEST(Checkpoint, NetworksRoundTrip) {
  for (AgentKind kind : {AgentKind::cesd, AgentKind::diayn}) {
    const RunConfig c = tiny(kind);
    Rng rng(3);
    const AgentNetworks a = make_networks(c, rng);
    const AgentNetworks b = networks_from_checkpoint(c, to_checkpoint(a));
    EXPECT_EQ(checkpoint_bytes(to_checkpoint(a)), checkpoint_bytes(to_checkpoint(b)));
  }
  RunConfig wide = tiny(AgentKind::cesd);
  Rng rng(3);
  const Checkpoint small = to_checkpoint(make_networks(wide, rng));
  wide.critic_hidden = 32;
  EXPECT_THROW(networks_from_checkpoint(wide, small), std::invalid_argument);
  EXPECT_THROW(networks_from_checkpoint(tiny(AgentKind::diayn), small), std::invalid_argument);
  Checkpoint missing = small;
  missing.networks.pop_back();
  EXPECT_THROW(networks_from_checkpoint(tiny(AgentKind::cesd), missing), std::runtime_error);
}

TEST(Rollout, StartsAtStartAndRunsHorizon) {
  const MazeSpec maze = load_maze("square");
  Rng rng(1);
  const Mlp actor = make_actor(4, 8, rng);
  const auto states = rollout(actor, maze, make_skill(2, 4), 0.0, 0.0, rng);
  ASSERT_EQ(states.size(), static_cast<std::size_t>(maze.horizon) + 1);
  EXPECT_EQ(states.front(), maze.start);
  Rng other(99);
  EXPECT_EQ(rollout(actor, maze, make_skill(2, 4), 0.0, 0.0, other), states);
}

TEST(Finetune, Errors) {
  const RunConfig c = tiny(AgentKind::cesd);
  const MazeSpec maze = load_maze("square");
  EXPECT_THROW(finetune(c, nullptr, maze, {11.0, 5.0}, 0, 100, 1), std::invalid_argument);
  EXPECT_THROW(finetune(c, nullptr, maze, {5.0, 5.0}, 4, 100, 1), std::out_of_range);
  EXPECT_THROW(finetune(c, nullptr, maze, {5.0, 5.0}, 0, -1, 1), std::invalid_argument);
  EXPECT_TRUE(finetune(c, nullptr, maze, {5.0, 5.0}, 0, 0, 1).returns.empty());
}

TEST(Finetune, GoalAtStartScoresNearMaximum) {
  const RunConfig c = tiny(AgentKind::cesd);
  const MazeSpec maze = load_maze("square");
  EXPECT_EQ(goal_reward(maze, maze.start, maze.start), 0.0);
  const auto near = finetune(c, nullptr, maze, maze.start, 1, 200, 4);
  const auto far = finetune(c, nullptr, maze, {9.0, 1.0}, 1, 200, 4);
  ASSERT_EQ(near.returns.size(), 4u);
  for (std::size_t e = 0; e < near.returns.size(); ++e) {
    EXPECT_LE(near.returns[e], 0.0);
    EXPECT_GT(near.returns[e], far.returns[e]);
  }
}

TEST(Finetune, PretrainedAndScratchDiffer) {
  const RunConfig c = tiny(AgentKind::cesd);
  const MazeSpec maze = load_maze("square");
  const auto pre = pretrain(c, maze);
  const auto a = finetune(c, &pre.checkpoint, maze, {1.0, 1.0}, 2, 600, 7);
  const auto b = finetune(c, &pre.checkpoint, maze, {1.0, 1.0}, 2, 600, 7);
  const auto s = finetune(c, nullptr, maze, {1.0, 1.0}, 2, 600, 7);
  EXPECT_EQ(a.returns, b.returns);
  EXPECT_NE(a.returns, s.returns);
  EXPECT_EQ(a.returns.size(), 12u);
}
