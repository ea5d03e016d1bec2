// Command-line front end: train, eval, plot, finetune, check-theory and a few
// inspection helpers.

#include "cesd/cesd.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cesd;

namespace {

constexpr const char* kVersion = "cesd 0.1.0";

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + p.string() + "'");
  return is;
}

// The config sits next to the checkpoint unless given explicitly.
RunConfig config_for_checkpoint(const std::string& checkpoint, const std::string& explicit_config) {
  const fs::path cfg_path = explicit_config.empty() ? fs::path(checkpoint).parent_path() / "config.cfg" : fs::path(explicit_config);
  RunConfig cfg = load_config(cfg_path.string());
  validate(cfg);
  return cfg;
}

struct TrainArgs {
  std::string config;
  std::string out;
  bool quiet = false;
  std::map<std::string, std::string> overrides;
};

int cmd_train(const TrainArgs& args) {
  RunConfig cfg = args.config.empty() ? RunConfig{} : load_config(args.config);
  std::vector<std::string> applied;
  for (const auto& key : config_keys()) {
    const auto it = args.overrides.find(key);
    if (it == args.overrides.end() || it->second.empty()) continue;
    set_field(cfg, key, it->second);
    applied.push_back(key + " = " + get_field(cfg, key));
  }
  validate(cfg);
  const MazeSpec maze = load_maze(cfg.maze);

  const fs::path out(args.out);
  fs::create_directories(out);
  const auto result = pretrain(cfg, maze, [&](const LogRow& r) {
    if (args.quiet) return;
    std::fprintf(stderr, "frame %ld coverage %.3f overlap %.3f mi %.3f critic %.4f aux %.4f\n", r.frame, r.metrics.coverage, r.metrics.overlap,
                 r.metrics.mi, r.critic_loss, r.aux_loss);
  });

  save_checkpoint((out / "checkpoint.bin").string(), result.checkpoint);
  {
    auto os = open_out(out / "train_log.csv");
    write_train_log(os, result.log, cfg.n_skills);
  }
  {
    auto os = open_out(out / "config.cfg");
    os << serialize(cfg);
  }
  {
    auto os = open_out(out / "manifest.txt");
    os << "# cesd manifest v1\n";
    os << "version = " << kVersion << '\n';
    os << "agent = " << to_string(cfg.agent) << '\n';
    os << "maze = " << cfg.maze << '\n';
    os << "seed = " << cfg.seed << '\n';
    os << "base_config = " << (args.config.empty() ? "(defaults)" : args.config) << '\n';
    for (const auto& o : applied) os << "override " << o << '\n';
    os << "artifact checkpoint = checkpoint.bin\n";
    os << "artifact train_log = train_log.csv\n";
    os << "artifact config = config.cfg\n";
    os << "rerun = cesd train --config " << (out / "config.cfg").string() << " --out <dir>\n";
  }
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::string out;
  int episodes = 20;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& args) {
  const RunConfig cfg = config_for_checkpoint(args.checkpoint, args.config);
  if (args.episodes < 0) throw std::invalid_argument("episodes must be >= 0");
  const AgentNetworks nets = networks_from_checkpoint(cfg, load_checkpoint(args.checkpoint));
  const MazeSpec maze = load_maze(cfg.maze);
  Rng rng(args.seed);
  std::vector<SkillTrajectory> trajectories;
  for (int z = 0; z < cfg.n_skills; ++z)
    for (int e = 0; e < args.episodes; ++e)
      trajectories.push_back({z, rollout(nets.actor, maze, make_skill(z, cfg.n_skills), args.noise_std, cfg.noise_clip, rng)});

  const fs::path out(args.out);
  fs::create_directories(out);
  {
    auto os = open_out(out / "trajectories.csv");
    write_trajectories(os, trajectories);
  }
  if (trajectories.empty()) throw std::invalid_argument("no trajectories to evaluate (episodes = 0)");
  const MetricSummary m = summarize(bin_visits(trajectories, maze, cfg.grid, cfg.n_skills));
  auto os = open_out(out / "metrics.csv");
  write_metrics(os, m);
  std::printf("coverage %.4f overlap %.4f mi %.4f\n", m.coverage, m.overlap, m.mi);
  return 0;
}

int cmd_plot(const std::string& trajectories, const std::string& maze_name, const std::string& out) {
  const MazeSpec maze = load_maze(maze_name);
  auto is = open_in(trajectories);
  const auto trajs = read_trajectories(is);
  auto os = open_out(out);
  write_svg(os, maze, trajs);
  return 0;
}

struct FinetuneArgs {
  std::string checkpoint;
  std::string config;
  std::string out;
  std::vector<double> goal;
  int skill = 0;
  long frames = 20000;
  std::uint64_t seed = 0;
  bool scratch = false;
};

int cmd_finetune(const FinetuneArgs& args) {
  const RunConfig cfg = config_for_checkpoint(args.checkpoint, args.config);
  const MazeSpec maze = load_maze(cfg.maze);
  const Point goal{args.goal.at(0), args.goal.at(1)};
  if (!maze.bounds.contains(goal)) throw std::invalid_argument("goal lies outside the maze bounds");
  make_skill(args.skill, cfg.n_skills);
  std::optional<Checkpoint> ckpt;
  if (!args.scratch) ckpt = load_checkpoint(args.checkpoint);
  const auto result = finetune(cfg, ckpt ? &*ckpt : nullptr, maze, goal, args.skill, args.frames, args.seed);
  auto os = open_out(args.out);
  write_returns(os, result.returns);
  std::printf("episodes %zu\n", result.returns.size());
  return 0;
}

int cmd_check_theory(int trials, std::uint64_t seed) {
  const auto report = run_theory_suite(trials, seed);
  int failed = 0;
  for (const auto& t : report) {
    std::printf("%s\n", format_trial(t).c_str());
    failed += !t.passed;
  }
  std::fprintf(stderr, "%d/%d trials passed\n", trials - failed, trials);
  return failed == 0 ? 0 : 1;
}

int cmd_maze_dump(const std::string& name, const std::string& out) {
  const MazeSpec maze = load_maze(name);
  if (out.empty()) {
    write_walls_csv(std::cout, maze);
  } else {
    auto os = open_out(out);
    write_walls_csv(os, maze);
  }
  return 0;
}

int cmd_prototypes(const std::string& checkpoint, const std::string& config) {
  const RunConfig cfg = config_for_checkpoint(checkpoint, config);
  const AgentNetworks nets = networks_from_checkpoint(cfg, load_checkpoint(checkpoint));
  if (!nets.bank) throw std::invalid_argument("agent '" + to_string(cfg.agent) + "' has no prototypes");
  const Mat& c = nets.bank->prototype_matrix();
  std::printf("prototype");
  for (Eigen::Index j = 0; j < c.cols(); ++j) std::printf(",c%ld", static_cast<long>(j));
  std::printf("\n");
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    std::printf("%ld", static_cast<long>(i));
    for (Eigen::Index j = 0; j < c.cols(); ++j) std::printf(",%.17g", c(i, j));
    std::printf("\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered skill discovery in 2-D mazes"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "pretrain an agent and write checkpoint, log and manifest");
  t->add_option("--config", train.config, "key = value config file")->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "output directory")->required();
  t->add_flag("--quiet", train.quiet, "suppress progress lines");
  for (const auto& key : config_keys()) t->add_option("--" + key, train.overrides[key], "override config field " + key);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "roll out every skill and write trajectories and metrics");
  e->add_option("--checkpoint", eval.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--config", eval.config, "defaults to config.cfg beside the checkpoint");
  e->add_option("--episodes", eval.episodes, "episodes per skill")->capture_default_str();
  e->add_option("--noise-std", eval.noise_std, "exploration noise during rollouts")->capture_default_str();
  e->add_option("--seed", eval.seed)->capture_default_str();
  e->add_option("--out", eval.out)->required();

  std::string plot_in, plot_maze = "square", plot_out;
  auto* p = app.add_subcommand("plot", "render a trajectory CSV over a maze as SVG");
  p->add_option("--trajectories", plot_in)->required()->check(CLI::ExistingFile);
  p->add_option("--maze", plot_maze)->capture_default_str();
  p->add_option("--out", plot_out)->required();

  FinetuneArgs ft;
  auto* f = app.add_subcommand("finetune", "goal-reaching finetuning with a fixed skill");
  f->add_option("--checkpoint", ft.checkpoint)->required()->check(CLI::ExistingFile);
  f->add_option("--config", ft.config, "defaults to config.cfg beside the checkpoint");
  f->add_option("--goal", ft.goal, "goal x y")->required()->expected(2);
  f->add_option("--skill", ft.skill)->capture_default_str();
  f->add_option("--frames", ft.frames)->capture_default_str();
  f->add_option("--seed", ft.seed)->capture_default_str();
  f->add_flag("--scratch", ft.scratch, "ignore checkpoint weights and start from a random agent");
  f->add_option("--out", ft.out, "returns CSV")->required();

  int trials = 1000;
  std::uint64_t theory_seed = 0;
  auto* c = app.add_subcommand("check-theory", "audit the entropy identities on random instances");
  c->add_option("--trials", trials)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--seed", theory_seed)->capture_default_str();

  std::string dump_maze = "square", dump_out;
  auto* d = app.add_subcommand("maze-dump", "print a maze's walls as CSV");
  d->add_option("--maze", dump_maze)->capture_default_str();
  d->add_option("--out", dump_out);

  std::string proto_ckpt, proto_cfg;
  auto* pr = app.add_subcommand("prototypes", "print the prototype vectors of a checkpoint as CSV");
  pr->add_option("--checkpoint", proto_ckpt)->required()->check(CLI::ExistingFile);
  pr->add_option("--config", proto_cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*t) return cmd_train(train);
    if (*e) return cmd_eval(eval);
    if (*p) return cmd_plot(plot_in, plot_maze, plot_out);
    if (*f) return cmd_finetune(ft);
    if (*c) return cmd_check_theory(trials, theory_seed);
    if (*d) return cmd_maze_dump(dump_maze, dump_out);
    if (*pr) return cmd_prototypes(proto_ckpt, proto_cfg);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
