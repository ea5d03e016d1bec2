// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include "cesd/cesd.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace cesd;

namespace {

const std::vector<std::uint64_t> kSeeds{1, 2, 3};
constexpr long kFinetuneFrames = 20000;
constexpr Point kFinetuneGoal{8.5, 1.5};

struct Line {
  bool pass = false;
  std::string detail;
};

std::vector<std::pair<std::string, Line>> g_report;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::fprintf(stderr, "  %s %s\n", name.c_str(), pass ? "passed" : "failed");
  g_report.push_back({name, {pass, detail}});
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------- theory

void theory() {
  const auto t0 = std::chrono::steady_clock::now();
  double partition = 0.0;
  for (auto [n_states, n] : {std::pair<long, long>{16, 4}, {100, 10}, {1000, 8}})
    partition = std::max(partition, std::abs(check_partition_gap(n_states, n) - std::log(static_cast<double>(n))));

  Rng rng(31);
  double residual = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> clusters(1, 8), size(1, 12);
    const int k = clusters(rng);
    std::vector<int> sizes(static_cast<std::size_t>(k));
    std::size_t total = 0;
    for (auto& s : sizes) total += static_cast<std::size_t>(s = size(rng));
    std::vector<std::vector<double>> locals;
    std::size_t offset = 0;
    for (int s : sizes) {
      const auto d = sample_dirichlet(static_cast<std::size_t>(s), 1.0, rng);
      std::vector<double> full(total, 0.0);
      std::copy(d.begin(), d.end(), full.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += static_cast<std::size_t>(s);
      locals.push_back(std::move(full));
    }
    residual = std::max(residual, check_entropy_decomposition(locals, sample_dirichlet(static_cast<std::size_t>(k), 1.0, rng)));
  }

  int fano_ok = 0, fano_total = 0;
  for (std::size_t n : {2u, 8u, 32u})
    for (int i = 0; i < 1000; ++i, ++fano_total) fano_ok += check_fano_bound(sample_dirichlet(n, 0.5, rng), sample_dirichlet(n, 0.5, rng)).holds;

  const double secs = seconds_since(t0);
  report("1 theory", partition < 1e-12 && residual < 1e-10 && fano_ok == fano_total && secs < 5.0,
         fmt("partition_error=%.2e decomposition_residual=%.2e fano=%d/%d time=%.2fs", partition, residual, fano_ok, fano_total, secs));
}

// ---------------------------------------------------------------- numerics

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

double gradient_check(Rng& rng) {
  std::uniform_int_distribution<int> width(1, 32), depth(1, 3);
  std::vector<int> dims{width(rng)};
  const int d = depth(rng);
  for (int i = 0; i < d; ++i) dims.push_back(width(rng));
  Mlp net = make_mlp(std::span<const int>(dims), rng() % 2 ? Activation::tanh : Activation::relu,
                     rng() % 2 ? Activation::tanh : Activation::identity, rng);
  if (net.layers.size() > 1 && rng() % 2) net.layers.front().activation = Activation::layer_norm_tanh;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec x = Vec::NullaryExpr(net.input_dim(), [&] { return u(rng); });
  const Vec g = Vec::NullaryExpr(net.output_dim(), [&] { return u(rng); });
  const auto loss = [&](const Vec& in) { return g.dot(forward(net, in)); };
  const auto grad = backward(net, x, g);
  const double h = 1e-5;
  double worst = 0.0;
  const auto probe = [&](double& p, double analytic) {
    const double keep = p;
    p = keep + h;
    const double up = loss(x);
    p = keep - h;
    const double dn = loss(x);
    p = keep;
    worst = std::max(worst, rel_err((up - dn) / (2 * h), analytic));
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < net.layers[l].weight.size(); ++i) probe(net.layers[l].weight.data()[i], grad.params.layers[l].weight.data()[i]);
    for (Eigen::Index i = 0; i < net.layers[l].bias.size(); ++i) probe(net.layers[l].bias(i), grad.params.layers[l].bias(i));
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    worst = std::max(worst, rel_err((loss(xp) - loss(xm)) / (2 * h), grad.input(i)));
  }
  return worst;
}

double brute_knn(const Mat& f, Eigen::Index index, int k) {
  std::vector<double> d;
  for (Eigen::Index j = 0; j < f.rows(); ++j) {
    if (j == index) continue;
    double s = 0.0;
    for (Eigen::Index c = 0; c < f.cols(); ++c) s += (f(j, c) - f(index, c)) * (f(j, c) - f(index, c));
    d.push_back(std::sqrt(s));
  }
  std::sort(d.begin(), d.end());
  return d[static_cast<std::size_t>(k - 1)];
}

void numerics() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(57);
  double grad_worst = 0.0;
  for (int i = 0; i < 10; ++i) grad_worst = std::max(grad_worst, gradient_check(rng));

  int knn_mismatch = 0;
  std::uniform_int_distribution<int> size(2, 80), dim(1, 8);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int set = 0; set < 100; ++set) {
    const int n = size(rng);
    Mat f(n, dim(rng));
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = u(rng);
    std::uniform_int_distribution<int> kd(1, n - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int k = kd(rng);
      knn_mismatch += knn_distance(f, i, k) != brute_knn(f, i, k);
    }
  }

  double row_err = 0.0, col_err = 0.0;
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    const Mat q = sinkhorn_targets(Mat::NullaryExpr(1024, 10, [&] { return g(rng); }), 1.0, 3);
    for (Eigen::Index r = 0; r < q.rows(); ++r) row_err = std::max(row_err, std::abs(q.row(r).sum() - 1.0));
    for (Eigen::Index c = 0; c < q.cols(); ++c) col_err = std::max(col_err, std::abs(q.col(c).sum() / 102.4 - 1.0));
  }

  const double secs = seconds_since(t0);
  report("2 numerics", grad_worst < 1e-4 && knn_mismatch == 0 && row_err < 1e-9 && col_err < 0.01 && secs < 30.0,
         fmt("grad_rel_err=%.2e knn_mismatches=%d sinkhorn_row_err=%.2e sinkhorn_col_dev=%.4f time=%.2fs", grad_worst, knn_mismatch,
             row_err, col_err, secs));
}

// ---------------------------------------------------------------- maze runs

struct Run {
  RunConfig cfg;
  PretrainResult result;
};

RunConfig base_config(const std::string& agent, std::uint64_t seed) {
  RunConfig c = load_config(std::string(CESD_CONFIG_DIR) + "/" + agent + "_square.cfg");
  c.seed = seed;
  return c;
}

// Runs every config, as many at a time as there are hardware threads.
std::vector<Run> run_all(const std::vector<RunConfig>& configs) {
  const MazeSpec maze = load_maze("square");
  const std::size_t width = std::max(1u, std::thread::hardware_concurrency());
  std::vector<Run> out(configs.size());
  std::vector<std::future<void>> pending;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (pending.size() == width) {
      pending.front().get();
      pending.erase(pending.begin());
    }
    pending.push_back(std::async(std::launch::async, [&, i] {
      const auto t0 = std::chrono::steady_clock::now();
      out[i] = {configs[i], pretrain(configs[i], maze)};
      std::fprintf(stderr, "  trained %s seed %llu alpha %g ensemble %d in %.0fs\n", to_string(configs[i].agent).c_str(),
                   static_cast<unsigned long long>(configs[i].seed), configs[i].alpha, configs[i].effective_ensemble_size(), seconds_since(t0));
    }));
  }
  for (auto& f : pending) f.get();
  return out;
}

const MetricSummary& final_metrics(const Run& r) { return r.result.log.back().metrics; }

std::string seed_list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : "/") + fmt("%.3f", x);
  return s;
}

void comparative(const std::vector<Run>& cesd, const std::vector<Run>& entropy, const std::vector<Run>& diayn) {
  std::vector<double> cov[3], mi[2], ov[2];
  const std::vector<Run>* groups[3] = {&cesd, &entropy, &diayn};
  for (int g = 0; g < 3; ++g)
    for (const auto& r : *groups[g]) {
      cov[g].push_back(final_metrics(r).coverage);
      if (g < 2) {
        mi[g].push_back(final_metrics(r).mi);
        ov[g].push_back(final_metrics(r).overlap);
      }
    }
  const auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  const double c = mean(cov[0]), e = mean(cov[1]), d = mean(cov[2]);
  report("3a coverage", c >= 0.9 * e && c >= 1.5 * d,
         fmt("cesd=%.3f entropy=%.3f diayn=%.3f (need >= %.3f and >= %.3f) per-seed cesd %s entropy %s diayn %s", c, e, d, 0.9 * e, 1.5 * d,
             seed_list(cov[0]).c_str(), seed_list(cov[1]).c_str(), seed_list(cov[2]).c_str()));
  bool mi_ok = true, ov_ok = true;
  for (std::size_t s = 0; s < kSeeds.size(); ++s) {
    mi_ok = mi_ok && mi[0][s] > mi[1][s];
    ov_ok = ov_ok && ov[0][s] < ov[1][s];
  }
  report("3b mutual information", mi_ok, fmt("cesd %s entropy %s", seed_list(mi[0]).c_str(), seed_list(mi[1]).c_str()));
  report("3c skill overlap", ov_ok, fmt("cesd %s entropy %s", seed_list(ov[0]).c_str(), seed_list(ov[1]).c_str()));
}

void entropy_trend(const std::vector<Run>& cesd) {
  bool ok = true;
  std::string detail;
  for (const auto& r : cesd) {
    const long quarter = r.cfg.total_frames / 4;
    const auto it = std::find_if(r.result.log.begin(), r.result.log.end(), [&](const LogRow& row) { return row.frame >= quarter; });
    const auto& early = it->metrics.skill_entropy;
    const auto& late = r.result.log.back().metrics.skill_entropy;
    int grew = 0;
    for (std::size_t i = 0; i < late.size(); ++i) grew += late[i] >= early[i];
    ok = ok && grew >= 8;
    detail += fmt("%sseed %llu: %d/%zu skills (frame %ld -> %ld)", detail.empty() ? "" : ", ", static_cast<unsigned long long>(r.cfg.seed), grew,
                  late.size(), it->frame, r.result.log.back().frame);
  }
  report("4 per-skill entropy trend", ok, detail);
}

void ordered_ablation(const std::string& name, const std::vector<Run>& high, const std::vector<Run>& low, const char* high_label,
                      const char* low_label) {
  int wins = 0;
  std::vector<double> h, l;
  for (std::size_t s = 0; s < kSeeds.size(); ++s) {
    h.push_back(final_metrics(high[s]).overlap);
    l.push_back(final_metrics(low[s]).overlap);
    wins += h.back() > l.back();
  }
  report(name, wins >= 2, fmt("overlap %s %s vs %s %s, %d/3 seeds ordered", high_label, seed_list(h).c_str(), low_label, seed_list(l).c_str(), wins));
}

void finetune_sanity(const std::vector<Run>& cesd) {
  const MazeSpec maze = load_maze("square");
  int wins = 0;
  std::string detail;
  for (const auto& r : cesd) {
    Rng pick(r.cfg.seed);
    const int skill = sample_skill(r.cfg.n_skills, pick).index;
    const auto tail_mean = [](const std::vector<double>& v) {
      const std::size_t n = std::min<std::size_t>(10, v.size());
      return std::accumulate(v.end() - static_cast<std::ptrdiff_t>(n), v.end(), 0.0) / static_cast<double>(n);
    };
    const double pre = tail_mean(finetune(r.cfg, &r.result.checkpoint, maze, kFinetuneGoal, skill, kFinetuneFrames, r.cfg.seed).returns);
    const double scratch = tail_mean(finetune(r.cfg, nullptr, maze, kFinetuneGoal, skill, kFinetuneFrames, r.cfg.seed).returns);
    wins += pre > scratch;
    detail += fmt("%sseed %llu skill %d: %.2f vs %.2f", detail.empty() ? "" : ", ", static_cast<unsigned long long>(r.cfg.seed), skill, pre, scratch);
  }
  report("7 finetune", wins >= 2, fmt("pretrained vs scratch final-10 return, goal (%.1f, %.1f): %s; %d/3 seeds", kFinetuneGoal.x, kFinetuneGoal.y,
                                      detail.c_str(), wins));
}

// ---------------------------------------------------------------- determinism

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + CESD_CLI + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

void determinism() {
  const fs::path dir = fs::temp_directory_path() / fmt("cesd_acceptance_%d", static_cast<int>(::getpid()));
  fs::remove_all(dir);
  const std::string cfg = std::string(CESD_CONFIG_DIR) + "/cesd_square.cfg";
  const std::string small = " --total_frames 8000 --seed 7 --quiet";
  bool ok = true;
  std::string detail;
  for (const char* run : {"a", "b"})
    ok = ok && run_cli("train --config \"" + cfg + "\" --out \"" + (dir / run).string() + "\"" + small) == 0;
  const std::string log_a = slurp(dir / "a" / "train_log.csv"), log_b = slurp(dir / "b" / "train_log.csv");
  const bool logs_same = ok && !log_a.empty() && log_a == log_b;
  detail += fmt("train logs %s (%zu bytes)", logs_same ? "identical" : "differ", log_a.size());

  ok = run_cli("eval --checkpoint \"" + (dir / "a" / "checkpoint.bin").string() + "\" --episodes 2 --out \"" + (dir / "eval").string() + "\"") == 0;
  for (const char* svg : {"a.svg", "b.svg"})
    ok = ok && run_cli("plot --trajectories \"" + (dir / "eval" / "trajectories.csv").string() + "\" --out \"" + (dir / svg).string() + "\"") == 0;
  const std::string svg_a = slurp(dir / "a.svg"), svg_b = slurp(dir / "b.svg");
  const bool svg_same = ok && !svg_a.empty() && svg_a == svg_b;
  detail += fmt(", plots %s (%zu bytes)", svg_same ? "identical" : "differ", svg_a.size());
  fs::remove_all(dir);
  report("8 determinism", logs_same && svg_same, detail);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  theory();
  numerics();
  determinism();

  std::vector<RunConfig> configs;
  for (const char* agent : {"cesd", "entropy", "diayn"})
    for (auto s : kSeeds) configs.push_back(base_config(agent, s));
  for (auto s : kSeeds) {
    RunConfig c = base_config("cesd", s);
    c.alpha = 0.1;
    configs.push_back(c);
  }
  for (auto s : kSeeds) {
    RunConfig c = base_config("cesd", s);
    c.ensemble_size = 1;
    configs.push_back(c);
  }
  std::fprintf(stderr, "training %zu maze runs\n", configs.size());
  const auto runs = run_all(configs);
  const auto group = [&](std::size_t first) { return std::vector<Run>(runs.begin() + static_cast<std::ptrdiff_t>(first), runs.begin() + static_cast<std::ptrdiff_t>(first + 3)); };
  const auto cesd = group(0), entropy = group(3), diayn = group(6), low_alpha = group(9), single = group(12);

  comparative(cesd, entropy, diayn);
  entropy_trend(cesd);
  ordered_ablation("5 alpha ablation", low_alpha, cesd, "alpha=0.1", "alpha=1");
  ordered_ablation("6 ensemble ablation", single, cesd, "ensemble=1", "ensemble=10");
  finetune_sanity(cesd);

  std::sort(g_report.begin(), g_report.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  int failed = 0;
  for (const auto& [name, line] : g_report) {
    std::printf("%s %s: %s\n", line.pass ? "PASS" : "FAIL", name.c_str(), line.detail.c_str());
    failed += !line.pass;
  }
  std::printf("%zu/%zu criteria passed in %.0fs\n", g_report.size() - static_cast<std::size_t>(failed), g_report.size(), seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
