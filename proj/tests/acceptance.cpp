// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).
//
//   acceptance [--only N[,M...]] [--work-dir DIR] [--keep]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include "cli_app.hpp"
#include "support.hpp"

using namespace gngode;
using gngode::testing::make_session;
using gngode::testing::random_array;
using gngode::testing::random_session;
namespace fs = std::filesystem;

namespace {

// Criterion 6 / 8 / 10 run.
constexpr std::size_t kCycleEpochs = 12;
constexpr const char* kCycleLr = "0.005";
constexpr const char* kCycleBatch = "64";

// Criterion 7 runs.
constexpr const char* kMarkovItems = "50";
constexpr const char* kMarkovSessions = "2000";
constexpr const char* kMarkovDim = "32";
constexpr const char* kMarkovEpochs = "8";

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gngode");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

CliResult cli_ok(const std::vector<std::string>& args) {
  CliResult r = cli(args);
  if (r.code != 0) throw std::runtime_error("gngode " + args.front() + " failed: " + r.err);
  return r;
}

std::map<std::string, double> key_values(const std::string& text) {
  std::map<std::string, double> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.find(' ') != std::string::npos) continue;
    if (auto v = detail::parse_double(std::string_view(line).substr(eq + 1))) kv[line.substr(0, eq)] = *v;
  }
  return kv;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string timing(double secs, double limit) { return " time=" + fmt(secs, 3) + "s/" + fmt(limit, 3) + "s"; }

ParameterSet random_ode_params(std::size_t dim, Rng& rng, double bound) {
  ParameterSet p;
  init_ode_params(p, dim, rng);
  for (auto& [name, a] : p) a = uniform_array(a.shape(), bound, rng);
  return p;
}

ParameterSet zero_ode_params(std::size_t dim) {
  Rng rng(0);
  ParameterSet p = random_ode_params(dim, rng, 1.0);
  for (auto& [name, a] : p) a.fill(0.0);
  return p;
}

BatchGraph single_batch(const TemporalSessionGraph& g) { return make_batch(std::span<const TemporalSessionGraph>(&g, 1)); }

SolverConfig fixed(SolverKind kind, std::size_t steps) {
  SolverConfig c;
  c.kind = kind;
  c.steps_per_unit = steps;
  return c;
}

Array solve_values(const ParameterSet& p, const BatchGraph& g, const Array& h0, const Array& x, const SolverConfig& cfg,
                   OdeOptions opts = {}, double t1 = 1.0) {
  Tape tape;
  return solve(tape.constant(h0), g, GruCellVars::bind(tape.bind(p), kOdePrefix), tape.constant(x), cfg, opts, 0.0, t1)
      .value();
}

// Least-squares slope of log(err) against log(1/k).
double loglog_order(const std::vector<std::size_t>& ks, const std::vector<double>& errs) {
  double mx = 0, my = 0;
  const double n = static_cast<double>(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) mx += -std::log(double(ks[i])) / n, my += std::log(errs[i]) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double dx = -std::log(double(ks[i])) - mx;
    sxy += dx * (std::log(errs[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

Outcome gradients() {
  const auto start = std::chrono::steady_clock::now();
  ModelConfig cfg;
  cfg.dim = 8;
  const ParameterSet p = init_parameters(6, cfg, 7);
  const std::vector<Sample> samples{{make_session({{0, 100}, {3, 130}, {1, 190}}), 4}};
  const auto batch = prepare_batch(samples);
  constexpr double l2 = 1e-4;
  Tape tape;
  const auto grads = tape.backward(batch_loss(tape, p, cfg, batch, l2));
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, value] : p) {
    ParameterSet probe = p;
    const Array fd = finite_difference_gradient(
        [&](const Array& x) {
          probe[name] = x;
          Tape t;
          return batch_loss(t, probe, cfg, batch, l2).value()[0];
        },
        value);
    const double err = relative_error(grads.at(name), fd);
    if (!(err <= worst)) worst = err, worst_name = name;
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && secs < 10.0,
          "groups=" + std::to_string(p.size()) + " max_rel_err=" + fmt(worst, 3) + " (" + worst_name + ")" +
              timing(secs, 10)};
}

Outcome boundedness() {
  const auto start = std::chrono::steady_clock::now();
  constexpr std::size_t dim = 8;
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ParameterSet p = random_ode_params(dim, rng, 2.0);
    const auto g = build_temporal_graph(random_session(rng, 2 + rng() % 11, 8));
    const Array h0 = random_array({g.num_nodes(), dim}, rng);
    const Array x = random_array({g.num_nodes(), dim}, rng);
    worst = std::max(worst, max_abs(solve_values(p, single_batch(g), h0, x, fixed(SolverKind::rk4, 8))));
  }
  // Zero-parameter ODE from outside the band: the sup norm must shrink at every checkpoint.
  const auto g = build_temporal_graph(make_session({{0, 1}, {1, 2}, {2, 4}, {0, 7}}));
  Array h0({g.num_nodes(), dim});
  for (double& v : h0.values()) v = (rng() & 1) ? 1.5 : -1.5;
  const ParameterSet zero = zero_ode_params(dim);
  bool contracts = true;
  double previous = 1.5;
  for (double t : {0.25, 0.5, 0.75, 1.0}) {
    const double m = max_abs(solve_values(zero, single_batch(g), h0, h0, fixed(SolverKind::rk4, 8), {}, t));
    contracts = contracts && m < previous;
    previous = m;
  }
  const double secs = seconds_since(start);
  return {worst <= 1.001 && contracts && secs < 30.0,
          "max|H(1)|=" + fmt(worst, 6) + " contraction_from_1.5=" + (contracts ? "yes" : "no") + " final=" +
              fmt(previous, 6) + timing(secs, 30)};
}

Outcome rhs_bound() {
  const auto start = std::chrono::steady_clock::now();
  constexpr std::size_t dim = 8;
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ParameterSet p = random_ode_params(dim, rng, 3.0);
    const auto g = build_temporal_graph(random_session(rng, 2 + rng() % 11, 8));
    const double t = 0.5 * (uniform_symmetric(rng, 1.0) + 1.0);
    Tape tape;
    const Array d = ode_rhs(tape.constant(random_array({g.num_nodes(), dim}, rng)), t, single_batch(g),
                            GruCellVars::bind(tape.bind(p), kOdePrefix),
                            tape.constant(random_array({g.num_nodes(), dim}, rng, 3.0)))
                        .value();
    worst = std::max(worst, max_abs(d));
  }
  const double secs = seconds_since(start);
  return {worst <= 2.0 && secs < 5.0, "states=1000 max|f|=" + fmt(worst, 6) + timing(secs, 5)};
}

Outcome solver_order() {
  const auto start = std::chrono::steady_clock::now();
  constexpr std::size_t dim = 8;
  const auto g = build_temporal_graph(make_session({{0, 1}, {1, 3}, {2, 4}, {1, 9}}));
  const BatchGraph b = single_batch(g);
  Rng rng(5);
  const Array h0 = random_array({g.num_nodes(), dim}, rng);
  const Array exact = std::exp(-0.5) * h0;
  const ParameterSet zero = zero_ode_params(dim);
  const std::vector<std::size_t> ks{4, 8, 16, 32, 64};
  std::map<SolverKind, double> order;
  for (SolverKind kind : {SolverKind::euler, SolverKind::rk4}) {
    std::vector<double> errs;
    for (std::size_t k : ks) errs.push_back(max_abs(solve_values(zero, b, h0, h0, fixed(kind, k)) - exact));
    order[kind] = loglog_order(ks, errs);
  }
  SolverConfig dp;
  dp.kind = SolverKind::dopri5;
  dp.rtol = 1e-6;
  dp.atol = 1e-6;
  const double dp_err = max_abs(solve_values(zero, b, h0, h0, dp) - exact);
  const double secs = seconds_since(start);
  const double eo = order[SolverKind::euler], ro = order[SolverKind::rk4];
  return {std::abs(eo - 1.0) <= 0.2 && std::abs(ro - 4.0) <= 0.5 && dp_err <= 1e-6 && secs < 10.0,
          "euler_slope=" + fmt(eo) + " rk4_slope=" + fmt(ro) + " dopri5_err=" + fmt(dp_err, 3) + timing(secs, 10)};
}

Outcome t_alignment() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(99);
  std::size_t monotone_fail = 0, prefix_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Session s = random_session(rng, 2 + rng() % 14, 6);
    const auto g = build_temporal_graph(s);
    const double t1 = 0.5 * (uniform_symmetric(rng, 1.0) + 1.0);
    const double t2 = t1 + (1.0 - t1) * 0.5 * (uniform_symmetric(rng, 1.0) + 1.0);
    const auto early = t_align(g, t1).edges();
    const auto late = t_align(g, t2).edges();
    for (const auto& e : early)
      if (std::find(late.begin(), late.end(), e) == late.end()) ++monotone_fail;

    // Edges active at a click's normalized time are exactly the prefix graph's edges, as item pairs.
    const auto times = normalized_click_times(s);
    auto pairs = [](const TemporalSessionGraph& graph, double t_max) {
      std::multiset<std::pair<std::size_t, std::size_t>> out;
      for (const auto& e : graph.edges)
        if (e.time <= t_max) out.emplace(graph.items[e.source], graph.items[e.target]);
      return out;
    };
    for (std::size_t n = 1; n <= s.size(); ++n) {
      const Session prefix{s.id, {s.clicks.begin(), s.clicks.begin() + static_cast<std::ptrdiff_t>(n)}};
      if (pairs(g, times[n - 1]) != pairs(build_temporal_graph(prefix), 1.0)) ++prefix_fail;
    }
  }

  constexpr std::size_t dim = 8;
  double static_gap = 0.0;
  SolverConfig dp;
  dp.kind = SolverKind::dopri5;
  for (int trial = 0; trial < 20; ++trial) {
    const ParameterSet p = random_ode_params(dim, rng, 1.0);
    BatchGraph b = single_batch(build_temporal_graph(random_session(rng, 2 + rng() % 10, 6)));
    for (auto& e : b.edges) e.time = 0.0;
    const Array h0 = random_array({b.num_nodes(), dim}, rng);
    const Array x = random_array({b.num_nodes(), dim}, rng);
    for (const SolverConfig& cfg : {fixed(SolverKind::euler, 7), fixed(SolverKind::rk4, 7), dp}) {
      const Array aligned = solve_values(p, b, h0, x, cfg, OdeOptions{true, GcnNorm::symmetric});
      const Array fixed_graph = solve_values(p, b, h0, x, cfg, OdeOptions{false, GcnNorm::symmetric});
      static_gap = std::max(static_gap, max_abs(aligned - fixed_graph));
    }
  }
  const double secs = seconds_since(start);
  return {monotone_fail == 0 && prefix_fail == 0 && static_gap <= 1e-10 && secs < 30.0,
          "monotone_violations=" + std::to_string(monotone_fail) + " prefix_mismatches=" + std::to_string(prefix_fail) +
              " t0_vs_static=" + fmt(static_gap, 3) + timing(secs, 30)};
}

// Fraction of held-out samples whose target is the cycle successor of the last
// click: the best HR@1 any model can reach on this split.
double cycle_ceiling(const fs::path& valid, std::size_t items) {
  std::size_t hits = 0, total = 0;
  for (const auto& s : parse_sessions(valid.string())) {
    for (std::size_t i = 1; i < s.clicks.size(); ++i) {
      ++total;
      if (std::stoul(s.clicks[i].item) == (std::stoul(s.clicks[i - 1].item) + 1) % items) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

struct Workspace {
  fs::path root;
  fs::path path(const std::string& name) const { return root / name; }
  std::string str(const std::string& name) const { return path(name).string(); }
};

Outcome learning(const Workspace& w) {
  const auto start = std::chrono::steady_clock::now();
  cli_ok({"synth", "--output", w.str("cycle.csv"), "--items", "50", "--sessions", "2000", "--rule", "cycle", "--noise",
          "0.1", "--seed", "1"});
  cli_ok({"prepare", "--input", w.str("cycle.csv"), "--output-dir", w.str("cycle")});
  cli_ok({"train", "--data-dir", w.str("cycle"), "--out", w.str("cycle.ckpt"), "--dim", "64", "--solver", "rk4",
          "--steps", "7", "--epochs", std::to_string(kCycleEpochs), "--batch_size", kCycleBatch, "--lr", kCycleLr,
          "--seed", "1"});
  const auto r = key_values(
      cli_ok({"evaluate", "--checkpoint", w.str("cycle.ckpt"), "--data", w.str("cycle/valid.csv"), "--k", "1,10"}).out);
  const double hr1 = r.at("HR@1"), mrr10 = r.at("MRR@10");
  const double ceiling = cycle_ceiling(w.path("cycle/valid.csv"), 50);
  const double secs = seconds_since(start);
  return {hr1 >= 0.9 && mrr10 >= 0.9 && secs < 600.0,
          "HR@1=" + fmt(hr1) + " MRR@10=" + fmt(mrr10) + " samples=" + fmt(r.at("samples"), 6) +
              " epochs=" + std::to_string(kCycleEpochs) + " ceiling_HR@1=" + fmt(ceiling) + " random_HR@1=0.02" +
              timing(secs, 600)};
}

Outcome ablation(const Workspace& w) {
  const auto start = std::chrono::steady_clock::now();
  cli_ok({"synth", "--output", w.str("markov.csv"), "--items", kMarkovItems, "--sessions", kMarkovSessions, "--rule",
          "markov", "--seed", "3"});
  cli_ok({"prepare", "--input", w.str("markov.csv"), "--output-dir", w.str("markov")});
  std::map<std::string, double> mean;
  for (const char* variant : {"true", "false"}) {
    const std::string out = w.str(std::string("markov_") + variant);
    cli_ok({"train", "--data-dir", w.str("markov"), "--out", out, "--seeds", "1,2,3", "--t_align", variant, "--dim",
            kMarkovDim, "--solver", "rk4", "--steps", "7", "--epochs", kMarkovEpochs, "--batch_size", "64", "--lr",
            "0.005"});
    const auto r = key_values(cli_ok({"evaluate", "--checkpoint", out + ".seed1," + out + ".seed2," + out + ".seed3",
                                      "--data", w.str("markov/valid.csv"), "--k", "10"})
                                  .out);
    mean[variant] = r.at("MRR@10");
  }
  const double secs = seconds_since(start);
  return {mean["true"] >= mean["false"] && secs < 1200.0,
          "MRR@10 t_align=" + fmt(mean["true"], 5) + " static=" + fmt(mean["false"], 5) + " seeds=3" +
              timing(secs, 1200)};
}

Outcome solver_bench(const Workspace& w) {
  const auto out = cli_ok({"solver-bench", "--checkpoint", w.str("cycle.ckpt"), "--data", w.str("cycle/valid.csv"),
                           "--solvers", "euler,rk4", "--steps", "1,7", "--k", "20"})
                       .out;
  std::map<std::string, double> mrr;
  std::istringstream in(out);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto cells = detail::split(line, ',');
    mrr[std::string(cells[0]) + "@" + std::string(cells[1])] = *detail::parse_double(cells[3]);
  }
  const double r1 = mrr.at("rk4@steps=1"), r7 = mrr.at("rk4@steps=7");
  const double e1 = mrr.at("euler@steps=1"), e7 = mrr.at("euler@steps=7");
  const double euler_gap = std::abs(e7 - e1), rk4_gap = std::abs(r7 - r1);

  // Diagnostic only: mean L1 shift of the predicted distribution between steps=1 and steps=7.
  const Checkpoint ckpt = load_checkpoint(w.str("cycle.ckpt"));
  const auto samples = samples_from_raw(parse_sessions(w.str("cycle/valid.csv")), ckpt.vocabulary);
  auto shift = [&](SolverKind kind) {
    ModelConfig coarse = ckpt.config.model, fine = ckpt.config.model;
    coarse.solver = fixed(kind, 1);
    fine.solver = fixed(kind, 7);
    double total = 0.0;
    for (std::size_t begin = 0; begin < samples.size(); begin += 512) {
      const std::span<const Sample> batch(samples.data() + begin, std::min<std::size_t>(512, samples.size() - begin));
      const Array a = predict(ckpt.params, coarse, batch), b = predict(ckpt.params, fine, batch);
      for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    }
    return total / static_cast<double>(samples.size());
  };
  return {r7 >= r1 && euler_gap > rk4_gap,
          "MRR@20 rk4[1,7]=" + fmt(r1, 6) + "," + fmt(r7, 6) + " euler[1,7]=" + fmt(e1, 6) + "," + fmt(e7, 6) +
              " gap_euler=" + fmt(euler_gap, 3) + " gap_rk4=" + fmt(rk4_gap, 3) +
              " prob_shift_euler=" + fmt(shift(SolverKind::euler), 3) + " prob_shift_rk4=" + fmt(shift(SolverKind::rk4), 3)};
}

Outcome determinism(const Workspace& w) {
  cli_ok({"synth", "--output", w.str("det.csv"), "--items", "20", "--sessions", "300", "--rule", "markov", "--noise",
          "0.05", "--seed", "11"});
  cli_ok({"prepare", "--input", w.str("det.csv"), "--output-dir", w.str("det")});
  std::vector<std::string> reports, checkpoints, logs;
  for (const char* run : {"a", "b"}) {
    const std::string ckpt = w.str(std::string("det_") + run + ".ckpt");
    cli_ok({"train", "--data-dir", w.str("det"), "--out", ckpt, "--dim", "16", "--epochs", "2", "--batch_size", "32",
            "--lr", "0.01", "--seed", "5"});
    checkpoints.push_back(slurp(ckpt));
    logs.push_back(slurp(ckpt + ".loss.csv"));
    reports.push_back(cli_ok({"evaluate", "--checkpoint", ckpt, "--data", w.str("det/valid.csv")}).out);
  }
  const bool same_ckpt = checkpoints[0] == checkpoints[1], same_log = logs[0] == logs[1],
             same_report = reports[0] == reports[1];
  return {same_ckpt && same_log && same_report,
          std::string("checkpoint=") + (same_ckpt ? "identical" : "differs") + " loss_log=" +
              (same_log ? "identical" : "differs") + " report=" + (same_report ? "identical" : "differs") +
              " bytes=" + std::to_string(checkpoints[0].size())};
}

Outcome round_trip(const Workspace& w) {
  const std::string original = slurp(w.path("cycle.ckpt"));
  save_checkpoint(load_checkpoint(w.str("cycle.ckpt")), w.str("cycle_resaved.ckpt"));
  const std::string once = slurp(w.path("cycle_resaved.ckpt"));
  save_checkpoint(load_checkpoint(w.str("cycle_resaved.ckpt")), w.str("cycle_resaved2.ckpt"));
  const bool ckpt_same = original == once && once == slurp(w.path("cycle_resaved2.ckpt"));
  cli_ok({"prepare", "--input", w.str("cycle.csv"), "--output-dir", w.str("cycle_again")});
  bool prepare_same = true;
  for (const char* f : {"vocab.csv", "train.csv", "valid.csv"})
    prepare_same = prepare_same && slurp(w.path("cycle") / f) == slurp(w.path("cycle_again") / f);
  return {ckpt_same && prepare_same, std::string("checkpoint=") + (ckpt_same ? "identical" : "differs") +
                                         " prepare=" + (prepare_same ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  fs::path work;
  bool keep = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      for (auto n : parse_size_list("only", argv[++i])) only.insert(static_cast<int>(n));
    } else if (a == "--work-dir" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--keep") {
      keep = true;
    } else {
      std::cerr << "usage: acceptance [--only N[,M...]] [--work-dir DIR] [--keep]\n";
      return 2;
    }
  }
  if (work.empty()) work = fs::temp_directory_path() / ("gngode_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);
  const Workspace w{work};

  // 8 and 10 reuse the model and data written by 6.
  if (only.count(8) || only.count(10)) only.insert(6);
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, gradients},
      {2, boundedness},
      {3, rhs_bound},
      {4, solver_order},
      {5, t_alignment},
      {6, [&] { return learning(w); }},
      {7, [&] { return ablation(w); }},
      {8, [&] { return solver_bench(w); }},
      {9, [&] { return determinism(w); }},
      {10, [&] { return round_trip(w); }},
  };
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  if (!keep) fs::remove_all(work);
  return failed;
}
