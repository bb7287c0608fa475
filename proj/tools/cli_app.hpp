#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gngode/gngode.hpp"

namespace gngode::cli {

namespace fs = std::filesystem;

inline constexpr double kValidFraction = 0.2;

namespace detail {

inline void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string json_scalar(const std::string& key, const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return gngode::detail::format_double(v.get<double>());
  throw ConfigError("config key '" + key + "' has an unsupported value type");
}

/// Flat JSON object; arrays become comma-separated lists.
inline void apply_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file '" + path + "' must hold a flat JSON object");
  for (const auto& [key, value] : doc.items()) {
    std::string text;
    if (value.is_array()) {
      for (const auto& item : value) text += (text.empty() ? "" : ",") + json_scalar(key, item);
    } else {
      text = json_scalar(key, value);
    }
    apply_config_value(cfg, key, text);
  }
}

/// `item:t,item:t,...`
inline RawSession parse_session_string(const std::string& s) {
  RawSession session{"cli", {}};
  for (auto part : gngode::detail::split(s, ',')) {
    const auto token = gngode::detail::trim(part);
    if (token.empty()) continue;
    const auto colon = token.rfind(':');
    if (colon == std::string_view::npos) throw UsageError("session entry '" + std::string(token) + "' is not item:timestamp");
    const auto time = gngode::detail::parse_double(token.substr(colon + 1));
    if (!time || !std::isfinite(*time)) throw UsageError("bad timestamp in session entry '" + std::string(token) + "'");
    session.clicks.push_back(RawClick{std::string(token.substr(0, colon)), *time});
  }
  if (session.clicks.empty()) throw UsageError("--session is empty");
  std::stable_sort(session.clicks.begin(), session.clicks.end(),
                   [](const RawClick& a, const RawClick& b) { return a.time < b.time; });
  return session;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : gngode::detail::split(s, ',')) {
    const auto t = gngode::detail::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::string csv_double(double v) { return gngode::detail::format_double(v); }

}  // namespace detail

struct PrepareArgs {
  std::string input, output_dir;
  std::size_t min_item_freq = 5, min_session_len = 2;
};

inline void cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  const auto raw = parse_sessions(a.input);
  const auto pre = preprocess(raw, a.min_session_len, a.min_item_freq);
  auto [train, valid] = chronological_split(pre.sessions, kValidFraction);
  const fs::path dir(a.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + a.output_dir + "'");
  std::ostringstream vocab, tr, va;
  write_vocabulary(vocab, pre.vocabulary);
  write_sessions(tr, train, pre.vocabulary);
  write_sessions(va, valid, pre.vocabulary);
  detail::write_file(dir / "vocab.csv", vocab.str());
  detail::write_file(dir / "train.csv", tr.str());
  detail::write_file(dir / "valid.csv", va.str());
  out << "items=" << pre.vocabulary.size() << '\n'
      << "train_sessions=" << train.size() << '\n'
      << "valid_sessions=" << valid.size() << '\n';
}

struct SynthArgs {
  std::string output;
  std::string rule = "cycle";
  SyntheticOptions options;
};

inline void cmd_synth(SynthArgs a) {
  a.options.rule = parse_synthetic_rule(a.rule);
  std::ostringstream buf;
  write_sessions(buf, generate_synthetic(a.options));
  detail::write_file(a.output, buf.str());
}

struct TrainArgs {
  std::string config_file, data_dir, out, loss_log, seeds;
  std::map<std::string, std::string> overrides;
};

inline TrainConfig resolve_config(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config_file.empty()) detail::apply_config_file(cfg, a.config_file);
  for (const auto& [k, v] : a.overrides) apply_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

inline void cmd_train(const TrainArgs& a, std::ostream& out) {
  const TrainConfig base = resolve_config(a);
  const fs::path dir(a.data_dir);
  if (!fs::is_directory(dir)) throw IoError("data directory '" + a.data_dir + "' does not exist");
  const Vocabulary vocab = read_vocabulary((dir / "vocab.csv").string());
  std::size_t skipped = 0;
  const auto samples = samples_from_raw(parse_sessions((dir / "train.csv").string()), vocab, &skipped);

  std::vector<std::uint64_t> seeds{base.seed};
  if (!a.seeds.empty()) {
    seeds.clear();
    for (std::size_t s : parse_size_list("seeds", a.seeds)) seeds.push_back(s);
  }
  for (std::uint64_t seed : seeds) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    const std::string ckpt_path = a.seeds.empty() ? a.out : a.out + ".seed" + std::to_string(seed);
    const std::string log_path = a.loss_log.empty() || !a.seeds.empty() ? ckpt_path + ".loss.csv" : a.loss_log;
    const auto outcome = train(cfg, vocab, samples, [&](std::size_t epoch, double loss) {
      out << "seed=" << seed << " epoch=" << epoch << " loss=" << detail::csv_double(loss) << '\n';
    });
    save_checkpoint(outcome.checkpoint, ckpt_path);
    std::ostringstream log;
    write_loss_log(log, outcome.epoch_losses);
    detail::write_file(log_path, log.str());
    out << "checkpoint=" << ckpt_path << '\n';
  }
  if (skipped) out << "skipped=" << skipped << '\n';
}

struct EvaluateArgs {
  std::string checkpoints, data, k = "10,20";
};

inline void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto cutoffs = parse_size_list("k", a.k);
  const auto raw = parse_sessions(a.data);
  const auto paths = detail::split_list(a.checkpoints);
  if (paths.empty()) throw UsageError("--checkpoint is empty");
  std::vector<EvalReport> reports;
  for (const auto& path : paths) {
    const Checkpoint ckpt = load_checkpoint(path);
    std::size_t skipped = 0;
    const auto samples = samples_from_raw(raw, ckpt.vocabulary, &skipped);
    reports.push_back(evaluate(ckpt, samples, cutoffs, skipped));
  }
  if (reports.size() == 1) {
    write_report(out, reports.front());
    return;
  }
  // Several checkpoints (one per seed): mean and sample standard deviation.
  auto summarize = [&](const std::string& name, auto get) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(get(r));
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    out << name << '=' << detail::csv_double(mean) << '\n' << name << "_std=" << detail::csv_double(sd) << '\n';
  };
  for (std::size_t k : cutoffs) {
    summarize("HR@" + std::to_string(k), [k](const EvalReport& r) { return r.hr_at(k); });
    summarize("MRR@" + std::to_string(k), [k](const EvalReport& r) { return r.mrr_at(k); });
  }
  out << "checkpoints=" << reports.size() << '\n'
      << "samples=" << reports.front().samples << '\n'
      << "skipped=" << reports.front().skipped << '\n';
}

struct RecommendArgs {
  std::string checkpoint, session;
  std::size_t topk = 20;
};

inline void cmd_recommend(const RecommendArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const RawSession raw = detail::parse_session_string(a.session);
  Sample sample;
  sample.prefix.id = raw.id;
  std::string unknown;
  for (const auto& c : raw.clicks) {
    if (auto idx = ckpt.vocabulary.find(c.item)) {
      sample.prefix.clicks.push_back(Click{*idx, c.time});
    } else {
      unknown += (unknown.empty() ? "" : " ") + c.item;
    }
  }
  if (sample.prefix.clicks.empty()) throw UsageError("no known items in --session");
  if (!unknown.empty()) err << "warning: ignored unknown items: " << unknown << '\n';
  const Array probs = predict(ckpt.params, ckpt.config.model, std::span<const Sample>(&sample, 1));
  const auto row = probs.row(0);
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return row[x] > row[y]; });
  const std::size_t k = std::min(a.topk, order.size());
  for (std::size_t i = 0; i < k; ++i) out << ckpt.vocabulary.key(order[i]) << ',' << detail::csv_double(row[order[i]]) << '\n';
}

struct SolverBenchArgs {
  std::string checkpoint, data;
  std::string solvers = "euler,rk4,dopri5";
  std::string steps = "1,3,5,7,9";
  double rtol = 1e-3, atol = 1e-4;
  std::size_t max_steps = 1000;
  std::size_t k = 20;
};

inline void cmd_solver_bench(const SolverBenchArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  std::size_t skipped = 0;
  const auto samples = samples_from_raw(parse_sessions(a.data), ckpt.vocabulary, &skipped);
  const auto steps = parse_size_list("steps", a.steps);
  const std::string hr = "HR@" + std::to_string(a.k), mrr = "MRR@" + std::to_string(a.k);
  out << "solver,setting," << hr << ',' << mrr << ",seconds\n";
  auto run_one = [&](const SolverConfig& solver, const std::string& setting) {
    ModelConfig model = ckpt.config.model;
    model.solver = solver;
    model.solver.validate();
    const auto start = std::chrono::steady_clock::now();
    const EvalReport r = evaluate(ckpt.params, model, samples, {a.k}, skipped, ckpt.config.batch_size);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << to_string(solver.kind) << ',' << setting << ',' << detail::csv_double(r.hr_at(a.k)) << ','
        << detail::csv_double(r.mrr_at(a.k)) << ',' << detail::csv_double(secs) << '\n';
  };
  for (const auto& name : detail::split_list(a.solvers)) {
    SolverConfig solver = ckpt.config.model.solver;
    solver.kind = parse_solver_kind(name);
    if (solver.kind == SolverKind::dopri5) {
      solver.rtol = a.rtol;
      solver.atol = a.atol;
      solver.max_steps = a.max_steps;
      run_one(solver, "rtol=" + detail::csv_double(a.rtol));
      continue;
    }
    for (std::size_t s : steps) {
      solver.steps_per_unit = s;
      run_one(solver, "steps=" + std::to_string(s));
    }
  }
}

/// Parses argv and runs one subcommand. Returns the process exit code:
/// 0 on success, 2 for bad usage or configuration, 1 for anything else.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous-time session recommender over temporal session graphs", "gngode"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Filter a click log and split it into train/valid files");
  prepare->add_option("--input", prep.input, "Click log: session_id,item_id,timestamp")->required();
  prepare->add_option("--output-dir", prep.output_dir, "Directory for vocab.csv, train.csv and valid.csv")->required();
  prepare->add_option("--min-item-freq", prep.min_item_freq, "Drop items clicked fewer times")->capture_default_str();
  prepare->add_option("--min-session-len", prep.min_session_len, "Drop shorter sessions")->capture_default_str();

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Write a synthetic click log");
  synth->add_option("--output", syn.output, "Output click log")->required();
  synth->add_option("--items", syn.options.num_items, "Catalogue size")->capture_default_str();
  synth->add_option("--sessions", syn.options.num_sessions, "Number of sessions")->capture_default_str();
  synth->add_option("--rule", syn.rule, "Transition rule: cycle or markov")->capture_default_str();
  synth->add_option("--noise", syn.options.noise, "Probability a successor is uniform, in [0,1)")->capture_default_str();
  synth->add_option("--seed", syn.options.seed, "Generator seed")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model; flags override the config file");
  train_cmd->add_option("--config", tr.config_file, "Flat JSON config file");
  train_cmd->add_option("--data-dir", tr.data_dir, "Directory written by prepare")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--loss-log", tr.loss_log, "Loss log path [default: <out>.loss.csv]");
  train_cmd->add_option("--seeds", tr.seeds, "Comma-separated seeds; writes <out>.seed<N> per seed");
  std::vector<std::string> override_values(config_keys().size());
  for (std::size_t i = 0; i < config_keys().size(); ++i) {
    const auto& key = config_keys()[i];
    train_cmd->add_option(std::string("--") + key.name, override_values[i],
                          std::string(key.help) + " [default: " + key.default_value + "]");
  }

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Rank held-out targets and report HR@K and MRR@K");
  eval_cmd->add_option("--checkpoint", ev.checkpoints, "Checkpoint path, or comma-separated paths for mean/std")
      ->required();
  eval_cmd->add_option("--data", ev.data, "Click log to evaluate on")->required();
  eval_cmd->add_option("--k", ev.k, "Comma-separated cutoffs")->capture_default_str();

  RecommendArgs rec;
  auto* recommend = app.add_subcommand("recommend", "Top-K next items for one session");
  recommend->add_option("--checkpoint", rec.checkpoint, "Checkpoint path")->required();
  recommend->add_option("--session", rec.session, "item:timestamp pairs, comma-separated")->required();
  recommend->add_option("--topk", rec.topk, "Number of items to print")->capture_default_str();

  SolverBenchArgs sb;
  auto* bench = app.add_subcommand("solver-bench", "Metric and wall time per ODE solver setting (CSV)");
  bench->add_option("--checkpoint", sb.checkpoint, "Checkpoint path")->required();
  bench->add_option("--data", sb.data, "Click log to evaluate on")->required();
  bench->add_option("--solvers", sb.solvers, "Comma-separated solvers")->capture_default_str();
  bench->add_option("--steps", sb.steps, "Step counts for fixed-step solvers")->capture_default_str();
  bench->add_option("--rtol", sb.rtol, "dopri5 relative tolerance")->capture_default_str();
  bench->add_option("--atol", sb.atol, "dopri5 absolute tolerance")->capture_default_str();
  bench->add_option("--max-steps", sb.max_steps, "dopri5 step budget")->capture_default_str();
  bench->add_option("--k", sb.k, "Cutoff for the reported metrics")->capture_default_str();

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*prepare) {
      cmd_prepare(prep, out);
    } else if (*synth) {
      cmd_synth(syn);
    } else if (*train_cmd) {
      for (std::size_t i = 0; i < config_keys().size(); ++i) {
        const auto* opt = train_cmd->get_option(std::string("--") + config_keys()[i].name);
        if (opt->count() > 0) tr.overrides[config_keys()[i].name] = override_values[i];
      }
      cmd_train(tr, out);
    } else if (*eval_cmd) {
      cmd_evaluate(ev, out);
    } else if (*recommend) {
      cmd_recommend(rec, out, err);
    } else if (*bench) {
      cmd_solver_bench(sb, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace gngode::cli
