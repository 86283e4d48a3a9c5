#include "camegrad/cli/commands.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "camegrad/cli/config.hpp"
#include "camegrad/diagnostics.hpp"
#include "camegrad/dual_solver.hpp"
#include "camegrad/errors.hpp"
#include "camegrad/optimizer.hpp"
#include "camegrad/oracle.hpp"
#include "camegrad/rng.hpp"
#include "camegrad/toy_suite.hpp"

namespace camegrad::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const GradVec& v) { return json(v.as_vector()); }

json to_json(const SimplexWeights& a) {
  return json(std::vector<double>(a.values().begin(), a.values().end()));
}

// Maps library exceptions onto the exit-code contract.
int guarded(Streams io, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    io.err << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const InvariantError& e) {
    io.err << "invalid input: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const fs::filesystem_error& e) {
    io.err << "i/o error: " << e.what() << '\n';
    return kExitParse;
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvariantError("cannot write '" + path.string() + "'");
  out << text;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double csv_number(const std::string& tok, std::size_t line) {
  if (tok == "nan") return std::nan("");
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("invalid number '" + tok + "'", line);
  }
  return v;
}

json rectification_json(const RectificationResult& r) {
  return json{{"alpha", to_json(r.solution.alpha_star)},
              {"u_rect", to_json(r.u_rect)},
              {"dual_value", r.solution.dual_value},
              {"xi", r.xi},
              {"degenerate", r.degenerate},
              {"iterations", r.solution.iterations},
              {"converged", r.solution.converged}};
}

struct RunSummary {
  TrainLog log;
  std::string csv_name;
};

json run_json(const RunSummary& run) {
  const TrainLog& log = run.log;
  json j{{"strategy", std::string(strategy_name(log.strategy))},
         {"seed", log.seed},
         {"csv", run.csv_name},
         {"steps_completed", log.records.size()}};
  if (!log.records.empty()) {
    j["final_losses"] = log.records.back().losses;
    j["final_mean_loss"] = log.final_mean_loss();
    j["final_max_loss"] = log.final_max_loss();
  }
  j["negative_ratio"] = log.conflicts.count() ? json(log.conflicts.negative_ratio()) : json();
  j["trace"] = log.trace ? json(*log.trace) : json();
  j["diverged_at"] = log.diverged_at ? json(*log.diverged_at) : json();
  return j;
}

ProgressFn progress_printer(bool quiet, std::ostream& err, const std::string& tag,
                            std::mutex* lock = nullptr) {
  if (quiet) return {};
  return [&err, tag, lock](const TrainRecord& r) {
    if ((r.step + 1) % 100 != 0) return;
    double mean = 0.0;
    for (double l : r.losses) mean += l;
    mean /= static_cast<double>(r.losses.size());
    std::unique_lock<std::mutex> guard;
    if (lock) guard = std::unique_lock<std::mutex>(*lock);
    err << "[" << tag << "] step " << r.step + 1 << " mean_loss " << format_double(mean) << '\n';
  };
}

void write_run_files(const fs::path& dir, const TrainLog& log, bool dump_gradients) {
  std::ostringstream csv;
  write_train_log_csv(csv, log);
  write_text_file(dir / train_log_filename(log), csv.str());
  if (!dump_gradients) return;
  std::ostringstream g;
  g << "step";
  const std::size_t d = log.final_params.size();
  for (std::size_t j = 0; j < d; ++j) g << ",g_" << j;
  g << '\n';
  for (std::size_t t = 0; t < log.g_final_history.size(); ++t) {
    g << t;
    for (double v : log.g_final_history[t].values()) g << ',' << format_double(v);
    g << '\n';
  }
  const std::string stem = fs::path(train_log_filename(log)).stem().string();
  write_text_file(dir / (stem + "_gfinal.csv"), g.str());
}

}  // namespace

std::string resolve_output_dir(const std::optional<std::string>& flag, const std::string& fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kOutputEnvVar); env && *env) return env;
  return fallback;
}

// ---------------------------------------------------------------------------

int cmd_rectify(const RectifyArgs& args, Streams io) {
  return guarded(io, [&]() -> int {
    const GradientSet gs = read_gradient_set_file(args.input);
    const RectificationResult r = rectify(gs, args.rho);
    const GradVec mu = mean_gradient(gs);
    json j = rectification_json(r);
    j["mu"] = to_json(mu);
    j["trust_region_residual"] = norm(r.u_rect - mu) - args.rho * norm(mu);
    j["worst_case_alignment"] = worst_case_alignment(gs, r.u_rect);
    io.out << j.dump(2) << '\n';
    return kExitOk;
  });
}

int cmd_step(const StepArgs& args, Streams io) {
  return guarded(io, [&]() -> int {
    CameGradConfig came;
    Strategy strategy = Strategy::kFull;
    if (args.config) {
      const ExperimentConfig cfg = load_experiment_config(*args.config);
      came = cfg.came;
      strategy = cfg.strategies.front();
    }
    if (args.strategy) {
      auto s = parse_strategy(*args.strategy);
      if (!s) throw InvariantError("unknown strategy '" + *args.strategy + "'");
      strategy = *s;
    }
    if (args.rho) came.rho = *args.rho;
    if (args.kappa) came.kappa = *args.kappa;
    if (args.nu) came.nu = *args.nu;
    if (args.epsilon) came.epsilon = *args.epsilon;
    if (args.sgld_sigma) came.sgld_sigma = *args.sgld_sigma;

    const GradientSet gs = read_gradient_set_file(args.input);
    CounterRng noise(args.seed);
    const StepResult r = came_grad_step(gs, came, strategy, &noise);
    json j{{"strategy", std::string(strategy_name(strategy))},
           {"g_joint", to_json(r.g_joint)},
           {"mu", to_json(r.mu)},
           {"rectification", r.rectification ? rectification_json(*r.rectification) : json()},
           {"tau_mag", r.tau_mag},
           {"u_en", r.u_en ? to_json(*r.u_en) : json()},
           {"g_final", to_json(r.g_final)},
           {"degenerate_fallback", r.degenerate_fallback}};
    io.out << j.dump(2) << '\n';
    return kExitOk;
  });
}

int cmd_train(const TrainArgs& args, Streams io) {
  return guarded(io, [&]() -> int {
    const ExperimentConfig cfg = load_experiment_config(args.config);
    const fs::path dir = resolve_output_dir(args.output_dir, cfg.output_dir);
    fs::create_directories(dir);
    const auto problem = make_problem(cfg.problem);

    json runs = json::array();
    bool diverged = false;
    for (Strategy strategy : cfg.strategies) {
      for (std::uint64_t seed : cfg.seeds) {
        TrainConfig tc;
        tc.eta = cfg.eta;
        tc.steps = cfg.steps;
        tc.seed = seed;
        tc.strategy = strategy;
        tc.came = cfg.came;
        tc.keep_gradients = args.dump_gradients;
        const std::string tag = std::string(strategy_name(strategy)) + " seed " + std::to_string(seed);
        RunSummary run{train(*problem, tc, progress_printer(args.quiet, io.err, tag)), ""};
        run.csv_name = train_log_filename(run.log);
        write_run_files(dir, run.log, args.dump_gradients);
        if (run.log.diverged_at) {
          diverged = true;
          io.err << "diverged: " << tag << " at step " << *run.log.diverged_at << '\n';
        }
        runs.push_back(run_json(run));
      }
    }
    const json summary{{"problem", cfg.problem}, {"runs", runs}};
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    io.out << summary.dump(2) << '\n';
    return diverged ? kExitDivergence : kExitOk;
  });
}

int cmd_sweep(const SweepArgs& args, Streams io) {
  return guarded(io, [&]() -> int {
    const ExperimentConfig cfg = load_experiment_config(args.config);
    if (!cfg.sweep) throw InvariantError("sweep needs a [sweep] section");
    if (cfg.strategies.size() != 1) throw InvariantError("sweep takes exactly one strategy");
    if (args.jobs < 1) throw InvariantError("--jobs must be >= 1");

    const SweepAxes& axes = *cfg.sweep;
    auto or_default = [](const std::vector<double>& v, double d) {
      return v.empty() ? std::vector<double>{d} : v;
    };
    const auto rhos = or_default(axes.rho, cfg.came.rho);
    const auto kappas = or_default(axes.kappa, cfg.came.kappa);
    const auto nus = or_default(axes.nu, cfg.came.nu);

    struct Cell {
      double rho, kappa, nu;
      std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (double r : rhos) {
      for (double k : kappas) {
        for (double n : nus) {
          for (std::uint64_t s : cfg.seeds) cells.push_back({r, k, n, s});
        }
      }
    }
    if (cells.size() > args.max_runs) {
      io.err << "sweep has " << cells.size() << " runs, cap is " << args.max_runs << '\n';
      return static_cast<int>(kExitCap);
    }

    const fs::path dir = resolve_output_dir(args.output_dir, cfg.output_dir);
    fs::create_directories(dir);
    const auto problem = make_problem(cfg.problem);
    std::vector<std::optional<TrainLog>> logs(cells.size());
    std::vector<std::string> errors(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_lock;

    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        const Cell& c = cells[i];
        TrainConfig tc;
        tc.eta = cfg.eta;
        tc.steps = cfg.steps;
        tc.seed = c.seed;
        tc.strategy = cfg.strategies.front();
        tc.came = cfg.came;
        tc.came.rho = c.rho;
        tc.came.kappa = c.kappa;
        tc.came.nu = c.nu;
        const std::string cell_name = "rho" + format_double(c.rho) + "_kappa" +
                                      format_double(c.kappa) + "_nu" + format_double(c.nu);
        try {
          TrainLog log = train(*problem, tc,
                               progress_printer(args.quiet, io.err,
                                                cell_name + " seed " + std::to_string(c.seed),
                                                &err_lock));
          fs::create_directories(dir / cell_name);
          write_run_files(dir / cell_name, log, false);
          logs[i] = std::move(log);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    const std::size_t jobs = std::min(args.jobs, cells.size());
    for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (const std::string& e : errors) {
      if (!e.empty()) throw InvariantError(e);
    }

    std::ostringstream agg;
    agg << "rho,kappa,nu,seed,final_mean_loss,final_max_loss\n";
    bool diverged = false;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const Cell& c = cells[i];
      const TrainLog& log = *logs[i];
      agg << format_double(c.rho) << ',' << format_double(c.kappa) << ',' << format_double(c.nu)
          << ',' << c.seed << ',';
      if (log.records.empty()) {
        agg << "nan,nan\n";
      } else {
        agg << format_double(log.final_mean_loss()) << ',' << format_double(log.final_max_loss())
            << '\n';
      }
      if (log.diverged_at) {
        diverged = true;
        io.err << "diverged: run " << i << " at step " << *log.diverged_at << '\n';
      }
    }
    write_text_file(dir / "sweep.csv", agg.str());
    io.out << json{{"problem", cfg.problem}, {"runs", cells.size()}, {"aggregate", "sweep.csv"}}
                  .dump(2)
           << '\n';
    return diverged ? kExitDivergence : kExitOk;
  });
}

int cmd_oracle_check(const OracleCheckArgs& args, Streams io) {
  return guarded(io, [&]() -> int {
    if (args.dims < 1 || args.dims > kOracleMaxDim) {
      throw InvariantError("--dims must lie in [1, " + std::to_string(kOracleMaxDim) + "]");
    }
    if (args.tasks < 1) throw InvariantError("--tasks must be >= 1");
    if (args.count < 1) throw InvariantError("--count must be >= 1");

    CounterRng rng(args.seed);
    io.out << "instance,dual_value,oracle_value,abs_gap\n";
    bool breach = false;
    for (std::size_t i = 0; i < args.count; ++i) {
      std::vector<GradVec> grads;
      for (std::size_t t = 0; t < args.tasks; ++t) {
        std::vector<double> v(args.dims);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        grads.emplace_back(std::move(v));
      }
      const GradientSet gs(std::move(grads));
      const RectificationResult r = rectify(gs, args.rho);
      const OracleResult o = primal_maxmin_oracle(gs, args.rho, args.resolution);
      const double gap = std::abs(r.solution.dual_value - o.best_value);
      breach = breach || !(gap <= args.tolerance);
      io.out << i << ',' << format_double(r.solution.dual_value) << ','
             << format_double(o.best_value) << ',' << format_double(gap) << '\n';
    }
    if (breach) {
      io.err << "oracle gap exceeded " << format_double(args.tolerance) << '\n';
      return static_cast<int>(kExitOracleGap);
    }
    return static_cast<int>(kExitOk);
  });
}

namespace {

// Reads the min_cosine column of a training log into `stats`.
void ingest_train_log(const std::string& path, ConflictStats& stats) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty log", 1);
  const auto header = split_csv_line(line);
  const bool ok = header.size() >= 7 && header[0] == "step" && header[1] == "strategy" &&
                  header[2] == "seed" && header[3] == "loss_0" &&
                  header[header.size() - 3] == "joint_norm" &&
                  header[header.size() - 2] == "min_cosine" &&
                  header[header.size() - 1] == "negative_ratio";
  if (!ok) throw ParseError(path + ": not a training log header", 1);
  const std::size_t cos_col = header.size() - 2;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError(path + ": expected " + std::to_string(header.size()) + " fields", line_no);
    }
    const double c = csv_number(fields[cos_col], line_no);
    if (std::isfinite(c)) stats.record_cosine(c);
  }
}

std::vector<GradVec> read_gradient_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty stream", 1);
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "step" || header[1] != "g_0") {
    throw ParseError(path + ": gradient stream header must be step,g_0,...", 1);
  }
  std::vector<GradVec> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError(path + ": expected " + std::to_string(header.size()) + " fields", line_no);
    }
    std::vector<double> v;
    for (std::size_t j = 1; j < fields.size(); ++j) v.push_back(csv_number(fields[j], line_no));
    samples.emplace_back(std::move(v));
  }
  return samples;
}

}  // namespace

int cmd_diagnose(const DiagnoseArgs& args, Streams io) {
  return guarded(io, [&]() -> int {
    if (args.logs.empty() && args.gradient_streams.empty()) {
      throw InvariantError("diagnose needs at least one log or gradient stream");
    }
    const fs::path dir = resolve_output_dir(args.output_dir, ".");
    fs::create_directories(dir);
    json summary = json::object();

    if (!args.logs.empty()) {
      ConflictStats merged(args.bins);
      for (const std::string& path : args.logs) {
        ConflictStats one(args.bins);
        ingest_train_log(path, one);
        merged.merge(one);
      }
      std::ostringstream hist;
      write_histogram_csv(hist, merged);
      write_text_file(dir / "histogram.csv", hist.str());
      summary["histogram"] = "histogram.csv";
      summary["count"] = merged.count();
      summary["negative_count"] = merged.negative_count();
      summary["negative_ratio"] = merged.count() ? json(merged.negative_ratio()) : json();
      summary["mean_cosine"] = merged.count() ? json(merged.mean_cosine()) : json();
    }

    json traces = json::array();
    for (const std::string& path : args.gradient_streams) {
      const std::vector<GradVec> samples = read_gradient_stream(path);
      const auto series = trace_series(samples, args.window);
      const std::string name = "trace_" + fs::path(path).stem().string() + ".csv";
      std::ostringstream csv;
      write_trace_csv(csv, series);
      write_text_file(dir / name, csv.str());
      json t{{"stream", fs::path(path).filename().string()},
             {"csv", name},
             {"samples", samples.size()}};
      if (samples.size() >= 2) {
        const std::size_t first = samples.size() > args.window ? samples.size() - args.window : 0;
        t["final_trace"] =
            covariance_trace(std::span(samples).subspan(first)).trace;
      }
      if (args.kappa) t["kappa_ratio"] = kappa_scaling_check(samples, *args.kappa);
      traces.push_back(t);
    }
    if (!traces.empty()) summary["traces"] = traces;
    io.out << summary.dump(2) << '\n';
    return kExitOk;
  });
}

}  // namespace camegrad::cli
