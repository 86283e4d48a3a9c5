#include "camegrad/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <iterator>
#include <regex>
#include <set>
#include <sstream>

#include "camegrad/errors.hpp"
#include "camegrad/toy_suite.hpp"

namespace camegrad::cli {
namespace {

namespace pt = boost::property_tree;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_double(const std::string& tok, const std::string& key) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw InvariantError(key + ": invalid number '" + tok + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& tok, const std::string& key) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw InvariantError(key + ": invalid non-negative integer '" + tok + "'");
  }
  return v;
}

void check_keys(const pt::ptree& node, const std::string& section,
                const std::set<std::string>& allowed) {
  for (const auto& [key, child] : node) {
    if (!child.empty()) continue;  // nested sections are checked by the caller
    if (!allowed.count(key)) {
      throw InvariantError("unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  for (const std::string& tok : split_list(text)) out.push_back(to_double(tok, key));
  return out;
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  const std::string text(std::istreambuf_iterator<char>(in), {});
  std::istringstream body(text);
  pt::ptree tree;
  try {
    pt::read_ini(body, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }

  ExperimentConfig cfg;
  check_keys(tree, "", {"problem", "strategy", "output_dir"});
  for (const auto& [key, child] : tree) {
    if (!child.empty() && key != "came" && key != "solver" && key != "train" && key != "sweep") {
      throw InvariantError("unknown section [" + key + "]");
    }
  }

  cfg.problem = tree.get<std::string>("problem", cfg.problem);
  if (!make_problem(cfg.problem)) throw InvariantError("problem: unknown name '" + cfg.problem + "'");

  if (auto s = tree.get_optional<std::string>("strategy")) {
    cfg.strategies.clear();
    for (const std::string& tok : split_list(*s)) {
      if (tok == "ablation") {
        for (Strategy st : ablation_grid()) cfg.strategies.push_back(st);
        continue;
      }
      auto parsed = parse_strategy(tok);
      if (!parsed) throw InvariantError("strategy: unknown name '" + tok + "'");
      cfg.strategies.push_back(*parsed);
    }
    if (cfg.strategies.empty()) throw InvariantError("strategy: empty list");
  }
  cfg.output_dir = tree.get<std::string>("output_dir", cfg.output_dir);
  if (cfg.output_dir.empty()) throw InvariantError("output_dir: empty path");

  auto number = [&](const pt::ptree& node, const std::string& section, const char* key,
                    double fallback) {
    auto v = node.get_optional<std::string>(key);
    return v ? to_double(*v, section + "." + key) : fallback;
  };

  if (auto came = tree.get_child_optional("came")) {
    check_keys(*came, "came", {"rho", "kappa", "nu", "epsilon", "sgld_sigma"});
    cfg.came.rho = number(*came, "came", "rho", cfg.came.rho);
    cfg.came.kappa = number(*came, "came", "kappa", cfg.came.kappa);
    cfg.came.nu = number(*came, "came", "nu", cfg.came.nu);
    cfg.came.epsilon = number(*came, "came", "epsilon", cfg.came.epsilon);
    cfg.came.sgld_sigma = number(*came, "came", "sgld_sigma", cfg.came.sgld_sigma);
  }
  if (auto solver = tree.get_child_optional("solver")) {
    check_keys(*solver, "solver", {"max_iterations", "tolerance"});
    if (auto v = solver->get_optional<std::string>("max_iterations")) {
      cfg.came.solver.max_iterations = static_cast<int>(to_u64(*v, "solver.max_iterations"));
    }
    cfg.came.solver.tolerance = number(*solver, "solver", "tolerance", cfg.came.solver.tolerance);
  }
  if (auto train = tree.get_child_optional("train")) {
    check_keys(*train, "train", {"eta", "steps", "seed"});
    cfg.eta = number(*train, "train", "eta", cfg.eta);
    if (auto v = train->get_optional<std::string>("steps")) cfg.steps = to_u64(*v, "train.steps");
    if (auto v = train->get_optional<std::string>("seed")) {
      cfg.seeds.clear();
      for (const std::string& tok : split_list(*v)) cfg.seeds.push_back(to_u64(tok, "train.seed"));
      if (cfg.seeds.empty()) throw InvariantError("train.seed: empty list");
    }
  }
  // read_ini drops sections without keys, so look for the header itself
  static const std::regex kSweepHeader(R"((^|\n)[ \t]*\[sweep\][ \t]*(\r?\n|$))");
  if (!tree.get_child_optional("sweep") && std::regex_search(text, kSweepHeader)) {
    throw InvariantError("[sweep] section lists no values");
  }
  if (auto sweep = tree.get_child_optional("sweep")) {
    check_keys(*sweep, "sweep", {"rho", "kappa", "nu"});
    SweepAxes axes;
    bool any = false;
    auto axis = [&](const char* key, std::vector<double>& dst) {
      auto v = sweep->get_optional<std::string>(key);
      if (!v) return;
      dst = parse_number_list(*v, std::string("sweep.") + key);
      if (dst.empty()) throw InvariantError(std::string("sweep.") + key + ": empty list");
      any = true;
    };
    axis("rho", axes.rho);
    axis("kappa", axes.kappa);
    axis("nu", axes.nu);
    if (!any) throw InvariantError("[sweep] section lists no values");
    for (double r : axes.rho) {
      if (!(r >= 0.0 && r < 1.0)) throw InvariantError("sweep.rho values must lie in [0, 1)");
    }
    for (double k : axes.kappa) {
      if (!(k >= 1.0)) throw InvariantError("sweep.kappa values must be >= 1");
    }
    for (double n : axes.nu) {
      if (!(n >= 0.0 && n <= 1.0)) throw InvariantError("sweep.nu values must lie in [0, 1]");
    }
    cfg.sweep = std::move(axes);
  }

  if (!(cfg.eta > 0.0)) throw InvariantError("train.eta must be > 0");
  if (cfg.steps < 1) throw InvariantError("train.steps must be >= 1");
  cfg.came.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  return parse_experiment_config(in);
}

}  // namespace camegrad::cli
