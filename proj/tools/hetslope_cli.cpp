// hetslope: command-line front end.
//
//   hetslope fit      --data panel.csv [--nu0 X --nu a,b | --sigma2 s]
//   hetslope tune     --data panel.csv
//   hetslope infer    --data panel.csv --targets 1,5 --groups all
//   hetslope complete --data panel.csv --targets 1
//   hetslope simulate --design static --N 100 --T 100 --reps 500
//   hetslope report   --results out.json --groups all --windows early:1-10,late:11-20
//
// Every option can also come from `--config file` (key = value, keys named
// like the long flags); flags given on the command line win.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hetslope/hetslope.hpp"

using namespace hetslope;
using json = nlohmann::json;

namespace {

struct Settings {
  std::map<std::string, std::string> values;

  bool has(const std::string& k) const { return values.count(k) && !values.at(k).empty(); }
  std::string str(const std::string& k, const std::string& def = "") const { return has(k) ? values.at(k) : def; }

  double num(const std::string& k, double def) const {
    if (!has(k)) return def;
    const auto v = io::parse_number(values.at(k));
    require(v.has_value(), ErrorKind::UsageError, "--" + k + " expects a number, got '" + values.at(k) + "'");
    return *v;
  }

  long long integer(const std::string& k, long long def) const {
    const double v = num(k, static_cast<double>(def));
    require(std::floor(v) == v, ErrorKind::UsageError, "--" + k + " expects an integer");
    return static_cast<long long>(v);
  }

  bool flag(const std::string& k, bool def) const {
    if (!has(k)) return def;
    const std::string v = values.at(k);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    fail(ErrorKind::UsageError, "--" + k + " expects true or false");
  }
};

const std::vector<std::string> kKeys = {
    "data",   "results", "out",       "seed",    "targets", "groups",   "level",  "mode",     "k-max",
    "nu0",    "nu",      "sigma2",    "scheme",  "tol",     "tol-step", "no-m",   "ranks",    "m-rank",
    "factors", "n-sims", "c1",        "delta",   "design",  "N",        "T",      "reps",     "windows",
    "rank-policy", "known-variance", "threads", "missing", "adjustment"};

Settings gather(const std::string& config_path, const std::map<std::string, std::string>& flags) {
  Settings s;
  if (!config_path.empty()) s.values = io::load_config(config_path);
  for (const auto& [k, v] : s.values)
    require(std::find(kKeys.begin(), kKeys.end(), k) != kKeys.end(), ErrorKind::UsageError,
            "unknown config key '" + k + "'");
  for (const auto& [k, v] : flags) s.values[k] = v;
  return s;
}

tuning::TuningOptions tuning_options(const Settings& s) {
  tuning::TuningOptions o;
  o.seed = static_cast<std::uint64_t>(s.integer("seed", static_cast<long long>(o.seed)));
  o.c1 = s.num("c1", o.c1);
  o.delta = s.num("delta", o.delta);
  o.n_sims = static_cast<int>(s.integer("n-sims", o.n_sims));
  o.include_m = !s.flag("no-m", false);
  if (s.has("scheme")) o.solver.scheme = svt::parse_scheme(s.str("scheme"));
  o.solver.tol_rel = s.num("tol", o.solver.tol_rel);
  o.solver.tol_step = s.num("tol-step", 1e-5);
  o.validate();
  return o;
}

std::vector<double> number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& f : io::split_fields(text)) {
    const auto v = io::parse_number(f);
    require(v.has_value(), ErrorKind::UsageError, "expected a number, got '" + f + "'");
    out.push_back(*v);
  }
  return out;
}

/// 1-based period list (time labels also accepted).
std::vector<Index> target_periods(const Settings& s, const PanelData& p) {
  std::vector<Index> out;
  if (!s.has("targets")) return out;
  for (const auto& f : io::split_fields(s.str("targets"))) {
    const auto it = std::find(p.time_labels.begin(), p.time_labels.end(), f);
    if (it != p.time_labels.end()) {
      out.push_back(static_cast<Index>(it - p.time_labels.begin()));
      continue;
    }
    const auto v = io::parse_number(f);
    require(v && *v >= 1 && *v <= static_cast<double>(p.t()), ErrorKind::UsageError, "bad target period '" + f + "'");
    out.push_back(static_cast<Index>(*v) - 1);
  }
  return out;
}

/// "all" or "id=unitA|unitB" items separated by ';'.
std::vector<inference::GroupSpec> parse_groups(const Settings& s, const PanelData& p) {
  std::vector<inference::GroupSpec> out;
  if (!s.has("groups")) return out;
  for (const auto& item : io::split_fields(s.str("groups"), ';')) {
    if (item.empty()) continue;
    if (item == "all") {
      out.push_back(inference::all_units(p.n()));
      continue;
    }
    const auto eq = item.find('=');
    require(eq != std::string::npos, ErrorKind::UsageError, "group '" + item + "' must be all or id=unit|unit");
    inference::GroupSpec g;
    g.id = io::trim(item.substr(0, eq));
    for (const auto& u : io::split_fields(item.substr(eq + 1), '|')) {
      const auto it = std::find(p.unit_labels.begin(), p.unit_labels.end(), u);
      require(it != p.unit_labels.end(), ErrorKind::UsageError, "unknown unit '" + u + "' in group " + g.id);
      g.members.push_back(static_cast<Index>(it - p.unit_labels.begin()));
    }
    out.push_back(std::move(g));
  }
  return out;
}

void emit(const Settings& s, const json& j) {
  const std::string text = j.dump(2) + "\n";
  if (!s.has("out") || s.str("out") == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(s.str("out"));
  require(out.good(), ErrorKind::InvalidInput, "cannot write '" + s.str("out") + "'");
  out << text;
}

PanelData panel_from(const Settings& s) {
  require(s.has("data"), ErrorKind::UsageError, "--data is required");
  PanelData p = io::load_panel_csv(s.str("data"));
  p.fill_default_labels();
  return p;
}

int run_fit(const Settings& s) {
  const PanelData p = panel_from(s);
  const tuning::TuningOptions o = tuning_options(s);
  json out;
  svt::PenalizedFit fit;
  if (s.has("nu")) {
    const std::vector<double> nu = number_list(s.str("nu"));
    if (o.include_m) {
      require(s.has("nu0"), ErrorKind::UsageError, "--nu0 is required with --nu unless --no-m is set");
      fit = svt::fit_joint(p.y, p.x, s.num("nu0", 0.0), nu, o.solver);
    } else {
      fit = svt::fit_without_m(p.y, p.x, nu, o.solver);
    }
  } else if (s.has("sigma2")) {
    const tuning::Penalties pen = tuning::simulate_tuning(p.x, p.n(), p.t(), s.num("sigma2", 1.0), o);
    fit = tuning::fit_with(p.y, p.x, pen, o, nullptr);
  } else {
    tuning::TunedFit tf = tuning::iterative_tuning(p.y, p.x, o);
    out["tuning"] = io::tuning_to_json(tf.tuning);
    fit = std::move(tf.fit);
  }
  out["fit"] = io::fit_to_json(fit);
  emit(s, out);
  return 0;
}

int run_tune(const Settings& s) {
  const PanelData p = panel_from(s);
  const tuning::TuningOptions o = tuning_options(s);
  if (s.has("sigma2")) {
    const tuning::Penalties pen = tuning::simulate_tuning(p.x, p.n(), p.t(), s.num("sigma2", 1.0), o);
    tuning::TuningResult r;
    r.nu0 = o.include_m ? pen.nu0 : std::numeric_limits<double>::infinity();
    r.nu = pen.nu;
    r.sigma_u_sq = s.num("sigma2", 1.0);
    r.c1 = o.c1;
    r.delta = o.delta;
    r.n_sims = o.n_sims;
    r.converged = true;
    emit(s, io::tuning_to_json(r));
  } else {
    emit(s, io::tuning_to_json(tuning::iterative_tuning(p.y, p.x, o).tuning));
  }
  return 0;
}

inference::InferenceConfig inference_config(const Settings& s) {
  inference::InferenceConfig c;
  c.tuning = tuning_options(s);
  c.include_m = c.tuning.include_m;
  c.level = s.num("level", 0.95);
  c.k_max = static_cast<Index>(s.integer("k-max", 8));
  c.split_seed = static_cast<std::uint64_t>(s.integer("seed", 1));
  const std::string mode = s.str("mode", "exact");
  require(mode == "exact" || mode == "panel", ErrorKind::UsageError, "--mode must be exact or panel");
  c.mode = mode == "exact" ? inference::Mode::exact : inference::Mode::panel;
  const std::string adj = s.str("adjustment", "partial_out");
  require(adj == "partial_out" || adj == "none", ErrorKind::UsageError, "--adjustment must be partial_out or none");
  c.adjustment = adj == "none" ? inference::Adjustment::none : inference::Adjustment::partial_out;
  if (s.has("ranks")) c.ranks = io::parse_index_list(s.str("ranks"));
  c.m_rank = static_cast<Index>(s.integer("m-rank", -1));
  if (s.has("factors")) c.covariate_factors = io::parse_index_list(s.str("factors"));
  if (s.has("sigma2")) c.sigma_u_sq = s.num("sigma2", 1.0);
  return c;
}

int run_infer(const Settings& s) {
  const PanelData p = panel_from(s);
  const inference::InferenceConfig c = inference_config(s);
  const std::vector<inference::GroupSpec> groups = parse_groups(s, p);
  std::vector<inference::Target> targets;
  for (Index t : target_periods(s, p)) targets.push_back({t, groups});
  if (c.mode == inference::Mode::panel && targets.empty())
    for (Index t = 0; t < p.t(); ++t) targets.push_back({t, groups});
  require(!targets.empty(), ErrorKind::UsageError, "--targets is required in exact mode");
  const inference::EffectEstimate est = inference::estimate_effects(p, targets, c);
  emit(s, io::table_to_json(io::make_table(est, p, groups)));
  return 0;
}

int run_complete(const Settings& s) {
  PanelData p = panel_from(s);
  const Matrix mask = p.mask ? *p.mask : Matrix::Ones(p.n(), p.t());
  completion::CompletionOptions o;
  o.tuning = tuning_options(s);
  o.tuning.include_m = false;
  o.level = s.num("level", 0.95);
  o.split_seed = static_cast<std::uint64_t>(s.integer("seed", 1));
  if (s.has("ranks")) o.rank = io::parse_index_list(s.str("ranks")).at(0);
  const std::optional<double> s2 = s.has("sigma2") ? std::optional<double>(s.num("sigma2", 1.0)) : std::nullopt;
  const tuning::TuningResult tr = completion::tune_completion(p.y, mask, s2, o.tuning);
  o.sigma_u_sq = tr.sigma_u_sq;
  const std::vector<inference::GroupSpec> groups = parse_groups(s, p);
  std::vector<inference::Target> targets;
  for (Index t : target_periods(s, p)) targets.push_back({t, groups});
  require(!targets.empty(), ErrorKind::UsageError, "--targets is required");
  const inference::EffectEstimate est = completion::complete_fit(p.y, mask, tr.nu.front(), targets, o);
  PanelData labels = p;
  labels.x.clear();
  emit(s, io::table_to_json(io::make_table(est, labels, groups)));
  return 0;
}

int run_simulate(const Settings& s) {
  sim::SimConfig c;
  c.design = sim::parse_design(s.str("design", "static"));
  c.n = static_cast<Index>(s.integer("N", 100));
  c.t = static_cast<Index>(s.integer("T", 100));
  c.reps = static_cast<int>(s.integer("reps", 500));
  c.seed = static_cast<std::uint64_t>(s.integer("seed", 1));
  c.level = s.num("level", 0.95);
  c.tuning = tuning_options(s);
  c.threads = static_cast<int>(s.integer("threads", 0));
  const std::string rp = s.str("rank-policy", "oracle");
  require(rp == "oracle" || rp == "estimate", ErrorKind::UsageError, "--rank-policy must be oracle or estimate");
  c.rank_policy = rp == "oracle" ? sim::RankPolicy::oracle : sim::RankPolicy::estimate;
  c.known_variance = s.flag("known-variance", true);
  c.completion_design.missing = s.num("missing", c.completion_design.missing);
  emit(s, io::summary_to_json(sim::run_replications(c)));
  return 0;
}

int run_report(const Settings& s) {
  require(s.has("results"), ErrorKind::UsageError, "--results is required");
  std::ifstream in(s.str("results"));
  require(in.good(), ErrorKind::ParseError, "cannot open '" + s.str("results") + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("results file is not JSON: ") + e.what());
  }
  const io::EffectTable tab = io::table_from_json(j);
  std::vector<std::string> groups;
  for (const auto& g : io::split_fields(s.str("groups", "all"), ';'))
    if (!g.empty()) groups.push_back(g.substr(0, g.find('=')));
  std::vector<io::ReportWindow> windows;
  for (const auto& w : io::split_fields(s.str("windows", "all:all")))
    if (!w.empty()) windows.push_back(io::parse_window(w, tab.time_labels));
  require(!windows.empty(), ErrorKind::InvalidWindow, "no report windows given");
  const auto rows = io::report_effect_summary(tab, groups, windows, s.num("level", tab.level));
  if (!s.has("out") || s.str("out") == "-") {
    io::write_report_csv(std::cout, rows);
  } else {
    std::ofstream out(s.str("out"));
    require(out.good(), ErrorKind::InvalidInput, "cannot write '" + s.str("out") + "'");
    io::write_report_csv(out, rows);
  }
  return 0;
}

int exit_code(ErrorKind k) { return k == ErrorKind::UsageError ? 2 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous-slope panel estimation with low-rank slopes"};
  app.require_subcommand(0, 1);
  std::string config_path;
  std::map<std::string, std::string> flags;
  app.add_option("--config", config_path, "key = value file; flags override it");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"fit", "penalized fit: slope and interactive-effect matrices with ranks"},
      {"tune", "simulated penalty levels and noise variance"},
      {"infer", "cross-fitted effects, standard errors and group averages"},
      {"simulate", "Monte Carlo coverage study"},
      {"complete", "matrix completion with cell confidence intervals"},
      {"report", "window summaries from saved infer results"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, about] : commands) {
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("--config", config_path, "key = value file; flags override it");
    for (const auto& key : kKeys) {
      if (key == "no-m") {
        sub->add_flag_callback("--no-m", [&flags] { flags["no-m"] = "true"; }, "fit without interactive fixed effects");
        continue;
      }
      sub->add_option_function<std::string>("--" + key, [&flags, key](const std::string& v) { flags[key] = v; });
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorKind::UsageError);
  }

  try {
    std::string command;
    for (std::size_t k = 0; k < subs.size(); ++k)
      if (subs[k]->parsed()) command = commands[k].first;
    if (command.empty()) {
      const auto extras = app.remaining();
      fail(ErrorKind::UsageError, extras.empty() ? "no command given; expected one of fit, tune, infer, simulate, complete, report"
                                                 : "unknown command '" + extras.front() + "'");
    }
    const Settings s = gather(config_path, flags);
    if (command == "fit") return run_fit(s);
    if (command == "tune") return run_tune(s);
    if (command == "infer") return run_infer(s);
    if (command == "complete") return run_complete(s);
    if (command == "simulate") return run_simulate(s);
    return run_report(s);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
