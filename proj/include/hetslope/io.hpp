#ifndef HETSLOPE_IO_HPP
#define HETSLOPE_IO_HPP

// CSV panels, JSON results, window summaries and keyed config files.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "hetslope/inference.hpp"
#include "hetslope/panel.hpp"
#include "hetslope/simulation.hpp"

namespace hetslope::io {

using json = nlohmann::json;

// ------------------------------------------------------------------ CSV

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_fields(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

/// Orders time labels numerically when all are numbers, else lexicographically.
inline std::vector<std::string> order_time_labels(std::vector<std::string> labels) {
  const bool numeric = std::all_of(labels.begin(), labels.end(), [](const std::string& s) { return parse_number(s).has_value(); });
  if (numeric) {
    std::sort(labels.begin(), labels.end(),
              [](const std::string& a, const std::string& b) { return *parse_number(a) < *parse_number(b); });
    for (std::size_t k = 1; k < labels.size(); ++k)
      require(*parse_number(labels[k - 1]) < *parse_number(labels[k]), ErrorKind::DuplicateCell,
              "time labels '" + labels[k - 1] + "' and '" + labels[k] + "' denote the same period");
  } else {
    std::sort(labels.begin(), labels.end());
  }
  return labels;
}

/// Long-format CSV with header `unit,time,y,x1..xd`. A blank y marks a
/// missing outcome and leaves a zero in the mask.
inline PanelData read_panel_csv(std::istream& in, const std::string& source = "input") {
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return source + ":" + std::to_string(line_no); };
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  require(header.size() >= 3, ErrorKind::ParseError, where() + ": header must start with unit,time,y");
  require(header[0] == "unit" && header[1] == "time" && header[2] == "y", ErrorKind::ParseError,
          where() + ": header must start with unit,time,y");
  const std::size_t d = header.size() - 3;

  struct Row {
    std::string unit, time;
    std::optional<double> y;
    std::vector<double> x;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::vector<std::string> units;
  std::unordered_map<std::string, std::size_t> unit_index;
  std::vector<std::string> times;
  std::unordered_map<std::string, std::size_t> time_seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    require(f.size() == header.size(), ErrorKind::ParseError,
            where() + ": expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    require(!f[0].empty() && !f[1].empty(), ErrorKind::ParseError, where() + ": empty unit or time");
    Row r{f[0], f[1], std::nullopt, {}, line_no};
    if (!f[2].empty()) {
      r.y = parse_number(f[2]);
      require(r.y.has_value() && std::isfinite(*r.y), ErrorKind::ParseError, where() + ": bad outcome '" + f[2] + "'");
    }
    for (std::size_t k = 0; k < d; ++k) {
      const auto v = parse_number(f[3 + k]);
      require(v.has_value() && std::isfinite(*v), ErrorKind::ParseError,
              where() + ": bad value '" + f[3 + k] + "' for " + header[3 + k]);
      r.x.push_back(*v);
    }
    if (!unit_index.count(r.unit)) {
      unit_index[r.unit] = units.size();
      units.push_back(r.unit);
    }
    if (!time_seen.count(r.time)) {
      time_seen[r.time] = times.size();
      times.push_back(r.time);
    }
    rows.push_back(std::move(r));
  }
  require(!rows.empty(), ErrorKind::ParseError, source + ": no data rows");

  PanelData p;
  p.unit_labels = units;
  p.time_labels = order_time_labels(times);
  std::unordered_map<std::string, Index> time_index;
  for (std::size_t k = 0; k < p.time_labels.size(); ++k) time_index[p.time_labels[k]] = static_cast<Index>(k);
  const Index n = static_cast<Index>(units.size()), t = static_cast<Index>(times.size());
  p.y = Matrix::Zero(n, t);
  p.x.assign(d, Matrix::Zero(n, t));
  Matrix mask = Matrix::Zero(n, t);
  std::vector<std::vector<std::size_t>> seen(static_cast<std::size_t>(n), std::vector<std::size_t>(static_cast<std::size_t>(t), 0));
  for (const Row& r : rows) {
    const auto i = static_cast<Index>(unit_index[r.unit]);
    const Index s = time_index[r.time];
    auto& slot = seen[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
    require(slot == 0, ErrorKind::DuplicateCell,
            "duplicate cell (" + r.unit + ", " + r.time + ") at lines " + std::to_string(slot) + " and " + std::to_string(r.line));
    slot = r.line;
    if (r.y) {
      p.y(i, s) = *r.y;
      mask(i, s) = 1.0;
    }
    for (std::size_t k = 0; k < d; ++k) p.x[k](i, s) = r.x[k];
  }
  std::vector<std::string> missing;
  for (Index i = 0; i < n; ++i)
    for (Index s = 0; s < t; ++s)
      if (seen[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] == 0)
        missing.push_back("(" + units[static_cast<std::size_t>(i)] + ", " + p.time_labels[static_cast<std::size_t>(s)] + ")");
  if (!missing.empty()) {
    std::string msg = "unbalanced panel; missing " + std::to_string(missing.size()) + " cell(s):";
    for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 20); ++k) msg += " " + missing[k];
    if (missing.size() > 20) msg += " ...";
    fail(ErrorKind::UnbalancedPanel, msg);
  }
  p.mask = std::move(mask);
  p.validate();
  return p;
}

inline PanelData load_panel_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::ParseError, "cannot open '" + path + "'");
  return read_panel_csv(in, path);
}

inline void write_panel_csv(std::ostream& out, const PanelData& p) {
  PanelData q = p;
  q.fill_default_labels();
  out << "unit,time,y";
  for (Index r = 0; r < q.d(); ++r) out << ",x" << (r + 1);
  out << "\n";
  for (Index i = 0; i < q.n(); ++i) {
    for (Index s = 0; s < q.t(); ++s) {
      out << q.unit_labels[static_cast<std::size_t>(i)] << "," << q.time_labels[static_cast<std::size_t>(s)] << ",";
      if (!q.mask || (*q.mask)(i, s) != 0.0) out << format_double(q.y(i, s));
      for (const auto& xr : q.x) out << "," << format_double(xr(i, s));
      out << "\n";
    }
  }
}

inline void save_panel_csv(const std::string& path, const PanelData& p) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::InvalidInput, "cannot write '" + path + "'");
  write_panel_csv(out, p);
}

// ----------------------------------------------------------------- JSON

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

/// Row-major nested arrays; non-finite entries become null.
inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index s = 0; s < m.cols(); ++s) row.push_back(number_or_null(m(i, s)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j) {
  require(j.is_array(), ErrorKind::ParseError, "matrix must be an array of rows");
  const Index n = static_cast<Index>(j.size());
  const Index t = n > 0 ? static_cast<Index>(j.front().size()) : 0;
  Matrix m(n, t);
  for (Index i = 0; i < n; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    require(row.is_array() && static_cast<Index>(row.size()) == t, ErrorKind::ParseError, "ragged matrix rows");
    for (Index s = 0; s < t; ++s) m(i, s) = number_from(row[static_cast<std::size_t>(s)]);
  }
  return m;
}

inline json tuning_to_json(const tuning::TuningResult& t) {
  json nu = json::array();
  for (double v : t.nu) nu.push_back(v);
  return {{"nu0", number_or_null(t.nu0)}, {"nu", nu},
          {"sigma_u_sq", t.sigma_u_sq},   {"c1", t.c1},
          {"delta", t.delta},             {"n_sims", t.n_sims},
          {"iterations", t.iterations},   {"converged", t.converged},
          {"sigma_path", t.sigma_path}};
}

inline tuning::TuningResult tuning_from_json(const json& j) {
  tuning::TuningResult t;
  t.nu0 = j.contains("nu0") ? number_from(j["nu0"]) : std::numeric_limits<double>::infinity();
  if (std::isnan(t.nu0)) t.nu0 = std::numeric_limits<double>::infinity();
  t.nu = j.at("nu").get<std::vector<double>>();
  t.sigma_u_sq = j.value("sigma_u_sq", 0.0);
  t.c1 = j.value("c1", 0.1);
  t.delta = j.value("delta", 0.05);
  t.n_sims = j.value("n_sims", 200);
  t.iterations = j.value("iterations", 0);
  t.converged = j.value("converged", false);
  t.sigma_path = j.value("sigma_path", std::vector<double>{});
  return t;
}

/// What a report needs from an inference run; round-trips through JSON.
struct EffectTable {
  std::vector<std::string> unit_labels;
  std::vector<std::string> time_labels;
  double level = 0.95;
  std::string mode = "exact";
  std::vector<Matrix> theta_hat;
  std::vector<Matrix> se;
  std::vector<inference::GroupResult> group_results;
  Index m_rank = 0;
  std::vector<Index> ranks;
  std::vector<Index> covariate_factors;
  std::vector<Index> targets;
  tuning::TuningResult tuning;
  std::map<std::string, std::vector<Index>> groups;

  Index n() const { return static_cast<Index>(unit_labels.size()); }
  Index t() const { return static_cast<Index>(time_labels.size()); }

  const inference::GroupResult* group_result(const std::string& g, Index t, std::size_t r) const {
    for (const auto& gr : group_results)
      if (gr.group == g && gr.t == t && gr.r == r) return &gr;
    return nullptr;
  }
};

inline EffectTable make_table(const inference::EffectEstimate& est, const PanelData& panel,
                              const std::vector<inference::GroupSpec>& groups = {}) {
  EffectTable tab;
  PanelData p = panel;
  p.fill_default_labels();
  tab.unit_labels = p.unit_labels;
  tab.time_labels = p.time_labels;
  tab.level = est.level;
  tab.mode = inference::to_string(est.mode);
  tab.theta_hat = est.theta_hat;
  tab.se = est.se;
  tab.group_results = est.group_results;
  tab.m_rank = est.m_rank;
  tab.ranks = est.ranks;
  tab.covariate_factors = est.covariate_factors;
  for (const auto& ts : est.splits)
    if (ts.plan.target_t >= 0) tab.targets.push_back(ts.plan.target_t);
  tab.tuning = est.tuning;
  for (const auto& g : groups) tab.groups[g.id] = g.members;
  return tab;
}

inline json table_to_json(const EffectTable& tab) {
  json effects = json::array();
  for (std::size_t r = 0; r < tab.theta_hat.size(); ++r)
    effects.push_back({{"regressor", r + 1}, {"theta_hat", matrix_to_json(tab.theta_hat[r])}, {"se", matrix_to_json(tab.se[r])}});
  json groups = json::array();
  for (const auto& g : tab.group_results)
    groups.push_back({{"group", g.group},
                      {"time", tab.time_labels[static_cast<std::size_t>(g.t)]},
                      {"t", g.t + 1},
                      {"regressor", g.r + 1},
                      {"estimate", number_or_null(g.estimate)},
                      {"se", number_or_null(g.se)},
                      {"v_lambda", number_or_null(g.v_lambda)},
                      {"v_f", number_or_null(g.v_f)},
                      {"ci", {number_or_null(g.ci.lo), number_or_null(g.ci.hi)}}});
  json members = json::object();
  for (const auto& [id, m] : tab.groups) {
    json ids = json::array();
    for (Index i : m) ids.push_back(tab.unit_labels[static_cast<std::size_t>(i)]);
    members[id] = ids;
  }
  json targets = json::array();
  for (Index t : tab.targets) targets.push_back(t + 1);
  return {{"units", tab.unit_labels},
          {"times", tab.time_labels},
          {"level", tab.level},
          {"mode", tab.mode},
          {"ranks", {{"interactive", tab.m_rank}, {"slopes", tab.ranks}}},
          {"covariate_factors", tab.covariate_factors},
          {"targets", targets},
          {"tuning", tuning_to_json(tab.tuning)},
          {"effects", effects},
          {"group_effects", groups},
          {"groups", members}};
}

inline EffectTable table_from_json(const json& j) {
  try {
    EffectTable tab;
    tab.unit_labels = j.at("units").get<std::vector<std::string>>();
    tab.time_labels = j.at("times").get<std::vector<std::string>>();
    tab.level = j.value("level", 0.95);
    tab.mode = j.value("mode", std::string("exact"));
    tab.m_rank = j.at("ranks").value("interactive", Index{0});
    tab.ranks = j.at("ranks").at("slopes").get<std::vector<Index>>();
    tab.covariate_factors = j.value("covariate_factors", std::vector<Index>{});
    for (const auto& t : j.value("targets", json::array())) tab.targets.push_back(t.get<Index>() - 1);
    if (j.contains("tuning")) tab.tuning = tuning_from_json(j["tuning"]);
    for (const auto& e : j.at("effects")) {
      tab.theta_hat.push_back(matrix_from_json(e.at("theta_hat")));
      tab.se.push_back(matrix_from_json(e.at("se")));
    }
    std::unordered_map<std::string, Index> unit_index;
    for (std::size_t i = 0; i < tab.unit_labels.size(); ++i) unit_index[tab.unit_labels[i]] = static_cast<Index>(i);
    if (j.contains("groups"))
      for (const auto& [id, ids] : j["groups"].items())
        for (const auto& u : ids) tab.groups[id].push_back(unit_index.at(u.get<std::string>()));
    for (const auto& g : j.value("group_effects", json::array())) {
      inference::GroupResult gr;
      gr.group = g.at("group").get<std::string>();
      gr.t = g.at("t").get<Index>() - 1;
      gr.r = g.at("regressor").get<std::size_t>() - 1;
      gr.estimate = number_from(g.at("estimate"));
      gr.se = number_from(g.at("se"));
      gr.v_lambda = number_from(g.value("v_lambda", json(nullptr)));
      gr.v_f = number_from(g.value("v_f", json(nullptr)));
      gr.ci = {number_from(g.at("ci")[0]), number_from(g.at("ci")[1])};
      tab.group_results.push_back(gr);
    }
    return tab;
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("malformed results file: ") + e.what());
  }
}

inline json fit_to_json(const svt::PenalizedFit& fit) {
  json trace = json::array();
  for (double v : fit.objective_trace) trace.push_back(v);
  json thetas = json::array();
  for (const auto& th : fit.theta_hat) thetas.push_back(matrix_to_json(th));
  return {{"nu0", number_or_null(fit.nu0)},  {"nu", fit.nu},
          {"converged", fit.converged},       {"iterations", fit.iterations},
          {"objective", trace.empty() ? json(nullptr) : trace.back()},
          {"objective_trace", trace},         {"m_rank", fit.m_rank},
          {"theta_ranks", fit.theta_ranks},   {"M_hat", fit.includes_m() ? matrix_to_json(fit.M_hat) : json(nullptr)},
          {"theta_hat", thetas}};
}

inline json summary_to_json(const sim::SimSummary& s) {
  const sim::SimConfig& c = s.config;
  json est = json::array();
  for (const auto& e : s.summaries) {
    json draws = json::array();
    for (double z : e.standardized_draws) draws.push_back(number_or_null(z));
    est.push_back({{"estimator", sim::to_string(e.estimator)},
                   {"regressor", e.effect + 1},
                   {"coverage", e.coverage},
                   {"mc_se", e.mc_se},
                   {"mean_std", number_or_null(e.mean_std)},
                   {"sd_std", number_or_null(e.sd_std)},
                   {"bias", e.bias},
                   {"rmse", e.rmse},
                   {"histogram", {{"lo", -sim::kHistogramRange}, {"hi", sim::kHistogramRange}, {"counts", e.histogram}, {"outside", e.outside}}},
                   {"standardized_draws", draws}});
  }
  return {{"design", sim::to_string(c.design)},
          {"N", c.n},
          {"T", c.t},
          {"reps", c.reps},
          {"seed", c.seed},
          {"level", c.level},
          {"rank_policy", c.rank_policy == sim::RankPolicy::oracle ? "oracle" : "estimate"},
          {"known_variance", c.known_variance},
          {"completed", s.completed},
          {"failures", s.failures},
          {"failure_messages", s.failure_messages},
          {"rank_accuracy", s.rank_accuracy},
          {"mean_rmse", s.mean_rmse},
          {"estimators", est}};
}

// -------------------------------------------------------------- reports

struct ReportWindow {
  std::string label;
  Index first = 0;  // inclusive period indices
  Index last = 0;
};

/// "label:from-to" with time labels, or "label:all".
inline ReportWindow parse_window(const std::string& text, const std::vector<std::string>& time_labels) {
  const auto colon = text.find(':');
  require(colon != std::string::npos && colon > 0, ErrorKind::InvalidWindow, "window '" + text + "' must be label:from-to");
  ReportWindow w;
  w.label = text.substr(0, colon);
  const std::string range = text.substr(colon + 1);
  require(!time_labels.empty(), ErrorKind::InvalidWindow, "no periods to window");
  if (range == "all") {
    w.first = 0;
    w.last = static_cast<Index>(time_labels.size()) - 1;
    return w;
  }
  const auto dash = range.find('-', 1);
  require(dash != std::string::npos, ErrorKind::InvalidWindow, "window '" + text + "' must be label:from-to");
  auto find = [&](const std::string& lab) {
    const auto it = std::find(time_labels.begin(), time_labels.end(), lab);
    require(it != time_labels.end(), ErrorKind::InvalidWindow, "unknown period '" + lab + "' in window '" + text + "'");
    return static_cast<Index>(it - time_labels.begin());
  };
  w.first = find(range.substr(0, dash));
  w.last = find(range.substr(dash + 1));
  require(w.first <= w.last, ErrorKind::InvalidWindow, "window '" + text + "' is empty");
  return w;
}

struct ReportRow {
  std::string group;
  std::string window;
  std::size_t regressor = 0;
  double p_plus = 0.0;
  double p_minus = 0.0;
  double theta_g = 0.0;
  double q_plus = 0.0;
  double q_minus = 0.0;
};

/// Per (group, window, regressor): share of periods whose group estimate is
/// significantly positive / negative, the window mean of group estimates, and
/// the same shares over member cells.
inline std::vector<ReportRow> report_effect_summary(const EffectTable& tab, const std::vector<std::string>& groups,
                                                    const std::vector<ReportWindow>& windows, double level) {
  require(level > 0.0 && level < 1.0, ErrorKind::InvalidInput, "level must lie in (0,1)");
  const double z = inference::normal_quantile(0.5 * (1.0 + level));
  std::vector<ReportRow> rows;
  for (const auto& w : windows)
    require(w.first >= 0 && w.last < tab.t() && w.first <= w.last, ErrorKind::InvalidWindow,
            "window '" + w.label + "' is empty or out of range");
  for (const auto& g : groups) {
    const auto git = tab.groups.find(g);
    require(git != tab.groups.end(), ErrorKind::InvalidInput, "unknown group '" + g + "'");
    const auto& members = git->second;
    for (const auto& w : windows) {
      for (std::size_t r = 0; r < tab.theta_hat.size(); ++r) {
        if (tab.ranks[r] == 0) continue;
        ReportRow row;
        row.group = g;
        row.window = w.label;
        row.regressor = r + 1;
        double periods = 0.0, cells = 0.0;
        for (Index t = w.first; t <= w.last; ++t) {
          const inference::GroupResult* gr = tab.group_result(g, t, r);
          require(gr != nullptr, ErrorKind::MissingEstimate,
                  "no group estimate for '" + g + "' at " + tab.time_labels[static_cast<std::size_t>(t)]);
          periods += 1.0;
          row.theta_g += gr->estimate;
          const double ratio = gr->se > 0.0 ? gr->estimate / gr->se : 0.0;
          if (gr->estimate > 0.0 && std::abs(ratio) > z) row.p_plus += 1.0;
          if (gr->estimate < 0.0 && std::abs(ratio) > z) row.p_minus += 1.0;
          for (Index i : members) {
            const double est = tab.theta_hat[r](i, t), se = tab.se[r](i, t);
            require(std::isfinite(est) && std::isfinite(se), ErrorKind::MissingEstimate,
                    "cell (" + tab.unit_labels[static_cast<std::size_t>(i)] + ", " +
                        tab.time_labels[static_cast<std::size_t>(t)] + ") has no standard error");
            cells += 1.0;
            const double cr = se > 0.0 ? est / se : 0.0;
            if (est > 0.0 && std::abs(cr) > z) row.q_plus += 1.0;
            if (est < 0.0 && std::abs(cr) > z) row.q_minus += 1.0;
          }
        }
        row.p_plus /= periods;
        row.p_minus /= periods;
        row.theta_g /= periods;
        row.q_plus /= cells;
        row.q_minus /= cells;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "group,window,regressor,P_plus,P_minus,theta_G,Q_plus,Q_minus\n";
  for (const auto& r : rows)
    out << r.group << "," << r.window << "," << r.regressor << "," << fixed(r.p_plus) << "," << fixed(r.p_minus) << ","
        << fixed(r.theta_g) << "," << fixed(r.q_plus) << "," << fixed(r.q_minus) << "\n";
}

// --------------------------------------------------------------- config

/// `key = value` lines; `#` starts a comment.
inline std::map<std::string, std::string> parse_config(std::istream& in, const std::string& source = "config") {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::ParseError, source + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorKind::ParseError, source + ":" + std::to_string(line_no) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::ParseError, "cannot open config '" + path + "'");
  return parse_config(in, path);
}

/// Comma-separated integers.
inline std::vector<Index> parse_index_list(const std::string& s) {
  std::vector<Index> out;
  if (trim(s).empty()) return out;
  for (const auto& f : split_fields(s)) {
    const auto v = parse_number(f);
    require(v && std::floor(*v) == *v, ErrorKind::ParseError, "expected an integer, found '" + f + "'");
    out.push_back(static_cast<Index>(*v));
  }
  return out;
}

}  // namespace hetslope::io

#endif  // HETSLOPE_IO_HPP
