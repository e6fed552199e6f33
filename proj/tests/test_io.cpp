#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "hetslope/io.hpp"
#include "hetslope/simulation.hpp"

using namespace hetslope;

namespace {

PanelData read(const std::string& text) {
  std::istringstream in(text);
  return io::read_panel_csv(in, "test");
}

ErrorKind kind_of(const std::string& text) {
  try {
    read(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::DescentViolation;  // sentinel: nothing thrown
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Hand-built results: two periods, three units, one regressor.
io::EffectTable small_table() {
  io::EffectTable tab;
  tab.unit_labels = {"a", "b", "c"};
  tab.time_labels = {"2001", "2002"};
  tab.theta_hat = {Matrix(3, 2)};
  tab.theta_hat[0] << 5.0, -1.0, 5.0, 0.1, 5.0, -4.0;
  tab.se = {Matrix::Ones(3, 2)};
  tab.ranks = {1};
  tab.m_rank = 1;
  tab.targets = {0, 1};
  tab.groups["all"] = {0, 1, 2};
  for (Index t = 0; t < 2; ++t) {
    inference::GroupResult g;
    g.group = "all";
    g.t = t;
    g.estimate = tab.theta_hat[0].col(t).mean();
    g.se = 0.5;
    g.ci = inference::confidence_interval(g.estimate, g.se);
    tab.group_results.push_back(g);
  }
  return tab;
}

}  // namespace

TEST(ReadPanel, CompleteTwoByTwo) {
  const PanelData p = read("unit,time,y,x1\nA,1,1.5,2\nA,2,2.5,3\nB,1,3.5,4\nB,2,4.5,5\n");
  EXPECT_EQ(p.n(), 2);
  EXPECT_EQ(p.t(), 2);
  EXPECT_EQ(p.d(), 1);
  EXPECT_EQ(p.y(1, 0), 3.5);
  EXPECT_EQ(p.x[0](0, 1), 3.0);
  ASSERT_TRUE(p.mask.has_value());
  EXPECT_TRUE((p.mask->array() == 1.0).all());
}

TEST(ReadPanel, BlankOutcomeIsMissing) {
  const PanelData p = read("unit,time,y,x1\nA,1,,2\nA,2,2.5,3\nB,1,3.5,4\nB,2,4.5,5\n");
  ASSERT_TRUE(p.mask.has_value());
  EXPECT_EQ(p.mask->sum(), 3.0);
  EXPECT_EQ((*p.mask)(0, 0), 0.0);
  EXPECT_EQ(p.y(0, 0), 0.0);
}

TEST(ReadPanel, TimeLabelsOrdered) {
  const PanelData p = read("unit,time,y\nA,10,1\nA,9,2\nA,100,3\n");
  EXPECT_EQ(p.time_labels, (std::vector<std::string>{"9", "10", "100"}));
  EXPECT_EQ(p.y(0, 0), 2.0);
  const PanelData q = read("unit,time,y\nA,q2,1\nA,q1,2\n");
  EXPECT_EQ(q.time_labels, (std::vector<std::string>{"q1", "q2"}));
}

TEST(ReadPanel, ErrorKinds) {
  EXPECT_EQ(kind_of("unit,time,y,x1\nA,1,1,2\nA,2,1,2\nB,1,1,2\n"), ErrorKind::UnbalancedPanel);
  EXPECT_EQ(kind_of("unit,time,y\nA,1,1\nA,1,2\n"), ErrorKind::DuplicateCell);
  EXPECT_EQ(kind_of("unit,time,y\nA,1,abc\n"), ErrorKind::ParseError);
  EXPECT_EQ(kind_of("unit,time,y,x1\nA,1,1\n"), ErrorKind::ParseError);
  EXPECT_EQ(kind_of("id,period,y\nA,1,1\n"), ErrorKind::ParseError);
  EXPECT_EQ(kind_of("unit,time,y,x1\nA,1,1,\n"), ErrorKind::ParseError);
  try {
    read("unit,time,y\nA,1,1\nA,2,x\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("test:3"), std::string::npos);
  }
}

TEST(ReadPanel, CsvRoundTrip) {
  PanelData p = sim::gen_static(20, 25, 3).panel;
  p.mask = Matrix::Ones(20, 25);
  (*p.mask)(3, 4) = 0.0;
  p.y(3, 4) = 0.0;
  std::stringstream buf;
  io::write_panel_csv(buf, p);
  const PanelData q = io::read_panel_csv(buf);
  EXPECT_EQ(q.unit_labels, p.unit_labels);
  EXPECT_EQ(q.time_labels, p.time_labels);
  EXPECT_TRUE((q.y.array() == p.y.array()).all());
  for (std::size_t r = 0; r < 2; ++r) EXPECT_TRUE((q.x[r].array() == p.x[r].array()).all());
  EXPECT_TRUE((q.mask->array() == p.mask->array()).all());
}

TEST(Numbers, FormatAndParse) {
  for (double v : {0.1, -2.5e-300, 1.0 / 3.0, 6.02214076e23, 0.0}) EXPECT_EQ(*io::parse_number(io::format_double(v)), v);
  EXPECT_FALSE(io::parse_number("1.5x").has_value());
  EXPECT_FALSE(io::parse_number("").has_value());
  EXPECT_EQ(io::trim("  a b \r\n"), "a b");
  EXPECT_EQ(io::parse_index_list("1, 2,3"), (std::vector<Index>{1, 2, 3}));
  EXPECT_THROW(io::parse_index_list("1,2.5"), Error);
}

TEST(Json, MatricesKeepMissingValues) {
  Matrix m(2, 2);
  m << 1.0, std::numeric_limits<double>::quiet_NaN(), -3.25, 1e-300;
  const Matrix back = io::matrix_from_json(io::matrix_to_json(m));
  EXPECT_TRUE(std::isnan(back(0, 1)));
  EXPECT_EQ(back(1, 1), 1e-300);
  EXPECT_EQ(back(1, 0), -3.25);
}

TEST(Json, TableRoundTrip) {
  const io::EffectTable tab = small_table();
  const io::EffectTable back = io::table_from_json(nlohmann::json::parse(io::table_to_json(tab).dump()));
  EXPECT_EQ(back.unit_labels, tab.unit_labels);
  EXPECT_TRUE((back.theta_hat[0].array() == tab.theta_hat[0].array()).all());
  ASSERT_EQ(back.group_results.size(), 2u);
  EXPECT_EQ(back.group_results[1].estimate, tab.group_results[1].estimate);
  EXPECT_EQ(back.groups.at("all"), tab.groups.at("all"));
  EXPECT_THROW(io::table_from_json(nlohmann::json::parse("{\"units\": 3}")), Error);
}

TEST(Report, MixedAndConstantEstimates) {
  io::EffectTable tab = small_table();
  const std::vector<io::ReportWindow> all{io::parse_window("all:all", tab.time_labels)};
  auto rows = io::report_effect_summary(tab, {"all"}, all, 0.95);
  ASSERT_EQ(rows.size(), 1u);
  // Cells: (5,5,5) then (-1,0.1,-4) with unit SEs.
  EXPECT_DOUBLE_EQ(rows[0].q_plus, 3.0 / 6.0);
  EXPECT_DOUBLE_EQ(rows[0].q_minus, 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(rows[0].p_plus, 0.5);
  EXPECT_DOUBLE_EQ(rows[0].p_minus, 0.5);
  EXPECT_NEAR(rows[0].theta_g, (5.0 + (-1.0 + 0.1 - 4.0) / 3.0) / 2.0, 1e-12);

  tab.theta_hat[0].setZero();
  for (auto& g : tab.group_results) g.estimate = 0.0;
  rows = io::report_effect_summary(tab, {"all"}, all, 0.95);
  EXPECT_EQ(rows[0].p_plus + rows[0].p_minus + rows[0].q_plus + rows[0].q_minus + rows[0].theta_g, 0.0);

  tab.theta_hat[0].setConstant(5.0);
  for (auto& g : tab.group_results) {
    g.estimate = 5.0;
    g.se = 1.0;
  }
  rows = io::report_effect_summary(tab, {"all"}, all, 0.95);
  EXPECT_EQ(rows[0].p_plus, 1.0);
  EXPECT_EQ(rows[0].q_plus, 1.0);
  EXPECT_EQ(rows[0].p_minus, 0.0);
  EXPECT_EQ(rows[0].q_minus, 0.0);
}

TEST(Report, WindowsAndErrors) {
  const io::EffectTable tab = small_table();
  const auto w = io::parse_window("late:2002-2002", tab.time_labels);
  EXPECT_EQ(w.first, 1);
  EXPECT_EQ(w.last, 1);
  for (const std::string bad : {"late", "x:2002-2001", "x:1999-2002", "x:2001"}) {
    try {
      io::parse_window(bad, tab.time_labels);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidWindow);
    }
  }
  io::EffectTable partial = tab;
  partial.group_results.pop_back();
  try {
    io::report_effect_summary(partial, {"all"}, {io::parse_window("w:all", tab.time_labels)}, 0.95);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingEstimate);
  }
}

TEST(Report, PureFunctionOfSavedResults) {
  const io::EffectTable tab = small_table();
  const auto windows = std::vector<io::ReportWindow>{io::parse_window("w:all", tab.time_labels)};
  std::ostringstream a, b;
  io::write_report_csv(a, io::report_effect_summary(tab, {"all"}, windows, 0.95));
  const io::EffectTable back = io::table_from_json(io::table_to_json(tab));
  io::write_report_csv(b, io::report_effect_summary(back, {"all"}, windows, 0.95));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "group,window,regressor,P_plus,P_minus,theta_G,Q_plus,Q_minus");
}

TEST(Config, KeyValueLines) {
  std::istringstream in("# comment\nseed = 7\n\n targets=1,2 # trailing\n");
  const auto cfg = io::parse_config(in);
  EXPECT_EQ(cfg.at("seed"), "7");
  EXPECT_EQ(cfg.at("targets"), "1,2");
  std::istringstream bad("seed 7\n");
  EXPECT_THROW(io::parse_config(bad), Error);
}

#ifdef HETSLOPE_CLI_PATH

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HETSLOPE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("infer"), 2);
  EXPECT_EQ(run_cli("tune --bogus 1"), 2);
  EXPECT_EQ(run_cli("tune --data /nonexistent/panel.csv"), 1);
}

TEST(Cli, TuneInferReport) {
  const auto dir = std::filesystem::temp_directory_path() / "hetslope_cli_test";
  std::filesystem::create_directories(dir);
  io::save_panel_csv((dir / "panel.csv").string(), sim::gen_static(30, 30, 4).panel);
  const std::string data = " --data " + (dir / "panel.csv").string();
  ASSERT_EQ(run_cli("tune" + data + " --sigma2 1 --n-sims 20 --out " + (dir / "tune.json").string()), 0);
  const auto tune = nlohmann::json::parse(slurp(dir / "tune.json"));
  EXPECT_GT(tune.at("nu").at(0).get<double>(), 0.0);

  {
    std::ofstream cfg(dir / "infer.cfg");
    cfg << "sigma2 = 1\nn-sims = 20\nranks = 1,1\nm-rank = 1\nfactors = 1,1\ngroups = all\n";
  }
  ASSERT_EQ(run_cli("infer --config " + (dir / "infer.cfg").string() + data + " --targets 1,2 --out " +
                    (dir / "res.json").string()),
            0);
  const auto res = nlohmann::json::parse(slurp(dir / "res.json"));
  ASSERT_EQ(res.at("group_effects").size(), 4u);
  const auto& g = res.at("group_effects").at(0);
  EXPECT_LT(g.at("ci").at(0).get<double>(), g.at("estimate").get<double>());

  const std::string report = "report --results " + (dir / "res.json").string() + " --groups all --windows w:1-2 --out ";
  ASSERT_EQ(run_cli(report + (dir / "r1.csv").string()), 0);
  ASSERT_EQ(run_cli(report + (dir / "r2.csv").string()), 0);
  EXPECT_EQ(slurp(dir / "r1.csv"), slurp(dir / "r2.csv"));
  EXPECT_EQ(run_cli("report --results " + (dir / "res.json").string() + " --windows w:5-9"), 1);
  std::filesystem::remove_all(dir);
}

#endif
