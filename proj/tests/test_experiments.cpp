#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fml/experiments.hpp"

using namespace fml;

namespace {

std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_system() {
  return json::parse(R"({"sites": 4, "periodic": false, "model": "random", "random": {"degree": 1}})");
}

ScenarioConfig config(const std::string& text) { return parse_config_text(text); }

}  // namespace

TEST(Config, ShippedConfigsParse) {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(std::string(FML_SOURCE_DIR) + "/configs")) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 8);
}

TEST(Config, UnknownKeysAreErrors) {
  EXPECT_THROW(config(R"({"scenario": "fig2", "colour": 1})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "system": {"sites": 4, "spin": 1}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "params": {"instances": 3}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "system": {"driving": [{"sites": [0], "letters": "Z", "amp": 1}]}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "tolerances": {"atol": 1e-9}})"), ConfigError);
}

TEST(Config, ValuesAreChecked) {
  EXPECT_THROW(config(R"({"scenario": "fig3"})"), ConfigError);
  EXPECT_THROW(config(R"({"seed": 1})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "periods": [0.2, -1]})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "orders": {"max": 41}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "system": {"sites": 13}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "system": {"sites": 4, "static": [{"sites": [0, 7], "letters": "XX"}]}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "system": {"sites": 4, "static": [{"sites": [0], "letters": "Q"}]}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "system": {"static": [{"sites": [0], "letters": "Z", "poly": [1, 2]}]}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "absorption", "params": {"order": "zero"}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "absorption", "params": {"period_rule": "fast"}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "prethermalization", "system": {"sites": 4}, "params": {"initial_state": "012"}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "dynamical_localization", "params": {"omega_factors": [2, 4]}})"), ConfigError);
  EXPECT_THROW(config(R"({"scenario": "fig2", "periods_m": [3, 1]})"), ConfigError);
  EXPECT_THROW(config("{not json"), ConfigError);
}

TEST(Config, DefaultsAreResolved) {
  const auto c = config(R"({"scenario": "fig2"})");
  EXPECT_EQ(c.n_max, 25);
  EXPECT_EQ(c.periods, (std::vector<double>{0.2, 0.3, 0.4, 0.5}));
  EXPECT_EQ(c.resolved["orders"]["max"], 25);
  const auto a = config(R"({"scenario": "absorption"})");
  EXPECT_EQ(a.periods_m, (std::vector<long>{1, 10, 100}));
  EXPECT_EQ(a.params["de_points"], 8);
  // resolved config parses back to itself
  EXPECT_EQ(parse_config(a.resolved).resolved, a.resolved);
}

TEST(Config, PaperRingMatchesBuilder) {
  const auto c = config(R"({"scenario": "fig2", "system": {"sites": 6, "model": "paper_ring"}})");
  const auto a = build_system(c.system, 0.3, 1);
  const auto b = anisotropic_heisenberg_ring(6, 0.3);
  EXPECT_LT(a.h0().distance(b.h0()), 1e-15);
  for (double t : {0.05, 0.17, 0.3}) EXPECT_LT(a.driving_at(t).distance(b.driving_at(t)), 1e-15);
}

TEST(Config, ScaledTimeUsesFractionOfPeriod) {
  const auto c = config(R"({"scenario": "fig2", "system": {"sites": 2, "model": "custom", "time": "scaled",
      "driving": [{"sites": "each", "letters": "Z", "poly": [1.0, -2.0, 3.0]}]}})");
  for (double T : {0.1, 2.0}) {
    const auto s = build_system(c.system, T, 1);
    for (double u : {0.25, 0.5, 1.0}) {
      const double want = 1.0 - 2.0 * u + 3.0 * u * u;
      EXPECT_NEAR(s.driving_at(u * T).coefficient(PauliKey{0, 1}).real(), want, 1e-12);
    }
  }
}

TEST(Experiments, InstanceSeedsAreStable) {
  EXPECT_EQ(instance_seed(5, 3), instance_seed(5, 3));
  EXPECT_NE(instance_seed(5, 3), instance_seed(5, 4));
  EXPECT_NE(instance_seed(5, 3), instance_seed(6, 3));
}

TEST(Experiments, ParallelForRethrows) {
  std::vector<int> hit(20, 0);
  parallel_for(20, 4, [&](int i) { hit[static_cast<std::size_t>(i)] = 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](int i) { if (i == 7) throw DomainError("x"); }), DomainError);
}

TEST(Experiments, InstanceWithN0HitsTarget) {
  const auto c = config(R"({"scenario": "theorem1_sweep", "system": {"sites": 4, "model": "random"}})");
  for (int n0 : {1, 2, 3}) {
    const auto s = instance_with_n0(c.system, 9, n0);
    EXPECT_EQ(optimal_order_n0(locality_metrics(s), s.period()), n0);
  }
}

TEST(Experiments, CsvIsIdenticalAcrossThreadCounts) {
  json j = {{"scenario", "theorem1_sweep"}, {"seed", 5}, {"system", small_system()}, {"periods_m", {{"max", 5}}},
            {"params", {{"instances", 6}}}};
  const auto c = parse_config(j);
  const auto a = run_scenario(c, {1});
  const auto b = run_scenario(c, {3});
  EXPECT_EQ(a.csv(), b.csv());
  EXPECT_EQ(a.violations, 0);
  EXPECT_EQ(a.rows.size(), 30u);
  EXPECT_EQ(a.csv().rfind("# schema fml.theorem1_sweep.v1\n", 0), 0u);
}

TEST(Experiments, Fig2ErrorAgreesWithTheorem1) {
  const auto c = config(R"({"scenario": "fig2", "system": {"sites": 4, "model": "paper_ring"}, "orders": {"max": 4}})");
  const auto sys = system_with_period(c.system, 1, 0.01, [](const LocalityMetrics& m) { return 1.0 / (16.0 * m.lambda * 2.6); });
  auto c2 = c;
  c2.periods = {sys.period()};
  const auto r = run_fig2(c2);
  const int n0 = optimal_order_n0(locality_metrics(sys), sys.period());
  ASSERT_EQ(n0, 2);
  const auto b = check_theorem1(sys, exact_floquet(sys), omega_series(sys, 4), 1);
  const auto& row = r.rows[static_cast<std::size_t>(n0)];
  EXPECT_EQ(row[1], "2");
  EXPECT_NEAR(std::stod(row[4]), b[0].lhs, 1e-12);
  EXPECT_TRUE(b[0].pass());
}

TEST(Experiments, Fig2ShapeOnSmallRing) {
  const auto c = config(R"({"scenario": "fig2", "system": {"sites": 4, "model": "paper_ring"}, "periods": [0.1, 0.5], "orders": {"max": 10}})");
  const auto r = run_fig2(c);
  ASSERT_EQ(r.rows.size(), 22u);
  const auto& per = r.summary["periods"];
  EXPECT_LT(per[0]["min_error"].get<double>(), per[1]["min_error"].get<double>());
  EXPECT_LE(per[1]["argmin_error"].get<int>(), per[0]["argmin_error"].get<int>());
}

TEST(Experiments, AbsorptionTrivialCases) {
  json j = {{"scenario", "absorption"},
            {"system", json::parse(R"({"sites": 4, "periodic": false, "model": "heisenberg", "couplings": [1, 1, 0.5],
                "static": [{"sites": "each", "letters": "X", "poly": [0.4]}],
                "driving": [{"sites": "each", "letters": "Z", "poly": [-0.1, 0.2]}], "time": "scaled"})")},
            {"periods_m", {0, 5}}};
  const auto r = run_absorption(parse_config(j));
  EXPECT_EQ(r.violations, 0);
  for (const auto& row : r.rows) {
    if (row[1] != "point") continue;
    const double p = std::stod(row[4]);
    if (row[2] == "0") EXPECT_LT(p, 1e-24);          // m = 0
    if (row[0] == "undriven") EXPECT_LT(p, 1e-20);  // energy conserved
  }
}

TEST(Experiments, PrethermalizationIdentityObservable) {
  json j = {{"scenario", "prethermalization"},
            {"system", json::parse(R"({"sites": 4, "model": "heisenberg", "driving": [{"sites": "each", "letters": "Z", "poly": [0, 1]}]})")},
            {"periods_m", {{"min", 0}, {"max", 5}}},
            {"params", {{"observable", json::array({{{"sites", json::array()}, {"letters", ""}, {"poly", {1.0}}}})}, {"initial_state", "0101"}}}};
  const auto r = run_prethermalization(parse_config(j));
  for (const auto& row : r.rows)
    for (std::size_t k = 1; k < 4; ++k) EXPECT_NEAR(std::stod(row[k]), 1.0, 1e-12);
}

TEST(Experiments, UndrivenDynamicsIsFlat) {
  json sys = json::parse(R"({"sites": 4, "model": "heisenberg"})");
  const auto d = run_dynamical_localization(parse_config({{"scenario", "dynamical_localization"}, {"system", sys},
                                                          {"periods_m", {{"min", 0}, {"max", 10}}}}));
  for (const auto& row : d.rows) EXPECT_LT(std::abs(std::stod(row[6])), 1e-10);
  // Z_0 Z_1 commutes with a pure-ZZ H0
  json zz = json::parse(R"({"sites": 4, "model": "heisenberg", "couplings": [0, 0, 1]})");
  const auto p = run_prethermalization(parse_config({{"scenario", "prethermalization"}, {"system", zz},
                                                     {"periods_m", {{"min", 0}, {"max", 10}}}, {"params", {{"initial_state", "0110"}}}}));
  for (const auto& row : p.rows) EXPECT_NEAR(std::stod(row[1]), std::stod(p.rows[0][1]), 1e-12);
}

TEST(Experiments, IntegrabilityBreakingCrossings) {
  json j = {{"scenario", "integrability_breaking"},
            {"system", json::parse(R"({"sites": 6, "periodic": false, "model": "heisenberg", "couplings": [1, 1, 0],
                "driving": [{"sites": "each", "letters": "Z", "poly": [-0.5, 1.0]}], "time": "scaled"})")},
            {"periods_m", {{"min", 0}, {"max", 200}}},
            {"params", {{"epsilons", {0.0, 0.05, 0.1, 1.0}}, {"initial_state", "010101"}}}};
  const auto r = run_integrability_breaking(parse_config(j));
  const auto& cr = r.summary["crossings"];
  EXPECT_EQ(cr[0]["crossing_m"], -1);
  EXPECT_TRUE(r.summary["shortens_with_epsilon"].get<bool>());
  EXPECT_LE(cr[3]["crossing_m"].get<long>(), 5);
}

TEST(Experiments, LemmaSuiteSmall) {
  json j = {{"scenario", "lemma_suite"}, {"seed", 3}, {"params", {{"instances", 6}, {"max_sites", 5}, {"inject_violating", true}}}};
  auto c = parse_config(j);
  c.params["instances"] = 10;
  const auto r = run_lemma_suite(c);
  EXPECT_EQ(r.violations, 0);
  EXPECT_GT(r.not_applicable, 0);  // instance 9 has T = 2/lambda
  EXPECT_GT(r.passed, 100);
}

TEST(Render, SvgComesFromCsvOnly) {
  json j = {{"scenario", "theorem1_sweep"}, {"seed", 2}, {"system", small_system()}, {"periods_m", {{"max", 4}}},
            {"params", {{"instances", 3}}}};
  const auto c = parse_config(j);
  const auto r = run_scenario(c);
  const auto root = std::filesystem::temp_directory_path() / "fml_render_test";
  std::filesystem::remove_all(root);
  const auto dir = write_outputs(r, c, root, 1);
  const std::string csv = read(dir / "data.csv");
  EXPECT_EQ(csv, r.csv());
  for (const auto& p : parse_csv(csv).plots) {
    const auto path = dir / ("plot_" + p.name + ".svg");
    ASSERT_TRUE(std::filesystem::exists(path));
    EXPECT_EQ(read(path), render_svg(csv, p.name));
  }
  const auto meta = json::parse(read(dir / "meta.json"));
  EXPECT_EQ(meta["config"], c.resolved);
  EXPECT_EQ(meta["seed"], 2);
  std::filesystem::remove_all(root);
}

TEST(Render, CsvParsing) {
  const std::string text =
      "# schema fml.x.v1\n# plot name=a;title=t;x=n;y=v|w;series=s;logy=1\nn,v,w,s\n0,1,2,p\n1,0.5,,p\n2,nan,3,q\n";
  const auto t = parse_csv(text);
  EXPECT_EQ(t.schema, "fml.x.v1");
  ASSERT_EQ(t.plots.size(), 1u);
  EXPECT_TRUE(t.plots[0].logy);
  EXPECT_EQ(t.rows.size(), 3u);
  const auto svg = render_svg(text);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_NE(svg.find("v, s=p"), std::string::npos);
  EXPECT_THROW(render_svg(text, "missing"), ConfigError);
  EXPECT_THROW(parse_csv("# schema x\n"), ConfigError);
}
