#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "fml/experiments.hpp"

using namespace fml;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int threads() {
  if (const char* env = std::getenv("FML_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string cfg(const std::string& name) { return std::string(FML_SOURCE_DIR) + "/configs/" + name; }

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

Outcome ac1() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    RandomSystemOptions ro;
    ro.n_sites = 4;
    ro.degree = 1;
    const auto s = random_system(1000 + seed, 0.2 + 0.05 * static_cast<double>(seed % 7), ro);
    MagnusOptions po;
    po.backend = MagnusBackend::Pauli;
    const auto series = omega_series(s, 2, po);
    for (int n = 0; n <= 2; ++n) worst = std::max(worst, spectral_norm(series.omega_full(n) - to_dense(omega_direct(s, n), 4)));
  }
  // H = A + t B
  double toy = 0.0;
  for (double T : {0.1, 0.5, 1.3}) {
    DrivenSystem s(2, T);
    const PauliString a1({0}, "X", 1.0), a2({0, 1}, "ZZ", 0.5), b1({0}, "Z", 1.0), b2({1}, "Y", -0.7);
    PauliOperator a(2), b(2);
    a.add(a1);
    a.add(a2);
    b.add(b1);
    b.add(b2);
    s.add_static(a1);
    s.add_static(a2);
    s.add_driving(b1, Profile::polynomial({0.0, 1.0}));
    s.add_driving(b2, Profile::polynomial({0.0, 1.0}));
    PauliOperator o1(2);
    add_commutator(o1, a, b, cplx(0, T / 12));
    toy = std::max(toy, spectral_norm(omega_series(s, 1).omega_full(1) - to_dense(o1, 2)));
  }
  return {worst <= 1e-12 && toy <= 1e-12, "max series-direct " + fmt(worst) + ", toy " + fmt(toy)};
}

Outcome ac2() {
  const int count = 100;
  std::vector<int> fails(count), applicable(count);
  std::vector<double> worst(count, -1e300);
  parallel_for(count, threads(), [&](int i) {
    RandomSystemOptions ro;
    ro.n_sites = 6;
    ro.degree = 1 + i % 3;
    const auto s = random_system(instance_seed(77, static_cast<std::uint64_t>(i)), 0.1, ro);
    const auto m = locality_metrics(s);
    for (const auto& b : check_lemma1(omega_series(s, 12), m, 12)) {
      fails[static_cast<std::size_t>(i)] += b.violated();
      applicable[static_cast<std::size_t>(i)] += b.status != BoundStatus::NotApplicable;
      worst[static_cast<std::size_t>(i)] = std::max(worst[static_cast<std::size_t>(i)], b.lhs / b.rhs);
    }
  });
  int f = 0, a = 0;
  double w = 0.0;
  for (int i = 0; i < count; ++i) {
    f += fails[static_cast<std::size_t>(i)];
    a += applicable[static_cast<std::size_t>(i)];
    w = std::max(w, worst[static_cast<std::size_t>(i)]);
  }
  return {f == 0 && a == 12 * count, std::to_string(a) + " checks, " + std::to_string(f) + " violations, max lhs/rhs " + fmt(w)};
}

Outcome ac3() {
  auto c = load_config(cfg("theorem1_sweep.json"));
  const int per = 10;
  std::vector<std::array<int, 3>> tally(3 * per);
  parallel_for(3 * per, threads(), [&](int i) {
    const int n0 = 1 + i % 3;
    const auto s = instance_with_n0(c.system, instance_seed(91, static_cast<std::uint64_t>(i)), n0);
    const auto m = locality_metrics(s);
    auto& t = tally[static_cast<std::size_t>(i)];
    for (const auto& b : check_theorem1(s, exact_floquet(s), omega_series(s, n0 + 1), 50, m)) {
      if (b.param("n0") != n0) continue;
      ++t[b.status == BoundStatus::Pass ? 0 : b.status == BoundStatus::Fail ? 1 : 2];
    }
  });
  int p = 0, f = 0, na = 0;
  for (const auto& t : tally) p += t[0], f += t[1], na += t[2];
  return {f == 0 && na == 0 && p == 3 * per * 50,
          std::to_string(p) + " pass, " + std::to_string(f) + " fail, " + std::to_string(na) + " not applicable"};
}

Outcome ac4(const std::string& part) {
  auto c = load_config(cfg("lemma_suite.json"));
  const bool printed = part == "lemma6-printed";
  c.params["lemma6_constant"] = printed ? "printed" : "corrected";
  c.params["inject_violating"] = false;
  const auto r = run_lemma_suite(c, {threads()});
  const auto& by = r.summary["by_bound"];
  std::vector<std::string> names =
      printed ? std::vector<std::string>{"lemma6"}
              : std::vector<std::string>{"corollary1", "lemma2", "lemma3", "lemma4", "lemma5", "lemma6_corrected"};
  bool ok = true;
  std::string d;
  for (const auto& n : names) {
    const int p = by.contains(n) ? by[n]["pass"].get<int>() : 0;
    const int f = by.contains(n) ? by[n]["fail"].get<int>() : 0;
    ok = ok && f == 0 && p >= 100;
    d += n + " " + std::to_string(p) + "/" + std::to_string(f) + " ";
  }
  return {ok, d + "(pass/fail)"};
}

Outcome ac5() {
  const auto s = anisotropic_heisenberg_ring(8, 0.2);
  const auto r = interaction_unitaries(s);
  const int n0 = std::max(1, optimal_order_n0(locality_metrics(s), s.period()));
  const auto t = truncated_unitaries(s, n0);
  return {r.reconstruction_error <= 1e-9 && t.telescoping_error <= 1e-11,
          "reconstruction " + fmt(r.reconstruction_error) + ", telescoping " + fmt(t.telescoping_error) + " at n0=" + std::to_string(n0)};
}

Outcome ac6() {
  auto c = load_config(cfg("fig2.json"));
  c.periods = {0.2, 0.5};
  c.n_max = 25;
  const auto r = run_fig2(c, {threads()});
  std::vector<double> w;
  for (const auto& row : r.rows)
    if (std::stod(row[0]) == 0.5) w.push_back(std::stod(row[2]));
  if (w.size() != 26) return {false, "missing rows"};
  const auto it = std::min_element(w.begin() + 1, w.end());
  const long k = it - w.begin();
  const bool interior = k > 0 && k < 25 && w[static_cast<std::size_t>(k - 1)] > *it;
  const double growth = std::log10(w[25] / *it);
  const auto& p = r.summary["periods"];
  const int a02 = p[0]["argmin_error"], a05 = p[1]["argmin_error"];
  const double e02 = p[0]["min_error"], e05 = p[1]["min_error"];
  const bool ok = interior && growth >= 3.0 && a05 <= a02 && e02 < e05;
  return {ok, "min norm at n=" + std::to_string(k) + ", growth " + fmt(growth) + " decades; argmin error " + std::to_string(a05) +
                  " <= " + std::to_string(a02) + "; min error " + fmt(e02) + " < " + fmt(e05)};
}

Outcome ac7() {
  const auto c = load_config(cfg("absorption.json"));
  const auto r = run_absorption(c, {threads()});
  const double T = r.summary["T"], tau = r.summary["tau"];
  int fits = 0, steep = 0;
  for (const auto& f : r.summary["fits"])
    if (f["arm"] == "driven" && !f["slope"].is_null()) {
      ++fits;
      steep += f["slope"].get<double>() <= -1.8 * tau;
    }
  const bool ok = T <= tau && r.violations == 0 && r.passed > 0 && steep == fits;
  return {ok, std::to_string(r.passed) + " pass, " + std::to_string(r.violations) + " fail; " + std::to_string(steep) + "/" +
                  std::to_string(fits) + " fitted slopes below -1.8 tau; T/tau " + fmt(T / tau)};
}

Outcome ac8() {
  const auto r = run_dynamical_localization(load_config(cfg("dynamical_localization.json")), {threads()});
  std::string d = "rates";
  for (const auto& x : r.summary["rates"]) d += " " + fmt(x["rate"].get<double>());
  return {r.summary["monotone_decreasing"].get<bool>(), d};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome ac9() {
  const auto root = std::filesystem::path(FML_BINARY_DIR) / "acceptance_determinism";
  std::filesystem::remove_all(root);
  int same = 0, total = 0;
  std::string d;
  for (const char* name : {"theorem1_sweep.json", "absorption.json", "prethermalization.json", "dynamical_localization.json",
                           "integrability_breaking.json"}) {
    const auto c = load_config(cfg(name));
    const auto a = write_outputs(run_scenario(c, {1}), c, root / "a", 1);
    const auto b = write_outputs(run_scenario(c, {threads()}), c, root / "b", threads());
    const bool eq = slurp(a / "data.csv") == slurp(b / "data.csv");
    same += eq;
    ++total;
    if (!eq) d += std::string(" differs: ") + name;
  }
  std::filesystem::remove_all(root);
  return {same == total, std::to_string(same) + "/" + std::to_string(total) + " scenarios identical" + d};
}

Outcome ac10() {
  std::string d = "ratios";
  bool ok = true;
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    RandomSystemOptions ro;
    ro.n_sites = 5;
    ro.degree = 2;
    const double r = richardson_ratio(random_system(seed, 0.6, ro));
    ok = ok && std::abs(r - 16.0) <= 0.3 * 16.0;
    d += " " + fmt(r);
  }
  return {ok, d};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string part = "core";
  std::vector<int> which;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--part" && i + 1 < args.size()) {
      part = args[++i];
    } else {
      const int k = std::atoi(args[i].c_str());
      if (k < 1 || k > 10) {
        std::cerr << "usage: fml_acceptance [1-10 ...] [--part core|lemma6-printed]\n";
        return 1;
      }
      which.push_back(k);
    }
  }
  if (part != "core" && part != "lemma6-printed") {
    std::cerr << "unknown part " << part << "\n";
    return 1;
  }
  const bool all = which.empty();
  if (all) which = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  const std::map<int, std::function<Outcome()>> run{{1, ac1}, {2, ac2}, {3, ac3}, {5, ac5}, {6, ac6},
                                                     {7, ac7}, {8, ac8}, {9, ac9}, {10, ac10}};
  int failed = 0;
  auto report = [&](const std::string& label, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << label << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  [" << fmt(s) << " s]" << std::endl;
    failed += !o.pass;
  };
  for (int k : which) {
    if (k == 4) {
      if (all) {
        report("AC4 core", [] { return ac4("core"); });
        report("AC4 lemma6-printed", [] { return ac4("lemma6-printed"); });
      } else {
        report("AC4 " + part, [&] { return ac4(part); });
      }
    } else {
      report("AC" + std::to_string(k), run.at(k));
    }
  }
  return failed ? 1 : 0;
}
