#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "fml/experiments.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNoConvergence = 2;
constexpr int kViolation = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fml::ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fml::json read_json(const std::string& path) {
  try {
    return fml::json::parse(read_file(path));
  } catch (const fml::json::parse_error& e) {
    throw fml::ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

int thread_count(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("FML_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const fml::ConvergenceError& e) {
    std::cerr << "fml: not converged: " << e.what() << "\n";
    return kNoConvergence;
  } catch (const fml::Error& e) {
    std::cerr << "fml: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floquet-Magnus numerical laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, csv_path, svg_path, plot_name;
  int threads = 0, n_max = -1;
  long long seed = -1;

  auto* run = app.add_subcommand("run", "run a scenario config");
  run->add_option("config", config_path, "scenario config (JSON)")->required();
  run->add_option("--out", out_dir, "output root (default: output_dir from the config)");
  run->add_option("--threads", threads, "worker threads (fallback: FML_THREADS)");
  run->add_option("--n-max", n_max, "override the maximal Magnus order");
  run->add_option("--seed", seed, "override the seed");

  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", config_path, "scenario config (JSON)")->required();

  auto* render = app.add_subcommand("render", "re-render a plot from data.csv");
  render->add_option("csv", csv_path, "data.csv of a run")->required();
  render->add_option("--svg", svg_path, "output SVG")->required();
  render->add_option("--plot", plot_name, "plot name (default: first)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*validate) {
    return guarded([&] {
      const auto c = fml::parse_config(read_json(config_path));
      std::cout << "ok: scenario " << c.scenario << "\n" << c.resolved.dump(2) << "\n";
      return kOk;
    });
  }

  if (*render) {
    return guarded([&] {
      std::ofstream(svg_path, std::ios::binary) << fml::render_svg(read_file(csv_path), plot_name);
      return kOk;
    });
  }

  return guarded([&] {
    auto j = read_json(config_path);
    if (!j.is_object()) throw fml::ConfigError("config: expected an object");
    if (n_max >= 0) j["orders"] = {{"max", n_max}};
    if (seed >= 0) j["seed"] = static_cast<std::uint64_t>(seed);
    const auto c = fml::parse_config(j);
    const int k = thread_count(threads);
    const auto r = fml::run_scenario(c, {k});
    const auto dir = fml::write_outputs(r, c, out_dir.empty() ? c.output_dir : out_dir, k);
    std::cout << dir.string() << "\n";
    std::cout << "bounds: pass=" << r.passed << " fail=" << r.violations << " not-applicable=" << r.not_applicable << "\n";
    return r.violations > 0 ? kViolation : kOk;
  });
}
