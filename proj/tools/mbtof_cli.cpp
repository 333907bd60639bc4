// Command-line front end: one verb per experiment, all driven by a JSON
// scenario. Exit status is 0 on success, 1 when a scenario bound fails and
// 2 on invalid input.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mbtof/mbtof.hpp"

namespace {

struct Options {
  std::string scenario;
  int trials = 1;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::vector<std::string> overrides;
  unsigned workers = 0;
};

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream os(path);
  if (!os) throw mbtof::Error(mbtof::ErrorCode::InvalidArgument, "cannot write " + path.string());
  os << contents;
}

int execute(mbtof::ExperimentKind kind, const Options& opt) {
  const auto scenario = mbtof::load_scenario(opt.scenario, opt.overrides);
  mbtof::ExperimentSpec spec;
  spec.kind = kind;
  spec.trials = opt.trials;
  spec.seed = opt.seed;
  spec.workers = opt.workers;
  auto result = mbtof::run(scenario, spec);
  result.summary["scenario"] = opt.scenario;

  const std::filesystem::path dir(opt.out);
  std::filesystem::create_directories(dir);
  for (const auto& [name, contents] : result.files) write_file(dir / name, contents);
  write_file(dir / "summary.json", result.summary.dump(2) + "\n");
  std::cout << result.summary.dump(2) << '\n';
  return result.bounds_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-band Wi-Fi time-of-flight toolkit"};
  app.require_subcommand(1);
  Options opt;

  struct Verb {
    const char* name;
    const char* help;
    mbtof::ExperimentKind kind;
  };
  const Verb verbs[] = {
      {"tof", "estimate time of flight over random trials", mbtof::ExperimentKind::Tof},
      {"profile", "export the multipath profile of one sweep", mbtof::ExperimentKind::Profile},
      {"localize", "2-D localization error CDF", mbtof::ExperimentKind::Localize},
      {"sweep", "simulate the band hopping protocol", mbtof::ExperimentKind::Sweep},
      {"follow", "closed-loop following simulation", mbtof::ExperimentKind::Follow},
      {"calibrate", "estimate the reciprocity constant and ToF offset", mbtof::ExperimentKind::Calibrate},
  };

  std::vector<std::pair<CLI::App*, mbtof::ExperimentKind>> subs;
  for (const auto& v : verbs) {
    auto* sub = app.add_subcommand(v.name, v.help);
    sub->add_option("--scenario", opt.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--trials", opt.trials, "number of trials")->check(CLI::PositiveNumber);
    sub->add_option("--seed", opt.seed, "base random seed");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--config-override", opt.overrides, "key=value applied to the scenario (repeatable)");
    sub->add_option("--workers", opt.workers, "worker threads, 0 for all cores");
    subs.emplace_back(sub, v.kind);
  }

  CLI11_PARSE(app, argc, argv);
  try {
    for (const auto& [sub, kind] : subs) {
      if (sub->parsed()) return execute(kind, opt);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
