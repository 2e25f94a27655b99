#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cpgflex_tools/commands.hpp"

namespace cpgflex::tools {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  std::string out;
  bool quiet = false;

  std::string controller;
  std::string from;
  std::vector<double> i_dc, theta_c;
  std::optional<double> duration, period, amplitude, jitter, probe_period, height_gate;
  std::string stimulus_file;
  std::string morphology;
  std::vector<std::string> trajectories;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file, or a manifest.json to re-run");
  sub->add_option("--seed", f.seed, "Base seed");
  sub->add_option("--workers", f.workers, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", f.out, "Output directory (absent or empty)");
  sub->add_flag("--quiet", f.quiet, "No progress lines");
}

json load_config(const std::string& command, const Flags& f, fs::path& base) {
  json cfg = json::object();
  base = fs::current_path();
  if (!f.config.empty()) {
    const fs::path p = f.config;
    if (!fs::exists(p)) throw UsageError("config file not found: " + f.config);
    cfg = read_json_file(p);
    base = fs::absolute(p).parent_path();
    if (cfg.is_object() && cfg.value("schema", "") == "cpgflex.manifest/1") {
      if (cfg.value("command", "") != command)
        throw UsageError("manifest was written by '" + cfg.value("command", "") + "', not '" +
                         command + "'");
      cfg = cfg.at("config");
      if (cfg.contains("jitter_generations")) cfg.erase("jitter_generations");
    }
  }
  if (!cfg.is_object()) throw ConfigurationError("config must be a JSON object");
  if (f.seed) cfg["seed"] = *f.seed;
  if (!f.controller.empty()) cfg["controller"] = fs::absolute(f.controller).string();
  if (!f.i_dc.empty()) cfg["i_dc"] = f.i_dc;
  if (!f.theta_c.empty()) cfg["theta_c"] = f.theta_c;
  if (f.height_gate) cfg["height_gate"] = *f.height_gate;
  if (!f.morphology.empty()) cfg["morphology"] = f.morphology;
  if (f.probe_period) cfg["probe_period"] = *f.probe_period;
  if (command == "sweep" && f.duration) cfg["duration"] = *f.duration;
  if (command == "entrain") {
    json st = cfg.value("stimulus", json::object());
    if (f.period) st["period"] = *f.period;
    if (f.amplitude) st["amplitude"] = *f.amplitude;
    if (f.jitter) st["jitter"] = *f.jitter;
    if (f.duration) st["duration"] = *f.duration;
    if (!f.stimulus_file.empty()) st["file"] = fs::absolute(f.stimulus_file).string();
    cfg["stimulus"] = st;
  }
  if (command == "reps" && !f.from.empty()) {
    const fs::path p = fs::path(f.from) / "final_population.json";
    if (!fs::exists(p)) throw UsageError("no final_population.json in " + f.from);
    cfg["population"] = fs::absolute(p).string();
  }
  if (!f.trajectories.empty()) {
    json list = json::array();
    for (const auto& t : f.trajectories) list.push_back(fs::absolute(t).string());
    cfg["trajectories"] = list;
  }
  return cfg;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Evolve and analyze CPG quadruped controllers"};
  app.require_subcommand(1);
  Flags f;

  auto* cpg = app.add_subcommand("evolve-cpg", "Evolve CPG genomes (four objectives)");
  auto* filt = app.add_subcommand("evolve-filter", "Evolve a filter layer for one controller");
  filt->add_option("--controller", f.controller, "Controller JSON with a natural period");
  auto* reps = app.add_subcommand("reps", "Pick representative controllers from a CPG run");
  reps->add_option("--from", f.from, "Directory of a finished evolve-cpg run");
  auto* sweep = app.add_subcommand("sweep", "Gait metrics over an (I_DC, theta_C) grid");
  sweep->add_option("--controller", f.controller, "Controller JSON");
  sweep->add_option("--i-dc", f.i_dc, "Drive values")->delimiter(',');
  sweep->add_option("--theta-c", f.theta_c, "Steering values (rad)")->delimiter(',');
  sweep->add_option("--duration", f.duration, "Trial length (s)");
  sweep->add_option("--height-gate", f.height_gate, "Exclude cells with H_tot below this");
  auto* entrain = app.add_subcommand("entrain", "Silent / stimulus / silent run with sync trace");
  entrain->add_option("--controller", f.controller, "Controller JSON with a filter layer");
  entrain->add_option("--period", f.period, "Stimulus period (s); defaults to the natural period");
  entrain->add_option("--stimulus-file", f.stimulus_file, "Impulse times, one per line");
  entrain->add_option("--amplitude", f.amplitude, "Impulse amplitude");
  entrain->add_option("--jitter", f.jitter, "Timing jitter as a fraction of the period");
  entrain->add_option("--duration", f.duration, "Total run length (s)");
  entrain->add_option("--probe-period", f.probe_period, "Wavelet probe period (s)");
  auto* analyze = app.add_subcommand("analyze", "Period, correlations and gait of trajectory CSVs");
  analyze->add_option("trajectories", f.trajectories, "Trajectory CSV files");
  analyze->add_option("--morphology", f.morphology, "normal or short");
  analyze->add_option("--height-gate", f.height_gate, "Exclude rows with H_tot below this");
  auto* resume = app.add_subcommand("resume", "Continue an interrupted evolution run");
  resume->add_option("--from", f.from, "Directory of the interrupted run")->required();

  for (auto* sub : {cpg, filt, reps, sweep, entrain, analyze, resume}) add_common(sub, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  std::string command = chosen->get_name();
  RunContext ctx;
  ctx.workers = f.workers;
  ctx.log = f.quiet ? nullptr : &std::cerr;

  try {
    json resolved;
    if (command == "resume") {
      const fs::path manifest = fs::path(f.from) / "manifest.json";
      if (!fs::exists(manifest)) throw UsageError("no manifest.json in " + f.from);
      const json doc = read_json_file(manifest);
      command = doc.value("command", "");
      if (command != "evolve-cpg" && command != "evolve-filter")
        throw UsageError("only evolution runs can be resumed");
      json cfg = doc.at("config");
      if (cfg.contains("jitter_generations")) cfg.erase("jitter_generations");
      resolved = resolve_config(command, cfg, fs::absolute(f.from));
      ctx.resume_from = fs::absolute(f.from);
    } else {
      fs::path base;
      const json cfg = load_config(command, f, base);
      resolved = resolve_config(command, cfg, base);
    }
    if (f.out.empty() && command != "analyze") throw UsageError("--out is required");
    ctx.out = f.out;
    run_command(command, resolved, ctx);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigurationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cpgflex::tools
