#include "cpgflex_tools/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "cpgflex/analysis.hpp"
#include "cpgflex/evolve.hpp"
#include "cpgflex/stimulus.hpp"

namespace cpgflex::tools {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSoftware = "cpgflex 0.1.0";

std::string fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double v) { return std::isnan(v) ? "nan" : fmt::format("{:.9g}", v); }

// --- config helpers ---------------------------------------------------------------

void reject_unknown(const json& doc, std::initializer_list<const char*> known,
                    const std::string& where) {
  if (!doc.is_object()) throw ConfigurationError(where + " must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigurationError("unknown field '" + key + "' in " + where);
  }
}

template <class T>
T field(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigurationError(std::string("field '") + key + "' has the wrong type");
  }
}

// A JSON object given inline or as a path relative to the config file.
json inline_document(const json& value, const fs::path& base, const std::string& what) {
  if (value.is_string()) {
    fs::path p = value.get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) throw UsageError(what + " file not found: " + p.string());
    return read_json_file(p);
  }
  if (value.is_object()) return value;
  throw ConfigurationError(what + " must be an object or a file path");
}

std::vector<double> number_list(const json& v, const char* what) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array() || v.empty()) throw ConfigurationError(std::string(what) + " must be a non-empty list");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigurationError(std::string(what) + " entries must be numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

// --- experiment directory ------------------------------------------------------------

class Experiment {
 public:
  Experiment(fs::path root, std::string command, json config)
      : root_(std::move(root)), command_(std::move(command)), config_(std::move(config)) {
    if (fs::exists(root_) && !(fs::is_directory(root_) && fs::is_empty(root_)))
      throw UsageError("output directory " + root_.string() + " already exists and is not empty");
    fs::create_directories(root_);
    write_manifest("running");
  }

  void text(const std::string& rel, const std::string& content) {
    const fs::path p = root_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
    if (std::find(files_.begin(), files_.end(), rel) == files_.end()) files_.push_back(rel);
  }
  void document(const std::string& rel, const json& doc) { text(rel, doc.dump(2) + "\n"); }
  void adopt(const std::string& rel) { files_.push_back(rel); }
  const fs::path& root() const { return root_; }
  void finish() { write_manifest("complete"); }

 private:
  void write_manifest(const std::string& status) {
    std::vector<std::string> files = files_;
    std::sort(files.begin(), files.end());
    json doc{{"schema", "cpgflex.manifest/1"},
             {"experiment_id", fnv1a(command_ + config_.dump())},
             {"command", command_},
             {"software", kSoftware},
             {"param_maps",
              {{"cpg", genome::ParamMap::cpg().version_hash()},
               {"filter", genome::ParamMap::filter().version_hash()}}},
             {"config", config_},
             {"status", status},
             {"outputs", files}};
    std::ofstream out(root_ / "manifest.json", std::ios::binary);
    out << doc.dump(2) << "\n";
  }

  fs::path root_;
  std::string command_;
  json config_;
  std::vector<std::string> files_;
};

void say(const RunContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << '\n' << std::flush;
}

// --- filter protocol settings ------------------------------------------------------

json filter_settings_json(const evolve::FilterProtocol& p) {
  return {{"duration", p.duration},         {"phi", p.phi},
          {"i_dc", p.i_dc},                 {"theta_c", p.theta_c},
          {"jitter_after", p.jitter_after}, {"jitter", p.jitter},
          {"sigma_t", p.sigma_t},           {"epsilon", p.epsilon},
          {"max_lag_factor", p.max_lag_factor}, {"min_lag", p.min_lag},
          {"silent_settle", p.silent_settle},   {"silent_window", p.silent_window}};
}

evolve::FilterProtocol filter_settings_from_json(const json& doc) {
  reject_unknown(doc,
                 {"duration", "phi", "i_dc", "theta_c", "jitter_after", "jitter", "sigma_t",
                  "epsilon", "max_lag_factor", "min_lag", "silent_settle", "silent_window"},
                 "filter protocol");
  evolve::FilterProtocol p;
  p.duration = field(doc, "duration", p.duration);
  p.phi = field(doc, "phi", p.phi);
  p.i_dc = field(doc, "i_dc", p.i_dc);
  p.theta_c = field(doc, "theta_c", p.theta_c);
  p.jitter_after = field(doc, "jitter_after", p.jitter_after);
  p.jitter = field(doc, "jitter", p.jitter);
  p.sigma_t = field(doc, "sigma_t", p.sigma_t);
  p.epsilon = field(doc, "epsilon", p.epsilon);
  p.max_lag_factor = field(doc, "max_lag_factor", p.max_lag_factor);
  p.min_lag = field(doc, "min_lag", p.min_lag);
  p.silent_settle = field(doc, "silent_settle", p.silent_settle);
  p.silent_window = field(doc, "silent_window", p.silent_window);
  if (!(p.duration > 0.0) || !(p.phi > 0.0 && p.phi < 1.0))
    throw ConfigurationError("filter protocol needs duration > 0 and 0 < phi < 1");
  return p;
}

// --- evolution plumbing shared by both stages -----------------------------------

std::string checkpoint_name(std::size_t generation) {
  return fmt::format("checkpoints/gen_{:04d}.json", generation);
}

struct EvolutionRun {
  std::vector<evolve::Checkpoint> archive;
  std::vector<evolve::Individual> final_population;
};

EvolutionRun evolve_with_checkpoints(Experiment& exp, const evolve::EvolutionConfig& config,
                                     const genome::ParamMap& map,
                                     const evolve::Evaluator& evaluate,
                                     const evolve::Evaluator& final_evaluator,
                                     const RunContext& ctx) {
  EvolutionRun run;
  evolve::EvolutionOptions opt;
  opt.workers = ctx.workers;
  opt.final_evaluator = final_evaluator;
  if (ctx.resume_from) {
    // Adopt every checkpoint of the interrupted run, then continue from the last.
    for (std::size_t g = 0;; ++g) {
      const fs::path src = *ctx.resume_from / checkpoint_name(g);
      if (!fs::exists(src)) break;
      auto cp = evolve::checkpoint_from_json(read_json_file(src), map);
      exp.text(checkpoint_name(g), read_text(src));
      run.archive.push_back(std::move(cp));
    }
    if (run.archive.empty()) throw UsageError("no checkpoints to resume from");
    opt.resume = run.archive.back();
    say(ctx, fmt::format("resuming after generation {}", opt.resume->generation));
  }
  opt.on_generation = [&](const evolve::Checkpoint& cp) {
    exp.document(checkpoint_name(cp.generation), evolve::to_json(cp, config, map));
    say(ctx, fmt::format("generation {} done", cp.generation));
  };
  auto result = evolve::run_evolution(config, map, evaluate, opt);
  run.archive.insert(run.archive.end(), result.archive.begin(), result.archive.end());
  run.final_population = std::move(result.final_population);
  exp.text("fitness.csv", evolve::summary_csv(run.archive, config.objectives));
  return run;
}

// --- evolve-cpg ----------------------------------------------------------------------

void cmd_evolve_cpg(const json& cfg, const RunContext& ctx) {
  const auto config = evolve::config_from_json(cfg.at("evolution"), evolve::EvolutionConfig::cpg_defaults());
  if (config.objectives != 4) throw ConfigurationError("CPG evolution has exactly 4 objectives");
  const auto protocol = evolve::cpg_protocol_from_json(cfg.at("protocol"));
  Experiment exp(ctx.out, "evolve-cpg", cfg);
  const auto map = genome::ParamMap::cpg(protocol.topology);
  const evolve::Evaluator eval = [&](const genome::Genome& g, const evolve::EvalContext& c) {
    return evolve::evaluate_cpg(g, protocol, c.seed);
  };
  auto run = evolve_with_checkpoints(exp, config, map, eval, {}, ctx);

  const auto& last = run.archive.back();
  json individuals = json::array();
  std::string csv = "index,f1,f2,f3,f4,all_positive,failed\n";
  for (std::size_t i = 0; i < last.population.size(); ++i) {
    const auto& searched = last.population[i];
    const auto& fin = run.final_population.empty() ? searched : run.final_population[i];
    const bool positive =
        std::all_of(fin.fitness.begin(), fin.fitness.end(), [](double v) { return v > 0.0; });
    individuals.push_back({{"index", i},
                           {"genome", genome::to_json(searched.genome)},
                           {"fitness", fin.fitness},
                           {"search_fitness", searched.fitness},
                           {"failed", fin.failed}});
    csv += fmt::format("{},{},{},{},{},{},{}\n", i, num(fin.fitness[0]), num(fin.fitness[1]),
                       num(fin.fitness[2]), num(fin.fitness[3]), positive ? 1 : 0,
                       fin.failed ? 1 : 0);
  }
  exp.document("final_population.json", {{"schema", "cpgflex.population/1"},
                                         {"kind", "cpg"},
                                         {"protocol", evolve::to_json(protocol)},
                                         {"final_evaluations", config.final_evaluations},
                                         {"individuals", individuals}});
  exp.text("final_fitness.csv", csv);
  exp.finish();
}

// --- reps ------------------------------------------------------------------------------

void cmd_reps(const json& cfg, const RunContext& ctx) {
  const json& pop = cfg.at("population");
  const auto protocol = evolve::cpg_protocol_from_json(pop.at("protocol"));
  const json& period_cfg = cfg.at("period");
  evolve::NaturalPeriodOptions po;
  po.duration = period_cfg.at("duration");
  po.i_dc = period_cfg.at("i_dc");
  po.theta_c = period_cfg.at("theta_c");
  po.min_lag = period_cfg.at("min_lag");
  po.max_lag = period_cfg.at("max_lag");
  const std::uint64_t seed = cfg.at("seed");

  std::vector<evolve::Fitness> fits;
  std::vector<genome::Genome> genomes;
  for (const auto& ind : pop.at("individuals")) {
    fits.push_back(ind.at("fitness").get<evolve::Fitness>());
    genomes.push_back(genome::genome_from_json(ind.at("genome")));
  }
  const auto reps = evolve::select_representatives(fits);
  Experiment exp(ctx.out, "reps", cfg);
  json list = json::array();
  for (std::size_t k = 0; k < reps.indices.size(); ++k) {
    const std::size_t idx = reps.indices[k];
    const auto decoded = genome::decode_cpg(genomes[idx], protocol.topology);
    const auto t0 = evolve::measure_natural_period(decoded.cpg, decoded.command,
                                                   body::MorphologyParams::of(protocol.morphology),
                                                   derive_seed(seed, idx), po);
    Controller c;
    c.name = fmt::format("rep_{}", k + 1);
    c.morphology = protocol.morphology;
    c.cpg = genomes[idx];
    c.natural_period = t0;
    c.info = {{"population_index", idx}, {"fitness", fits[idx]}, {"z", reps.z}};
    const std::string file = fmt::format("controllers/{}.json", c.name);
    exp.document(file, to_json(c));
    list.push_back({{"name", c.name},
                    {"index", idx},
                    {"fitness", fits[idx]},
                    {"natural_period", t0 ? json(*t0) : json(nullptr)},
                    {"controller", file}});
    say(ctx, fmt::format("{}: individual {} T0={}", c.name, idx, t0 ? num(*t0) : "none"));
  }
  exp.document("reps.json", {{"z", reps.z}, {"representatives", list}});
  exp.finish();
}

// --- evolve-filter ------------------------------------------------------------------

void cmd_evolve_filter(const json& cfg, const RunContext& ctx) {
  const Controller ctrl = controller_from_json(cfg.at("controller"));
  if (!ctrl.natural_period)
    throw ConfigurationError("controller '" + ctrl.name +
                "' has no measurable walking period, so an input period cannot be set");
  const auto config =
      evolve::config_from_json(cfg.at("evolution"), evolve::EvolutionConfig::filter_defaults());
  if (config.objectives != 3) throw ConfigurationError("filter evolution has exactly 3 objectives");
  evolve::FilterProtocol fp = filter_settings_from_json(cfg.at("protocol"));
  const auto decoded = genome::decode_cpg(ctrl.cpg, neuro::CpgTopology::standard());
  fp.cpg = decoded.cpg;
  fp.command = decoded.command;
  fp.morphology = body::MorphologyParams::of(ctrl.morphology);
  fp.natural_period = *ctrl.natural_period;

  json snapshot = cfg;
  if (config.generations > fp.jitter_after)
    snapshot["jitter_generations"] = {fp.jitter_after + 1, config.generations};
  else
    snapshot["jitter_generations"] = nullptr;
  Experiment exp(ctx.out, "evolve-filter", snapshot);

  const auto map = genome::ParamMap::filter();
  const evolve::Evaluator eval = [&](const genome::Genome& g, const evolve::EvalContext& c) {
    return evolve::evaluate_filter(g, fp, c.generation, c.seed);
  };
  const evolve::Evaluator final_eval = [&](const genome::Genome& g, const evolve::EvalContext& c) {
    return evolve::filter_final_record(g, fp, c.generation, c.seed);
  };
  auto run = evolve_with_checkpoints(exp, config, map, eval, final_eval, ctx);

  std::vector<evolve::Fitness> records;
  std::string csv =
      "index,q_slow,q_natural,q_fast,q_probe_slow,q_probe_fast,h_slow,h_natural,h_fast,"
      "h_probe_slow,h_probe_fast,sum_q,failed\n";
  for (std::size_t i = 0; i < run.final_population.size(); ++i) {
    const auto& ind = run.final_population[i];
    evolve::Fitness r = ind.fitness;
    if (r.size() != 10) r.assign(10, 0.0);
    records.push_back(r);
    csv += fmt::format("{}", i);
    for (double v : r) csv += "," + num(v);
    csv += fmt::format(",{},{}\n", num(r[0] + r[1] + r[2]), ind.failed ? 1 : 0);
  }
  exp.text("final_records.csv", csv);

  const auto periods = evolve::evolution_periods(fp);
  const auto probes = evolve::probe_periods(fp);
  json selection{{"natural_period", fp.natural_period},
                 {"evolution_periods", periods},
                 {"probe_periods", probes}};
  const auto chosen = records.empty() ? std::nullopt : evolve::select_filter(records);
  if (chosen) {
    const auto& r = records[*chosen];
    Controller out = ctrl;
    out.name = ctrl.name + "+filter";
    out.filter = run.archive.back().population[*chosen].genome;
    out.info = {{"cpg", ctrl.info},
                {"filter_index", *chosen},
                {"q", {r[0], r[1], r[2]}},
                {"h_tot", {r[5], r[6], r[7]}},
                {"probe_q", {r[3], r[4]}},
                {"probe_h_tot", {r[8], r[9]}}};
    exp.document("controller.json", to_json(out));
    selection["selected"] = *chosen;
    selection["q"] = {r[0], r[1], r[2]};
    selection["mean_q"] = (r[0] + r[1] + r[2]) / 3.0;
    selection["h_tot"] = {r[5], r[6], r[7]};
    selection["probe_q"] = {r[3], r[4]};
    selection["probe_h_tot"] = {r[8], r[9]};
    say(ctx, fmt::format("selected filter {} (mean Q {})", *chosen, num((r[0] + r[1] + r[2]) / 3.0)));
  } else {
    selection["selected"] = nullptr;
    say(ctx, "no filter kept every H_tot above the height gate");
  }
  exp.document("selection.json", selection);
  exp.finish();
}

// --- sweep ---------------------------------------------------------------------------

std::string corr_columns() { return "c_lf_rf,c_lf_lh,c_lf_rh,c_rf_lh,c_rf_rh,c_lh_rh"; }

std::string corr_values(const analysis::Correlation& c) {
  return fmt::format("{},{},{},{},{},{}", num(c.c[0][1]), num(c.c[0][2]), num(c.c[0][3]),
                     num(c.c[1][2]), num(c.c[1][3]), num(c.c[2][3]));
}

void cmd_sweep(const json& cfg, const RunContext& ctx) {
  const Controller ctrl = controller_from_json(cfg.at("controller"));
  const auto decoded = genome::decode_cpg(ctrl.cpg, neuro::CpgTopology::standard());
  analysis::SweepOptions so;
  so.duration = cfg.at("duration");
  so.seed = cfg.at("seed");
  so.workers = ctx.workers;
  so.analysis.height_gate = cfg.at("height_gate");
  const auto i_dc = number_list(cfg.at("i_dc"), "i_dc");
  const auto theta = number_list(cfg.at("theta_c"), "theta_c");
  Experiment exp(ctx.out, "sweep", cfg);
  const auto cells = analysis::sweep_heatmap(decoded.cpg, decoded.command,
                                             body::MorphologyParams::of(ctrl.morphology), i_dc,
                                             theta, so);
  std::string csv = "i_dc,theta_c,ok,forward_speed,sideways_speed,h_tot,t_tot,max_corr,period,gait,excluded," +
                    corr_columns() + ",error\n";
  for (const auto& c : cells) {
    const auto& m = c.metrics;
    if (!c.ok) {
      csv += fmt::format("{},{},0,,,,,,,,,,,,,,,\"{}\"\n", num(c.i_dc), num(c.theta_c), c.error);
      continue;
    }
    csv += fmt::format("{},{},1,{},{},{},{},{},{},{},{},{},\n", num(c.i_dc), num(c.theta_c),
                       num(m.forward_speed), num(m.sideways_speed), num(m.h_tot), num(m.t_tot),
                       num(m.max_corr), m.period ? num(*m.period) : "", analysis::to_string(m.gait),
                       m.excluded ? 1 : 0, corr_values(m.corr));
  }
  exp.text("sweep.csv", csv);
  exp.finish();
}

// --- entrain ----------------------------------------------------------------------------

void cmd_entrain(const json& cfg, const RunContext& ctx) {
  const Controller ctrl = controller_from_json(cfg.at("controller"));
  if (!ctrl.filter) throw ConfigurationError("controller '" + ctrl.name + "' has no filter layer");
  const json& st = cfg.at("stimulus");
  const double duration = st.at("duration"), start = st.at("start"), stop = st.at("stop");
  if (!(0.0 <= start && start <= stop && stop <= duration))
    throw ConfigurationError("stimulus needs 0 <= start <= stop <= duration");
  const std::uint64_t seed = cfg.at("seed");
  const auto wiring = genome::decode_filter(*ctrl.filter);
  const auto decoded = genome::decode_cpg(ctrl.cpg, neuro::CpgTopology::standard());
  const auto morph = body::MorphologyParams::of(ctrl.morphology);

  std::vector<double> times;
  std::optional<double> period;
  if (st.contains("times") && !st.at("times").is_null()) {
    times = st.at("times").get<std::vector<double>>();
    stimulus::validate_impulse_times(times);
  } else {
    period = st.at("period").is_null() ? ctrl.natural_period : std::optional<double>(st.at("period").get<double>());
    if (!period) throw ConfigurationError("no stimulus period and the controller has no natural period");
    stimulus::StimulusTrain train;
    train.period = *period;
    train.duration = stop - start;
    train.jitter = st.at("jitter");
    train.seed = derive_seed(seed, 1);
    for (double t : stimulus::generate_train(train)) times.push_back(t + start);
  }
  const double amplitude = st.at("amplitude");

  body::TrialOptions to;
  to.record = true;
  to.stimulus = stimulus::lowpass_signal(times, wiring.gamma_lowpass, to.dt_cpg, duration, amplitude);
  const auto controller = stimulus::attach_filter(decoded.cpg, wiring);
  Experiment exp(ctx.out, "entrain", cfg);
  const auto result = body::run_trial(controller, decoded.command, morph,
                                      body::Schedule::constant(duration, 0.5, 0.0), seed, to);
  const std::string traj = (ctx.out / "trajectory.csv").string();
  body::write_trajectory_csv(result.trace, traj);
  exp.adopt("trajectory.csv");
  std::string imp;
  for (double t : times) imp += fmt::format("{:.17g}\n", t);
  exp.text("impulses.txt", imp);

  json summary{{"controller", ctrl.name},
               {"natural_period", ctrl.natural_period ? json(*ctrl.natural_period) : json(nullptr)},
               {"stimulus_period", period ? json(*period) : json(nullptr)},
               {"impulses", times.size()},
               {"h_tot", result.metrics.h_tot},
               {"fallen", result.metrics.fallen}};

  const std::optional<double> probe = cfg.at("probe_period").is_null()
                                          ? (period ? period : ctrl.natural_period)
                                          : std::optional<double>(cfg.at("probe_period").get<double>());
  if (probe) {
    const auto& tr = result.trace;
    const double dt = tr.body_time.size() > 1 ? tr.body_time[1] - tr.body_time[0] : to.dt_physics;
    const auto sync = analysis::wavelet_sync(tr.leg_series(0), *probe, dt);
    std::string csv = "time,sync\n";
    for (std::size_t k = 0; k < sync.size(); ++k)
      csv += fmt::format("{:.6f},{}\n", tr.body_time[k], num(sync[k]));
    exp.text("sync.csv", csv);
    summary["probe_period"] = *probe;
  }

  // Output period and Q over the stimulus window.
  {
    const auto& tr = result.trace;
    std::vector<double> x, y;
    for (std::size_t k = 0; k < tr.cpg_time.size(); ++k) {
      if (tr.cpg_time[k] <= start || tr.cpg_time[k] > stop) continue;
      x.push_back(tr.neuron_u[k * tr.neurons + neuro::cpg_index(0, neuro::Role::MotorA)]);
      y.push_back(tr.neuron_u[k * tr.neurons + neuro::cpg_index(0, neuro::Role::MotorB)]);
    }
    const double window = stop - start;
    double max_lag = ctrl.natural_period ? 2.25 * *ctrl.natural_period : 4.0;
    max_lag = std::min(max_lag, 0.5 * window);
    std::optional<double> t_out;
    if (max_lag > 0.05) {
      try {
        t_out = analysis::estimate_period(x, y, to.dt_cpg, 0.05, max_lag);
      } catch (const InsufficientData&) {
      }
    }
    const double sigma0 = stimulus::silent_output_sd(wiring, derive_seed(seed, 0x516));
    summary["sigma0"] = sigma0;
    summary["period_during_stimulus"] = t_out ? json(*t_out) : json(nullptr);
    if (t_out && period) summary["q_during_stimulus"] = analysis::entrainment_q(*t_out, *period, sigma0);
  }
  exp.document("summary.json", summary);
  exp.finish();
}

// --- analyze ----------------------------------------------------------------------------

void cmd_analyze(const json& cfg, const RunContext& ctx) {
  analysis::AnalysisOptions ao;
  ao.height_gate = cfg.at("height_gate");
  ao.min_lag = cfg.at("min_lag");
  ao.max_lag = cfg.at("max_lag");
  ao.gait.walk_if_all_negative = cfg.at("walk_if_all_negative");
  const auto morph = body::MorphologyParams::of(body::morphology_from_string(cfg.at("morphology")));
  std::string csv = "source,period,gait,max_corr," + corr_columns() +
                    ",h_tot,forward_speed,sideways_speed,excluded\n";
  for (const auto& t : cfg.at("trajectories")) {
    const std::string path = t.at("path");
    if (!fs::exists(path)) throw UsageError("trajectory not found: " + path);
    if (fnv1a(read_text(path)) != t.at("fnv").get<std::string>())
      throw ValidationError("trajectory " + path + " changed since the manifest was written");
    const auto table = analysis::read_csv(path);
    const auto m = analysis::analyze_table(table, body::standing_height(body::JointCommandParams{}, morph), ao);
    const std::string name = fs::path(path).filename().string();
    csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", name, m.period ? num(*m.period) : "",
                       analysis::to_string(m.gait), num(m.max_corr), corr_values(m.corr),
                       num(m.h_tot), num(m.forward_speed), num(m.sideways_speed),
                       m.excluded ? 1 : 0);
    say(ctx, fmt::format("{}: {}{}", name, analysis::to_string(m.gait), m.excluded ? " (excluded)" : ""));
  }
  if (ctx.out.empty()) {
    if (ctx.log) *ctx.log << csv;
    return;
  }
  Experiment exp(ctx.out, "analyze", cfg);
  exp.text("metrics.csv", csv);
  exp.finish();
}

}  // namespace

// --- public ----------------------------------------------------------------------------

json read_json_file(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigurationError("cannot parse " + path.string() + ": " + e.what());
  }
}

json to_json(const Controller& c) {
  return {{"schema", "cpgflex.controller/1"},
          {"name", c.name},
          {"morphology", body::to_string(c.morphology)},
          {"cpg", genome::to_json(c.cpg)},
          {"natural_period", c.natural_period ? json(*c.natural_period) : json(nullptr)},
          {"filter", c.filter ? genome::to_json(*c.filter) : json(nullptr)},
          {"info", c.info}};
}

Controller controller_from_json(const json& doc) {
  try {
    if (doc.value("schema", "") != "cpgflex.controller/1")
      throw ValidationError("not a controller document");
    Controller c;
    c.name = doc.value("name", "controller");
    c.morphology = body::morphology_from_string(doc.value("morphology", "normal"));
    c.cpg = genome::genome_from_json(doc.at("cpg"));
    if (c.cpg.kind != genome::Kind::Cpg) throw ValidationError("controller 'cpg' is not a CPG genome");
    if (doc.contains("natural_period") && !doc["natural_period"].is_null())
      c.natural_period = doc["natural_period"].get<double>();
    if (doc.contains("filter") && !doc["filter"].is_null()) {
      c.filter = genome::genome_from_json(doc["filter"]);
      if (c.filter->kind != genome::Kind::Filter)
        throw ValidationError("controller 'filter' is not a filter genome");
    }
    if (doc.contains("info")) c.info = doc["info"];
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed controller: ") + e.what());
  }
}

std::vector<std::string> command_names() {
  return {"evolve-cpg", "evolve-filter", "reps", "sweep", "entrain", "analyze"};
}

json resolve_config(const std::string& command, json cfg, const fs::path& base) {
  if (cfg.is_null()) cfg = json::object();
  if (!cfg.is_object()) throw ConfigurationError("config must be a JSON object");
  const std::uint64_t seed = field<std::uint64_t>(cfg, "seed", 1);
  json out{{"seed", seed}};

  if (command == "evolve-cpg") {
    reject_unknown(cfg, {"seed", "evolution", "protocol"}, "evolve-cpg config");
    auto evo = evolve::config_from_json(cfg.value("evolution", json::object()),
                                        evolve::EvolutionConfig::cpg_defaults());
    evo.seed = seed;
    out["evolution"] = evolve::to_json(evo);
    out["protocol"] = evolve::to_json(evolve::cpg_protocol_from_json(cfg.value("protocol", json::object())));
  } else if (command == "evolve-filter") {
    reject_unknown(cfg, {"seed", "controller", "evolution", "protocol"}, "evolve-filter config");
    if (!cfg.contains("controller")) throw ConfigurationError("missing field 'controller'");
    out["controller"] = to_json(controller_from_json(inline_document(cfg["controller"], base, "controller")));
    auto evo = evolve::config_from_json(cfg.value("evolution", json::object()),
                                        evolve::EvolutionConfig::filter_defaults());
    evo.seed = seed;
    out["evolution"] = evolve::to_json(evo);
    out["protocol"] = filter_settings_json(filter_settings_from_json(cfg.value("protocol", json::object())));
  } else if (command == "reps") {
    reject_unknown(cfg, {"seed", "population", "period"}, "reps config");
    if (!cfg.contains("population")) throw ConfigurationError("missing field 'population'");
    json pop = inline_document(cfg["population"], base, "population");
    if (pop.value("schema", "") != "cpgflex.population/1")
      throw ValidationError("'population' is not a population document");
    out["population"] = pop;
    const json p = cfg.value("period", json::object());
    reject_unknown(p, {"duration", "i_dc", "theta_c", "min_lag", "max_lag"}, "period settings");
    evolve::NaturalPeriodOptions po;
    out["period"] = {{"duration", field(p, "duration", po.duration)},
                     {"i_dc", field(p, "i_dc", po.i_dc)},
                     {"theta_c", field(p, "theta_c", po.theta_c)},
                     {"min_lag", field(p, "min_lag", po.min_lag)},
                     {"max_lag", field(p, "max_lag", po.max_lag)}};
  } else if (command == "sweep") {
    reject_unknown(cfg, {"seed", "controller", "i_dc", "theta_c", "duration", "height_gate"},
                   "sweep config");
    if (!cfg.contains("controller")) throw ConfigurationError("missing field 'controller'");
    out["controller"] = to_json(controller_from_json(inline_document(cfg["controller"], base, "controller")));
    out["i_dc"] = number_list(cfg.value("i_dc", json(0.5)), "i_dc");
    out["theta_c"] = number_list(cfg.value("theta_c", json(0.016)), "theta_c");
    out["duration"] = field(cfg, "duration", 20.0);
    out["height_gate"] = field(cfg, "height_gate", 0.75);
  } else if (command == "entrain") {
    reject_unknown(cfg, {"seed", "controller", "stimulus", "probe_period"}, "entrain config");
    if (!cfg.contains("controller")) throw ConfigurationError("missing field 'controller'");
    out["controller"] = to_json(controller_from_json(inline_document(cfg["controller"], base, "controller")));
    const json s = cfg.value("stimulus", json::object());
    reject_unknown(s, {"period", "times", "file", "amplitude", "jitter", "start", "stop", "duration"},
                   "stimulus settings");
    json st{{"period", s.contains("period") ? s["period"] : json(nullptr)},
            {"amplitude", field(s, "amplitude", 1.0)},
            {"jitter", field(s, "jitter", 0.0)},
            {"start", field(s, "start", 8.0)},
            {"stop", field(s, "stop", 16.0)},
            {"duration", field(s, "duration", 24.0)},
            {"times", nullptr}};
    if (!st["period"].is_null() && !st["period"].is_number())
      throw ConfigurationError("stimulus period must be a number or null");
    if (s.contains("file") && !s["file"].is_null()) {
      fs::path p = s["file"].get<std::string>();
      if (p.is_relative()) p = base / p;
      st["times"] = stimulus::read_impulse_times(p.string());
    } else if (s.contains("times") && !s["times"].is_null()) {
      const auto times = s["times"].get<std::vector<double>>();
      stimulus::validate_impulse_times(times);
      st["times"] = times;
    }
    out["stimulus"] = st;
    out["probe_period"] = cfg.contains("probe_period") ? cfg["probe_period"] : json(nullptr);
  } else if (command == "analyze") {
    reject_unknown(cfg, {"seed", "trajectories", "morphology", "height_gate", "min_lag", "max_lag",
                         "walk_if_all_negative"},
                   "analyze config");
    json list = json::array();
    for (const auto& t : cfg.value("trajectories", json::array())) {
      fs::path p = t.is_string() ? fs::path(t.get<std::string>()) : fs::path(t.at("path").get<std::string>());
      if (p.is_relative()) p = base / p;
      if (!fs::exists(p)) throw UsageError("trajectory not found: " + p.string());
      p = fs::weakly_canonical(p);
      list.push_back({{"path", p.string()}, {"fnv", fnv1a(read_text(p))}});
    }
    if (list.empty()) throw UsageError("analyze needs at least one trajectory");
    out["trajectories"] = list;
    out["morphology"] = body::to_string(body::morphology_from_string(field<std::string>(cfg, "morphology", "normal")));
    analysis::AnalysisOptions ao;
    out["height_gate"] = field(cfg, "height_gate", ao.height_gate);
    out["min_lag"] = field(cfg, "min_lag", ao.min_lag);
    out["max_lag"] = field(cfg, "max_lag", ao.max_lag);
    out["walk_if_all_negative"] = field(cfg, "walk_if_all_negative", false);
  } else {
    throw UsageError("unknown command '" + command + "'");
  }
  return out;
}

void run_command(const std::string& command, const json& config, const RunContext& ctx) {
  if (command == "evolve-cpg") return cmd_evolve_cpg(config, ctx);
  if (command == "evolve-filter") return cmd_evolve_filter(config, ctx);
  if (command == "reps") return cmd_reps(config, ctx);
  if (command == "sweep") return cmd_sweep(config, ctx);
  if (command == "entrain") return cmd_entrain(config, ctx);
  if (command == "analyze") return cmd_analyze(config, ctx);
  throw UsageError("unknown command '" + command + "'");
}

}  // namespace cpgflex::tools
