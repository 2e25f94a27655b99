#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "cpgflex/analysis.hpp"
#include "cpgflex/errors.hpp"
#include "cpgflex/evolve.hpp"

namespace cpgflex::evolve {

Fitness cpg_fitness(std::span<const body::StageDisplacement> stages, double h_tot, double t_tot,
                    const CpgFitnessOptions& o) {
  if (stages.size() != 3) throw ConfigurationError("CPG fitness needs three stages");
  const auto side = [&](std::size_t j) {
    const double x = o.sideways_from_first_stage ? stages[0].x : stages[j].x;
    return (x / o.x0) * (x / o.x0);
  };
  const double y1 = stages[0].y, y2 = stages[1].y, y3 = stages[2].y;
  return {-y1 - side(0), 2.0 * o.y0 * y2 - y2 * y2 - side(1), y3 - side(2),
          o.y0 * o.y0 * h_tot / (1.0 + t_tot)};
}

Fitness cpg_fitness(const body::TrialMetrics& metrics, const CpgFitnessOptions& options) {
  return cpg_fitness(metrics.stages, metrics.h_tot, metrics.t_tot, options);
}

nlohmann::json to_json(const CpgProtocol& p) {
  return {{"morphology", body::to_string(p.morphology)},
          {"stage_duration", p.stage_duration},
          {"theta_c_backward", p.theta_c_backward},
          {"theta_c_forward", p.theta_c_forward},
          {"i_dc_base", p.i_dc_base},
          {"i_dc_peak", p.i_dc_peak},
          {"x0", p.fitness.x0},
          {"y0", p.fitness.y0},
          {"sideways_from_first_stage", p.fitness.sideways_from_first_stage},
          {"burn_in", p.trial.burn_in},
          {"actuation_ramp", p.trial.actuation_ramp}};
}

CpgProtocol cpg_protocol_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigurationError("protocol must be an object");
  CpgProtocol p;
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "morphology") p.morphology = body::morphology_from_string(value.get<std::string>());
      else if (key == "stage_duration") p.stage_duration = value.get<double>();
      else if (key == "theta_c_backward") p.theta_c_backward = value.get<double>();
      else if (key == "theta_c_forward") p.theta_c_forward = value.get<double>();
      else if (key == "i_dc_base") p.i_dc_base = value.get<double>();
      else if (key == "i_dc_peak") p.i_dc_peak = value.get<double>();
      else if (key == "x0") p.fitness.x0 = value.get<double>();
      else if (key == "y0") p.fitness.y0 = value.get<double>();
      else if (key == "sideways_from_first_stage") p.fitness.sideways_from_first_stage = value.get<bool>();
      else if (key == "burn_in") p.trial.burn_in = value.get<double>();
      else if (key == "actuation_ramp") p.trial.actuation_ramp = value.get<double>();
      else throw ConfigurationError("unknown protocol field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw ConfigurationError("protocol field '" + key + "' has the wrong type");
    }
  }
  if (!(p.stage_duration > 0.0)) throw ConfigurationError("stage_duration must be positive");
  if (!(p.fitness.x0 > 0.0)) throw ConfigurationError("x0 must be positive");
  return p;
}

body::Schedule cpg_schedule(const CpgProtocol& p) {
  body::Schedule s;
  s.stages = {
      {p.stage_duration, p.i_dc_base, p.i_dc_base, p.theta_c_backward, p.theta_c_backward},
      {p.stage_duration, p.i_dc_base, p.i_dc_base, p.theta_c_forward, p.theta_c_forward},
      {p.stage_duration, p.i_dc_base, p.i_dc_peak, p.theta_c_forward, p.theta_c_forward},
  };
  return s;
}

Fitness evaluate_cpg(const genome::Genome& g, const CpgProtocol& p, std::uint64_t seed) {
  const auto decoded = genome::decode_cpg(g, p.topology);
  const auto result = body::run_trial(decoded.cpg, decoded.command, body::MorphologyParams::of(p.morphology),
                                      cpg_schedule(p), seed, p.trial);
  return cpg_fitness(result.metrics, p.fitness);
}

Representatives select_representatives(const std::vector<Fitness>& fitnesses, int z_max) {
  std::vector<std::size_t> positive;
  for (std::size_t i = 0; i < fitnesses.size(); ++i)
    if (!fitnesses[i].empty() &&
        std::all_of(fitnesses[i].begin(), fitnesses[i].end(), [](double v) { return v > 0.0; }))
      positive.push_back(i);
  if (positive.empty()) throw InsufficientData("no individual has all-positive fitness");
  const std::size_t m = fitnesses[positive.front()].size();

  Representatives best;
  std::size_t best_distinct = 0;
  for (int z = 1; z <= z_max; ++z) {
    std::vector<std::size_t> picks;
    for (std::size_t obj = 0; obj < m; ++obj) {
      std::size_t arg = positive.front();
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t i : positive) {
        double sum = 0.0;
        for (double v : fitnesses[i]) sum += v;
        const double score = z * fitnesses[i][obj] + sum;
        if (score > top) {
          top = score;
          arg = i;
        }
      }
      picks.push_back(arg);
    }
    std::vector<std::size_t> distinct;
    for (std::size_t i : picks)
      if (std::find(distinct.begin(), distinct.end(), i) == distinct.end()) distinct.push_back(i);
    if (distinct.size() > best_distinct) {
      best_distinct = distinct.size();
      best = {distinct, z};
    }
    if (distinct.size() == m) break;
  }
  return best;
}

// --- filter ----------------------------------------------------------------------

namespace {

std::optional<double> trial_period(const body::TrialResult& r, double min_lag, double max_lag) {
  const auto& tr = r.trace;
  if (tr.cpg_time.size() < 4) return std::nullopt;
  const double dt = tr.cpg_time[1] - tr.cpg_time[0];
  auto x = tr.state_series(neuro::cpg_index(0, neuro::Role::MotorA));
  auto y = tr.state_series(neuro::cpg_index(0, neuro::Role::MotorB));
  x.erase(x.begin(), x.begin() + static_cast<long>(x.size() / 2));
  y.erase(y.begin(), y.begin() + static_cast<long>(y.size() / 2));
  try {
    return analysis::estimate_period(x, y, dt, min_lag, max_lag);
  } catch (const InsufficientData&) {
    return std::nullopt;
  }
}

}  // namespace

std::optional<double> measure_natural_period(const neuro::NetworkSpec& cpg,
                                             const body::JointCommandParams& cmd,
                                             const body::MorphologyParams& morphology,
                                             std::uint64_t seed,
                                             const NaturalPeriodOptions& options) {
  body::TrialOptions to;
  to.record = true;
  const auto r = body::run_trial(
      cpg, cmd, morphology, body::Schedule::constant(options.duration, options.i_dc, options.theta_c),
      seed, to);
  return trial_period(r, options.min_lag, options.max_lag);
}

std::vector<double> evolution_periods(const FilterProtocol& p) {
  const double t0 = p.natural_period;
  return {t0 / p.phi, t0, p.phi * t0};
}

std::vector<double> probe_periods(const FilterProtocol& p) {
  const double t0 = p.natural_period, s = std::sqrt(p.phi);
  return {t0 / s, s * t0};
}

FilterScore score_filter(const stimulus::FilterWiring& wiring, const FilterProtocol& p,
                         std::span<const double> periods, std::size_t generation,
                         std::uint64_t seed) {
  if (!(p.natural_period > 0.0)) throw ConfigurationError("filter protocol needs a natural period");
  FilterScore score;
  score.sigma0 = stimulus::silent_output_sd(wiring, derive_seed(seed, 0x516), p.silent_settle,
                                            p.silent_window, p.trial.dt_cpg);
  const neuro::NetworkSpec controller = stimulus::attach_filter(p.cpg, wiring);
  const double jitter = generation > p.jitter_after ? p.jitter : 0.0;
  for (std::size_t k = 0; k < periods.size(); ++k) {
    stimulus::StimulusTrain train;
    train.period = periods[k];
    train.duration = p.duration;
    train.jitter = jitter;
    train.seed = derive_seed(seed, 0x7A1, k);
    body::TrialOptions to = p.trial;
    to.record = true;
    to.stimulus = stimulus::lowpass_signal(stimulus::generate_train(train), wiring.gamma_lowpass,
                                           to.dt_cpg, p.duration);
    const auto r = body::run_trial(controller, p.command, p.morphology,
                                   body::Schedule::constant(p.duration, p.i_dc, p.theta_c),
                                   derive_seed(seed, 0x7A2, k), to);
    PeriodScore ps;
    ps.t_in = periods[k];
    ps.h_tot = r.metrics.h_tot;
    ps.t_out = trial_period(r, p.min_lag, p.max_lag_factor * p.natural_period);
    ps.q = ps.t_out ? analysis::entrainment_q(*ps.t_out, ps.t_in, score.sigma0, p.sigma_t, p.epsilon)
                    : 0.0;
    ps.fitness = ps.h_tot * ps.q;
    score.periods.push_back(ps);
  }
  return score;
}

Fitness evaluate_filter(const genome::Genome& g, const FilterProtocol& p, std::size_t generation,
                        std::uint64_t seed) {
  const auto periods = evolution_periods(p);
  const auto s = score_filter(genome::decode_filter(g), p, periods, generation, seed);
  Fitness f;
  for (const auto& ps : s.periods) f.push_back(ps.fitness);
  return f;
}

Fitness filter_final_record(const genome::Genome& g, const FilterProtocol& p,
                            std::size_t generation, std::uint64_t seed) {
  auto periods = evolution_periods(p);
  const auto probes = probe_periods(p);
  periods.insert(periods.end(), probes.begin(), probes.end());
  const auto s = score_filter(genome::decode_filter(g), p, periods, generation, seed);
  Fitness rec;
  for (const auto& ps : s.periods) rec.push_back(ps.q);
  for (const auto& ps : s.periods) rec.push_back(ps.h_tot);
  return rec;
}

std::optional<std::size_t> select_filter(const std::vector<Fitness>& records, double height_gate) {
  std::optional<std::size_t> best;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Fitness& r = records[i];
    if (r.size() != 10) throw ConfigurationError("filter record must hold 10 values");
    bool upright = true;
    double sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      sum += r[k];
      if (!(r[5 + k] > height_gate)) upright = false;
    }
    if (upright && sum > best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

}  // namespace cpgflex::evolve
