#pragma once

// NSGA-III evolution of integer genomes, plus the CPG and filter evaluation
// protocols. Objectives are maximized throughout.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cpgflex/body.hpp"
#include "cpgflex/genome.hpp"
#include "cpgflex/rng.hpp"
#include "cpgflex/stimulus.hpp"

namespace cpgflex::evolve {

using Fitness = std::vector<double>;

/// Assigned to every objective of an individual whose evaluation failed.
inline constexpr double kFailedFitness = -1.0e6;

// --- NSGA-III building blocks ------------------------------------------------

/// a >= b everywhere and a > b somewhere.
bool dominates(const Fitness& a, const Fitness& b);

/// Fronts of indices, best first; indices within a front ascend.
std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<Fitness>& points);

std::size_t binomial(std::size_t n, std::size_t k);

/// Das-Dennis lattice: every point with coordinates i/p summing to one.
std::vector<std::vector<double>> reference_points(std::size_t objectives, std::size_t partitions);

/// Picks k survivors from `pool` (fronts first, then reference-point niching
/// on the partial front). The returned indices ascend.
std::vector<std::size_t> nsga3_select(const std::vector<Fitness>& pool,
                                      const std::vector<std::vector<double>>& refs, std::size_t k,
                                      Rng& rng);

/// Random pairing, uniform crossover with probability p_c per pair, then
/// per-allele resampling with probability p_m. Population size must be even.
std::vector<genome::Genome> vary(const std::vector<genome::Genome>& parents, double p_c,
                                 double p_m, Rng& rng);

/// Area dominated by `points` and bounded below by `ref` (two objectives).
double hypervolume_2d(const std::vector<Fitness>& points, const Fitness& ref);

/// Per-objective median; even counts average the middle pair.
Fitness median_fitness(const std::vector<Fitness>& samples);

// --- evolution loop ------------------------------------------------------------

struct EvolutionConfig {
  std::size_t population = 168;
  std::size_t partitions = 8;
  std::size_t objectives = 4;
  std::size_t generations = 200;
  double p_c = 0.7;
  double p_m = 0.05;
  std::size_t evaluations = 3;
  /// Seeds used to re-evaluate the final population (0 skips it).
  std::size_t final_evaluations = 15;
  std::uint64_t seed = 1;

  static EvolutionConfig cpg_defaults();
  static EvolutionConfig filter_defaults();
  void validate() const;
};

nlohmann::json to_json(const EvolutionConfig& c);
/// Missing fields keep the defaults in `base`.
EvolutionConfig config_from_json(const nlohmann::json& doc, EvolutionConfig base);

struct Individual {
  genome::Genome genome;
  Fitness fitness;                   // median over evaluations
  std::vector<Fitness> evaluations;  // one per seed
  bool failed = false;
  std::string error;
};

struct EvalContext {
  std::size_t generation = 0;
  std::size_t individual = 0;
  std::size_t evaluation = 0;
  std::uint64_t seed = 0;
};

using Evaluator = std::function<Fitness(const genome::Genome&, const EvalContext&)>;

struct Checkpoint {
  std::size_t generation = 0;
  std::vector<Individual> population;
  std::string rng_state;
};

nlohmann::json to_json(const Checkpoint& c, const EvolutionConfig& config,
                       const genome::ParamMap& map);
/// Validates kind and map hash against `map`.
Checkpoint checkpoint_from_json(const nlohmann::json& doc, const genome::ParamMap& map);

struct EvolutionOptions {
  unsigned workers = 1;
  /// Called after every generation (including the initial one).
  std::function<void(const Checkpoint&)> on_generation;
  /// Used for the final re-evaluation instead of the search evaluator.
  Evaluator final_evaluator;
  std::optional<Checkpoint> resume;
};

struct EvolutionResult {
  std::vector<Checkpoint> archive;  // one snapshot per generation run here
  /// Final population re-evaluated with `final_evaluations` fresh seeds.
  std::vector<Individual> final_population;
};

EvolutionResult run_evolution(const EvolutionConfig& config, const genome::ParamMap& map,
                              const Evaluator& evaluate, const EvolutionOptions& options = {});

/// Evaluates jobs(i) for i in [0, n) on `workers` threads; results stay in index order.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& job);

/// "generation,f0_max,f0_median,..." rows for a run.
std::string summary_csv(const std::vector<Checkpoint>& archive, std::size_t objectives);

// --- CPG protocol ------------------------------------------------------------------

struct CpgFitnessOptions {
  double x0 = 2.2360679774997896964;  // sqrt(5) m
  double y0 = 2.5;                    // m
  /// Penalize the first stage's sideways motion in every stage.
  bool sideways_from_first_stage = false;
};

/// F1 (backwards), F2 (steady forwards), F3 (acceleration), F4 (upright, level).
Fitness cpg_fitness(const body::TrialMetrics& metrics, const CpgFitnessOptions& options = {});
Fitness cpg_fitness(std::span<const body::StageDisplacement> stages, double h_tot, double t_tot,
                    const CpgFitnessOptions& options = {});

struct CpgProtocol {
  body::Morphology morphology = body::Morphology::Normal;
  double stage_duration = 10.0;
  double theta_c_backward = -0.016;
  double theta_c_forward = 0.016;
  double i_dc_base = 0.5;
  double i_dc_peak = 1.0;
  CpgFitnessOptions fitness;
  body::TrialOptions trial;
  neuro::CpgTopology topology = neuro::CpgTopology::standard();
};

nlohmann::json to_json(const CpgProtocol& p);
CpgProtocol cpg_protocol_from_json(const nlohmann::json& doc);

body::Schedule cpg_schedule(const CpgProtocol& protocol);

Fitness evaluate_cpg(const genome::Genome& g, const CpgProtocol& protocol, std::uint64_t seed);

struct Representatives {
  std::vector<std::size_t> indices;  // into the input, one per objective where distinct
  int z = 0;
};

/// Among all-positive individuals, argmax of z F_m + sum_k F_k for each m,
/// growing z until the argmaxes are distinct. Throws if none is all-positive.
Representatives select_representatives(const std::vector<Fitness>& fitnesses, int z_max = 1000);

// --- filter protocol -------------------------------------------------------------

struct NaturalPeriodOptions {
  double duration = 40.0;
  double i_dc = 0.5;
  double theta_c = 0.0;
  double min_lag = 0.05;
  double max_lag = 4.0;
};

/// Period of the CPG under constant control, from the second half of a trial.
std::optional<double> measure_natural_period(const neuro::NetworkSpec& cpg,
                                             const body::JointCommandParams& cmd,
                                             const body::MorphologyParams& morphology,
                                             std::uint64_t seed,
                                             const NaturalPeriodOptions& options = {});

struct FilterProtocol {
  neuro::NetworkSpec cpg;
  body::JointCommandParams command;
  body::MorphologyParams morphology = body::MorphologyParams::normal();
  double natural_period = 0.0;  // T0, s
  double phi = 0.618;
  double duration = 40.0;
  double i_dc = 0.5;
  double theta_c = 0.0;
  /// Jitter switches on for generations after this one.
  std::size_t jitter_after = 50;
  double jitter = 0.02;
  double sigma_t = 0.1;
  double epsilon = 0.1;
  double max_lag_factor = 2.25;
  double min_lag = 0.05;
  double silent_settle = 5.0;
  double silent_window = 10.0;
  body::TrialOptions trial;
};

/// {T0/phi, T0, phi T0}
std::vector<double> evolution_periods(const FilterProtocol& p);
/// {T0/sqrt(phi), sqrt(phi) T0}
std::vector<double> probe_periods(const FilterProtocol& p);

struct PeriodScore {
  double t_in = 0.0;
  std::optional<double> t_out;
  double q = 0.0;
  double h_tot = 0.0;
  double fitness = 0.0;  // h_tot * q
};

struct FilterScore {
  double sigma0 = 0.0;
  std::vector<PeriodScore> periods;
};

FilterScore score_filter(const stimulus::FilterWiring& wiring, const FilterProtocol& protocol,
                         std::span<const double> periods, std::size_t generation,
                         std::uint64_t seed);

/// H_tot,k Q_k for the three evolution periods.
Fitness evaluate_filter(const genome::Genome& g, const FilterProtocol& protocol,
                        std::size_t generation, std::uint64_t seed);

/// Final-evaluation record: Q for the five periods (three evolution periods,
/// then the two probes) followed by H_tot for the same five.
Fitness filter_final_record(const genome::Genome& g, const FilterProtocol& protocol,
                            std::size_t generation, std::uint64_t seed);

/// Highest sum of Q over the evolution periods among records whose evolution
/// periods all keep H_tot above `height_gate`. Works on filter_final_record rows.
std::optional<std::size_t> select_filter(const std::vector<Fitness>& records,
                                         double height_gate = 0.75);

}  // namespace cpgflex::evolve
