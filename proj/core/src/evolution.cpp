#include <algorithm>
#include <cmath>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cpgflex/errors.hpp"
#include "cpgflex/evolve.hpp"

namespace cpgflex::evolve {

namespace {

// Stream tags keep evaluation seeds of search and final phases apart.
constexpr std::uint64_t kSearchStream = 0x5EA4C8;
constexpr std::uint64_t kFinalStream = 0xF1A1;
constexpr std::uint64_t kLoopStream = 0x100B;

Fitness failed_fitness(std::size_t objectives) { return Fitness(objectives, kFailedFitness); }

void check_fitness(const Fitness& f, std::size_t objectives) {
  if (f.size() != objectives)
    throw ConfigurationError("evaluator returned " + std::to_string(f.size()) +
                             " objectives, expected " + std::to_string(objectives));
  for (double v : f)
    if (!std::isfinite(v)) throw ConfigurationError("evaluator returned a non-finite objective");
}

// Evaluates every genome `evaluations` times; seeds depend only on (stream, generation, index, e).
std::vector<Individual> evaluate_all(const std::vector<genome::Genome>& genomes,
                                     std::size_t generation, std::size_t evaluations,
                                     std::size_t objectives, std::uint64_t seed,
                                     std::uint64_t stream, const Evaluator& evaluate,
                                     unsigned workers, bool check_length) {
  std::vector<Individual> out(genomes.size());
  std::vector<std::string> errors(genomes.size() * evaluations);
  std::vector<Fitness> results(genomes.size() * evaluations);
  parallel_for(results.size(), workers, [&](std::size_t job) {
    const std::size_t i = job / evaluations, e = job % evaluations;
    EvalContext ctx{generation, i, e, derive_seed(seed ^ stream, generation, i, e)};
    try {
      Fitness f = evaluate(genomes[i], ctx);
      if (check_length) check_fitness(f, objectives);
      results[job] = std::move(f);
    } catch (const std::exception& ex) {
      errors[job] = ex.what();
    }
  });
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    Individual& ind = out[i];
    ind.genome = genomes[i];
    for (std::size_t e = 0; e < evaluations; ++e) {
      const std::size_t job = i * evaluations + e;
      if (!errors[job].empty()) {
        ind.failed = true;
        if (ind.error.empty()) ind.error = errors[job];
      }
    }
    if (ind.failed) {
      std::size_t width = objectives;
      for (std::size_t e = 0; e < evaluations; ++e)
        if (!results[i * evaluations + e].empty()) width = results[i * evaluations + e].size();
      for (std::size_t e = 0; e < evaluations; ++e) {
        Fitness f = results[i * evaluations + e];
        ind.evaluations.push_back(f.empty() ? failed_fitness(width) : f);
      }
      ind.fitness = failed_fitness(width);
    } else {
      for (std::size_t e = 0; e < evaluations; ++e)
        ind.evaluations.push_back(std::move(results[i * evaluations + e]));
      ind.fitness = median_fitness(ind.evaluations);
    }
  }
  return out;
}

}  // namespace

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& job) {
  const unsigned threads =
      static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(workers, n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

EvolutionConfig EvolutionConfig::cpg_defaults() { return {}; }

EvolutionConfig EvolutionConfig::filter_defaults() {
  EvolutionConfig c;
  c.population = 92;
  c.partitions = 12;
  c.objectives = 3;
  c.generations = 150;
  c.p_c = 1.0;
  c.p_m = 0.05;
  c.evaluations = 1;
  c.final_evaluations = 5;
  return c;
}

void EvolutionConfig::validate() const {
  if (population < 2 || population % 2 != 0)
    throw ConfigurationError("population must be even and at least 2");
  if (objectives < 2) throw ConfigurationError("objectives must be at least 2");
  if (partitions < 1) throw ConfigurationError("partitions must be at least 1");
  if (!(p_c >= 0.0 && p_c <= 1.0)) throw ConfigurationError("p_c must lie in [0, 1]");
  if (!(p_m >= 0.0 && p_m <= 1.0)) throw ConfigurationError("p_m must lie in [0, 1]");
  if (evaluations < 1) throw ConfigurationError("evaluations must be at least 1");
}

nlohmann::json to_json(const EvolutionConfig& c) {
  return {{"population", c.population},   {"partitions", c.partitions},
          {"objectives", c.objectives},   {"generations", c.generations},
          {"p_c", c.p_c},                 {"p_m", c.p_m},
          {"evaluations", c.evaluations}, {"final_evaluations", c.final_evaluations},
          {"seed", c.seed}};
}

EvolutionConfig config_from_json(const nlohmann::json& doc, EvolutionConfig c) {
  if (!doc.is_object()) throw ConfigurationError("evolution config must be an object");
  static const char* kKnown[] = {"population", "partitions",  "objectives",
                                 "generations", "p_c",        "p_m",
                                 "evaluations", "final_evaluations", "seed"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find_if(std::begin(kKnown), std::end(kKnown),
                     [&](const char* k) { return key == k; }) == std::end(kKnown))
      throw ConfigurationError("unknown evolution field '" + key + "'");
  }
  const auto read = [&](const char* key, auto& field) {
    if (!doc.contains(key)) return;
    try {
      doc.at(key).get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw ConfigurationError(std::string("evolution field '") + key + "' has the wrong type");
    }
  };
  read("population", c.population);
  read("partitions", c.partitions);
  read("objectives", c.objectives);
  read("generations", c.generations);
  read("p_c", c.p_c);
  read("p_m", c.p_m);
  read("evaluations", c.evaluations);
  read("final_evaluations", c.final_evaluations);
  read("seed", c.seed);
  c.validate();
  return c;
}

namespace {

nlohmann::json individual_json(const Individual& ind) {
  nlohmann::json j{{"alleles", ind.genome.alleles},
                   {"fitness", ind.fitness},
                   {"evaluations", ind.evaluations},
                   {"failed", ind.failed}};
  if (!ind.error.empty()) j["error"] = ind.error;
  return j;
}

}  // namespace

nlohmann::json to_json(const Checkpoint& c, const EvolutionConfig& config,
                       const genome::ParamMap& map) {
  nlohmann::json pop = nlohmann::json::array();
  for (const auto& ind : c.population) pop.push_back(individual_json(ind));
  return {{"schema", "cpgflex.checkpoint/1"},
          {"kind", genome::to_string(map.kind())},
          {"map_hash", map.version_hash()},
          {"generation", c.generation},
          {"config", to_json(config)},
          {"rng", c.rng_state},
          {"population", pop}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc, const genome::ParamMap& map) {
  try {
    if (doc.at("schema").get<std::string>() != "cpgflex.checkpoint/1")
      throw ValidationError("not a checkpoint document");
    if (genome::kind_from_string(doc.at("kind").get<std::string>()) != map.kind())
      throw ValidationError("checkpoint genome kind does not match");
    if (doc.at("map_hash").get<std::string>() != map.version_hash())
      throw ValidationError("checkpoint was written for a different parameter map");
    Checkpoint c;
    c.generation = doc.at("generation").get<std::size_t>();
    c.rng_state = doc.at("rng").get<std::string>();
    for (const auto& j : doc.at("population")) {
      Individual ind;
      ind.genome = {map.kind(), j.at("alleles").get<std::vector<int>>()};
      genome::validate(ind.genome, map);
      ind.fitness = j.at("fitness").get<Fitness>();
      ind.evaluations = j.at("evaluations").get<std::vector<Fitness>>();
      ind.failed = j.at("failed").get<bool>();
      if (j.contains("error")) ind.error = j["error"].get<std::string>();
      c.population.push_back(std::move(ind));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

EvolutionResult run_evolution(const EvolutionConfig& config, const genome::ParamMap& map,
                              const Evaluator& evaluate, const EvolutionOptions& options) {
  config.validate();
  const auto refs = reference_points(config.objectives, config.partitions);
  EvolutionResult result;
  Rng rng;
  Checkpoint current;

  if (options.resume) {
    current = *options.resume;
    if (current.population.size() != config.population)
      throw ConfigurationError("checkpoint population size does not match the config");
    rng = load_rng(current.rng_state);
  } else {
    rng.seed(derive_seed(config.seed, kLoopStream));
    std::vector<genome::Genome> initial;
    for (std::size_t i = 0; i < config.population; ++i) initial.push_back(random_genome(map, rng));
    current.generation = 0;
    current.population = evaluate_all(initial, 0, config.evaluations, config.objectives,
                                      config.seed, kSearchStream, evaluate, options.workers, true);
    current.rng_state = save_rng(rng);
    result.archive.push_back(current);
    if (options.on_generation) options.on_generation(current);
  }

  for (std::size_t gen = current.generation + 1; gen <= config.generations; ++gen) {
    std::vector<genome::Genome> parents;
    for (const auto& ind : current.population) parents.push_back(ind.genome);
    const auto children = vary(parents, config.p_c, config.p_m, rng);
    auto offspring = evaluate_all(children, gen, config.evaluations, config.objectives,
                                  config.seed, kSearchStream, evaluate, options.workers, true);
    std::vector<Individual> pool = std::move(current.population);
    pool.insert(pool.end(), std::make_move_iterator(offspring.begin()),
                std::make_move_iterator(offspring.end()));
    std::vector<Fitness> fits;
    for (const auto& ind : pool) fits.push_back(ind.fitness);
    const auto keep = nsga3_select(fits, refs, config.population, rng);
    Checkpoint next;
    next.generation = gen;
    for (std::size_t i : keep) next.population.push_back(std::move(pool[i]));
    next.rng_state = save_rng(rng);
    current = std::move(next);
    result.archive.push_back(current);
    if (options.on_generation) options.on_generation(current);
  }

  if (config.final_evaluations > 0) {
    std::vector<genome::Genome> finals;
    for (const auto& ind : current.population) finals.push_back(ind.genome);
    const Evaluator& fe = options.final_evaluator ? options.final_evaluator : evaluate;
    result.final_population =
        evaluate_all(finals, current.generation, config.final_evaluations, config.objectives,
                     config.seed, kFinalStream, fe, options.workers, !options.final_evaluator);
  }
  return result;
}

std::string summary_csv(const std::vector<Checkpoint>& archive, std::size_t objectives) {
  std::string out = "generation";
  for (std::size_t j = 0; j < objectives; ++j) out += fmt::format(",f{}_max,f{}_median", j + 1, j + 1);
  out += '\n';
  for (const auto& c : archive) {
    out += fmt::format("{}", c.generation);
    std::vector<Fitness> fits;
    for (const auto& ind : c.population) fits.push_back(ind.fitness);
    const Fitness med = median_fitness(fits);
    for (std::size_t j = 0; j < objectives; ++j) {
      double best = fits.front()[j];
      for (const auto& f : fits) best = std::max(best, f[j]);
      out += fmt::format(",{:.17g},{:.17g}", best, med[j]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace cpgflex::evolve
