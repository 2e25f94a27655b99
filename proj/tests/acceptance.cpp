// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "cpgflex/analysis.hpp"
#include "cpgflex/body.hpp"
#include "cpgflex/evolve.hpp"
#include "cpgflex/genome.hpp"
#include "cpgflex/neuro.hpp"
#include "cpgflex/rng.hpp"
#include "cpgflex_tools/commands.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cpgflex;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_work;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void put(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Runs the CLI with output appended to the work log; returns the exit code.
int cli(const std::string& args) {
  const fs::path log = g_work / "cli.log";
  put(g_work / "last_command.txt", args);
  {
    std::ofstream l(log, std::ios::app);
    l << "$ cpgflex " << args << "\n";
  }
  const std::string cmd =
      std::string(CPGFLEX_CLI_PATH) + " " + args + " >> \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  return files;
}

bool all_positive(const evolve::Fitness& f) {
  return !f.empty() && std::all_of(f.begin(), f.end(), [](double v) { return v > 0.0; });
}

double sum(const evolve::Fitness& f) {
  double s = 0.0;
  for (double v : f) s += v;
  return s;
}

// --- 1: neuron-model contrast ---------------------------------------------------------

Outcome neuron_contrast() {
  std::mt19937_64 rng(101);
  std::size_t oscillating = 0, classic_bad = 0, modified_sensitive = 0;
  double classic_max = 0.0, modified_max = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto d = genome::decode_cpg(genome::random_genome(genome::Kind::Cpg, rng));
    const std::size_t a = neuro::cpg_index(0, neuro::Role::MotorA);
    const std::size_t b = neuro::cpg_index(0, neuro::Role::MotorB);
    const neuro::NeuronParams p = d.cpg.params[a];
    const double w = -std::max(std::abs(d.cpg.w(b, a)), 0.2);
    const double drive = p.c;
    if (drive <= 0.0) continue;
    const auto c_lo = testsupport::pair_period(p, w, drive, neuro::Model::Classic);
    const auto c_hi = testsupport::pair_period(p, w, 1.5 * drive, neuro::Model::Classic);
    const auto m_lo = testsupport::pair_period(p, w, drive, neuro::Model::Modified);
    const auto m_hi = testsupport::pair_period(p, w, 1.5 * drive, neuro::Model::Modified);
    if (c_lo && c_hi) {
      const double r = std::abs(*c_hi / *c_lo - 1.0);
      classic_max = std::max(classic_max, r);
      if (r >= 0.05) ++classic_bad;
    }
    if (m_lo && m_hi) {
      ++oscillating;
      const double r = std::abs(*m_hi / *m_lo - 1.0);
      modified_max = std::max(modified_max, r);
      if (r >= 0.05) ++modified_sensitive;
    }
  }
  return {classic_bad == 0 && modified_sensitive >= 1,
          fmt::format("classic max change {:.4f} ({} sets >= 5%), modified max change {:.3f} "
                      "({} of {} oscillating sets >= 5%)",
                      classic_max, classic_bad, modified_max, modified_sensitive, oscillating)};
}

// --- 2: oscillation-condition consistency --------------------------------------------

/// Peaks after `from` count as sustained only if the swing over the last
/// quarter of the window keeps at least half of the swing over the first.
std::size_t sustained_peaks(const std::vector<double>& u, std::size_t from) {
  const std::size_t q = (u.size() - from) / 4;
  const auto swing = [&](std::size_t lo, std::size_t hi) {
    const auto [mn, mx] = std::minmax_element(u.begin() + static_cast<long>(lo),
                                              u.begin() + static_cast<long>(hi));
    return *mx - *mn;
  };
  if (swing(u.size() - q, u.size()) < 0.5 * swing(from, from + q)) return 0;
  return testsupport::sustained_peaks(u, from);
}

Outcome oscillation_condition() {
  std::mt19937_64 rng(202);
  const neuro::Role roles[3] = {neuro::Role::Interneuron, neuro::Role::MotorA, neuro::Role::MotorB};
  std::size_t violators = 0, agree = 0, ripples = 0;
  const double dt = neuro::kDefaultDt;
  const std::size_t from = static_cast<std::size_t>(std::lround(5.0 / dt));
  for (int k = 0; k < 200; ++k) {
    const auto d = genome::decode_cpg(genome::random_genome(genome::Kind::Cpg, rng));
    const auto p = d.cpg.params[neuro::cpg_index(0, roles[k % 3])];
    for (double i_dc : {0.0, 1.0}) {
      if (neuro::check_oscillation_condition(p, i_dc)) continue;
      ++violators;
      const auto spec = testsupport::single(p);
      const neuro::NetworkState init{{0.5}, {0.0}, 0.0};
      const auto tr = neuro::simulate(
          spec, init, [i_dc](std::size_t, double) { return neuro::StepInput{i_dc, 0.0, {}}; }, 45.0);
      const auto u = testsupport::u_series(tr, 0);
      if (sustained_peaks(u, from) == 0) ++agree;
      if (testsupport::sustained_peaks(u, from) > 0) ++ripples;
    }
  }
  return {violators > 0 && agree == violators,
          fmt::format("{} of {} violating (neuron, drive) cases have no sustained peaks "
                      "({} show decaying ripples after 5 s)",
                      agree, violators, ripples)};
}

// --- 3: NSGA-III sort and reference points ---------------------------------------------

std::vector<std::vector<std::size_t>> brute_fronts(const std::vector<evolve::Fitness>& pts) {
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<bool> removed(pts.size(), false);
  std::size_t left = pts.size();
  while (left > 0) {
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (removed[i]) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
        if (removed[j] || i == j) continue;
        bool ge = true, gt = false;
        for (std::size_t m = 0; m < pts[i].size(); ++m) {
          ge = ge && pts[j][m] >= pts[i][m];
          gt = gt || pts[j][m] > pts[i][m];
        }
        dominated = ge && gt;
      }
      if (!dominated) front.push_back(i);
    }
    for (std::size_t i : front) removed[i] = true;
    left -= front.size();
    fronts.push_back(front);
  }
  return fronts;
}

Outcome nsga3_correctness() {
  Rng rng(303);
  std::size_t match = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t m = 3 + static_cast<std::size_t>(k % 2);
    const std::size_t n = 10 + uniform_index(rng, 111);
    const std::uint64_t levels = k % 4 == 0 ? 5 : 100000;
    std::vector<evolve::Fitness> pts(n, evolve::Fitness(m));
    for (auto& p : pts)
      for (double& v : p) v = static_cast<double>(uniform_index(rng, levels));
    if (evolve::nondominated_sort(pts) == brute_fronts(pts)) ++match;
  }
  const auto r4 = evolve::reference_points(4, 8).size();
  const auto r3 = evolve::reference_points(3, 12).size();
  return {match == 200 && r4 == 165 && r3 == 91,
          fmt::format("{}/200 sorts match; reference points {} (m=4, p=8), {} (m=3, p=12)", match,
                      r4, r3)};
}

// --- 4: toy problem -----------------------------------------------------------------

Outcome toy_convergence() {
  std::vector<genome::ParamEntry> e;
  for (int i = 0; i < 5; ++i) e.push_back({"digit" + std::to_string(i), 0.0, 9.0, false});
  const genome::ParamMap map(genome::Kind::Cpg, e);
  const evolve::Evaluator toy = [](const genome::Genome& g, const evolve::EvalContext&) {
    double d = 0.0, place = 1.0;
    for (int a : g.alleles) {
      d += (a - 1) * place;
      place *= 10.0;
    }
    const double x = -0.5 + 2.0 * d / 99999.0;
    return evolve::Fitness{-x * x, -(x - 1.0) * (x - 1.0)};
  };
  // Front of (-x^2, -(x-1)^2) for x in [0, 1], bounded by (-1, -1).
  const double analytic = 5.0 / 6.0;
  std::size_t ok = 0;
  double worst = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    evolve::EvolutionConfig c;
    c.population = 40;
    c.partitions = 39;
    c.objectives = 2;
    c.generations = 30;
    c.evaluations = 1;
    c.final_evaluations = 0;
    c.seed = seed;
    const auto r = evolve::run_evolution(c, map, toy);
    std::vector<evolve::Fitness> f;
    for (const auto& i : r.archive.back().population) f.push_back(i.fitness);
    const double ratio = evolve::hypervolume_2d(f, {-1.0, -1.0}) / analytic;
    worst = std::min(worst, ratio);
    if (ratio >= 0.95) ++ok;
  }
  return {ok == 5, fmt::format("{}/5 seeds reach 95% of the front hypervolume (worst {:.4f})", ok, worst)};
}

// --- 5: fitness formulas ----------------------------------------------------------------

Outcome fitness_formulas() {
  // Hand values with x0^2 = 5 and y0 = 2.5.
  struct Case {
    std::array<double, 3> x, y;
    double h, t;
    std::array<double, 4> expect;
  };
  const std::vector<Case> cases{
      {{0, 0, 0}, {0, 2.5, 0}, 1.0, 0.0, {0.0, 6.25, 0.0, 6.25}},
      {{0, 0, 0}, {-1, 2.5, 2}, 1.0, 0.0, {1.0, 6.25, 2.0, 6.25}},
      {{1, 1, 1}, {0, 0, 0}, 0.5, 1.0, {-0.2, -0.2, -0.2, 1.5625}},
      {{0.5, -1, 0}, {0.2, 1, 4}, 0.8, 0.25, {-0.25, 3.8, 4.0, 4.0}},
      {{2, 0, -2}, {-3, 5, 1}, 0.0, 3.0, {2.2, 0.0, 0.2, 0.0}},
      {{0, 3, 0}, {0, -1, 0}, 0.25, 0.0, {0.0, -7.8, 0.0, 1.5625}},
      {{-0.5, 0.5, 1.5}, {0.5, 1.5, 2.5}, 0.6, 0.5, {-0.55, 5.2, 2.05, 2.5}},
      {{0, 0, 0}, {0, 6, 0}, 1.0, 9.0, {0.0, -6.0, 0.0, 0.625}},
      {{1, 2, 3}, {-2, 2, -2}, 0.9, 0.8, {1.8, 5.2, -3.8, 3.125}},
      {{0, 0, 0.1}, {0, 2.4, 10}, 0.4, 0.6, {0.0, 6.24, 9.998, 1.5625}},
  };
  double worst = 0.0;
  for (const auto& c : cases) {
    std::vector<body::StageDisplacement> s;
    for (int j = 0; j < 3; ++j) s.push_back({c.x[j], c.y[j]});
    const auto f = evolve::cpg_fitness(s, c.h, c.t);
    for (int m = 0; m < 4; ++m) worst = std::max(worst, std::abs(f[m] - c.expect[m]));
  }
  double best_f2 = -1e300, best_y2 = 0.0;
  for (int k = 0; k <= 2000; ++k) {
    const double y2 = -5.0 + 0.0075 * k;
    const std::vector<body::StageDisplacement> s{{0, 0}, {0, y2}, {0, 0}};
    const double f2 = evolve::cpg_fitness(s, 1.0, 0.0)[1];
    if (f2 > best_f2) {
      best_f2 = f2;
      best_y2 = y2;
    }
  }
  const std::vector<body::StageDisplacement> top{{0, 0}, {0, 2.5}, {0, 0}};
  const bool peak = evolve::cpg_fitness(top, 1.0, 0.0)[1] == 6.25 && best_f2 <= 6.25 &&
                    std::abs(best_y2 - 2.5) < 0.0075;
  return {worst <= 1e-12 && peak,
          fmt::format("max |error| {:.2e} over 10 tuples; F2 peak {} at y2 = {}", worst, best_f2, best_y2)};
}

// --- 6: Q metric -------------------------------------------------------------------------

Outcome q_metric() {
  const double q1 = analysis::entrainment_q(1.0, 1.0, 0.0);
  const double q2 = analysis::entrainment_q(0.5, 1.0, 0.0);
  const double q3 = analysis::entrainment_q(0.8, 1.0, 0.0);
  const bool examples = q1 == 1.0 && q2 == 1.0 && std::abs(q3 - 0.2) <= 4e-16;
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> t_in(0.2, 3.0), ratio(0.05, 4.0);
  std::size_t agree = 0;
  const std::size_t n = 100000;
  for (std::size_t k = 0; k < n; ++k) {
    const double ti = t_in(rng), to = ratio(rng) * ti;
    const double r = 2.0 * to / ti;
    const double d = std::abs(r - std::round(r));
    if ((analysis::entrainment_q(to, ti, 0.0) > 0.9) == (d < 0.1 / 9.0)) ++agree;
  }
  return {examples && agree == n,
          fmt::format("examples {}, {}, {}; threshold rule holds in {}/{} random cases", q1, q2, q3,
                      agree, n)};
}

// --- 7: desk-scale CPG evolution -----------------------------------------------------------

struct DeskRun {
  fs::path dir;
  std::vector<json> individuals;
};

std::vector<DeskRun> g_desk;

Outcome desk_pipeline() {
  std::size_t positive_runs = 0;
  std::string counts;
  for (int seed = 1; seed <= 5; ++seed) {
    const fs::path dir = g_work / "c7" / fmt::format("seed{}", seed);
    const fs::path cfg = g_work / "c7" / fmt::format("config_seed{}.json", seed);
    put(cfg, json{{"seed", seed},
                  {"evolution",
                   {{"population", 40}, {"partitions", 5}, {"generations", 40}, {"evaluations", 5},
                    {"final_evaluations", 15}}}}
                 .dump(2));
    if (cli(fmt::format("evolve-cpg --quiet --config {} --out {}", cfg.string(), dir.string())) != 0)
      return {false, fmt::format("evolve-cpg failed for seed {}", seed)};
    const json pop = json::parse(slurp(dir / "final_population.json"));
    DeskRun run{dir, {}};
    std::size_t n = 0;
    for (const auto& ind : pop.at("individuals")) {
      run.individuals.push_back(ind);
      if (!ind.at("failed").get<bool>() && all_positive(ind.at("fitness").get<evolve::Fitness>())) ++n;
    }
    if (n > 0) ++positive_runs;
    counts += fmt::format("{}{}", counts.empty() ? "" : ",", n);
    g_desk.push_back(std::move(run));
  }
  return {positive_runs >= 3,
          fmt::format("{}/5 runs with an all-positive CPG (all-positive counts per seed: {})",
                      positive_runs, counts)};
}

// --- 8: desk-scale entrainment -------------------------------------------------------------

struct Crossing {
  bool ok = false;
  std::string detail;
};

/// Midpoint crossings of the sync trace around stimulus start and stop.
Crossing onset_offset(const fs::path& sync_csv, double start, double stop, double duration,
                      double stim_period, double natural_period) {
  std::vector<double> t, s;
  std::ifstream in(sync_csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    t.push_back(std::stod(line.substr(0, comma)));
    s.push_back(std::stod(line.substr(comma + 1)));
  }
  const auto mean_over = [&](double lo, double hi) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < t.size(); ++k)
      if (t[k] >= lo && t[k] < hi) {
        acc += s[k];
        ++n;
      }
    return n ? acc / static_cast<double>(n) : std::nan("");
  };
  const double base = mean_over(start / 2.0, start);
  const double plateau = mean_over((start + stop) / 2.0, stop);
  const double after = mean_over((stop + duration) / 2.0, duration - (duration - stop) / 4.0);
  const double mid_on = 0.5 * (base + plateau), mid_off = 0.5 * (plateau + after);
  std::optional<double> on, off;
  for (std::size_t k = 1; k < t.size() && !on; ++k)
    if (t[k] >= start - 5.0 * stim_period && s[k - 1] < mid_on && s[k] >= mid_on) on = t[k];
  for (std::size_t k = 1; k < t.size() && !off; ++k)
    if (t[k] >= stop - 5.0 * natural_period && s[k - 1] > mid_off && s[k] <= mid_off) off = t[k];
  const bool rise = plateau - base >= 0.2, fall = plateau - after >= 0.2;
  const bool on_ok = on && std::abs(*on - start) <= 5.0 * stim_period;
  const bool off_ok = off && std::abs(*off - stop) <= 5.0 * natural_period;
  return {rise && fall && on_ok && off_ok,
          fmt::format("sync before/during/after {:.2f}/{:.2f}/{:.2f}, onset {} s, offset {} s",
                      base, plateau, after, on ? fmt::format("{:+.2f}", *on - start) : "none",
                      off ? fmt::format("{:+.2f}", *off - stop) : "none")};
}

Outcome desk_entrainment() {
  struct Candidate {
    genome::Genome g;
    double score;
    int seed;
  };
  std::vector<Candidate> cands;
  for (std::size_t r = 0; r < g_desk.size(); ++r)
    for (const auto& ind : g_desk[r].individuals) {
      const auto f = ind.at("fitness").get<evolve::Fitness>();
      if (!ind.at("failed").get<bool>() && all_positive(f))
        cands.push_back({genome::genome_from_json(ind.at("genome")), sum(f), static_cast<int>(r + 1)});
    }
  if (cands.empty()) return {false, "no all-positive CPG from the desk-scale runs"};
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  std::optional<double> t0;
  const Candidate* best = nullptr;
  for (const auto& c : cands) {
    const auto d = genome::decode_cpg(c.g);
    t0 = evolve::measure_natural_period(d.cpg, d.command, body::MorphologyParams::normal(), 1);
    if (t0) {
      best = &c;
      break;
    }
  }
  if (!best) return {false, "no all-positive CPG has a measurable walking period"};
  tools::Controller ctrl;
  ctrl.name = "desk_best";
  ctrl.cpg = best->g;
  ctrl.natural_period = t0;
  ctrl.info = {{"source_seed", best->seed}, {"fitness_sum", best->score}};
  const fs::path ctrl_path = g_work / "c8" / "cpg_controller.json";
  put(ctrl_path, tools::to_json(ctrl).dump(2));

  std::string log;
  for (int seed = 1; seed <= 3; ++seed) {
    const fs::path dir = g_work / "c8" / fmt::format("filter_seed{}", seed);
    const fs::path cfg = g_work / "c8" / fmt::format("config_seed{}.json", seed);
    put(cfg, json{{"seed", seed},
                  {"controller", ctrl_path.string()},
                  {"evolution", {{"population", 40}, {"partitions", 7}, {"generations", 30},
                                 {"final_evaluations", 5}}}}
                 .dump(2));
    if (cli(fmt::format("evolve-filter --quiet --config {} --out {}", cfg.string(), dir.string())) != 0)
      return {false, fmt::format("evolve-filter failed for seed {}", seed)};
    const json sel = json::parse(slurp(dir / "selection.json"));
    if (sel.at("selected").is_null()) {
      log += fmt::format(" seed {}: no filter keeps H_tot >= 0.75;", seed);
      continue;
    }
    const double mean_q = sel.at("mean_q");
    const auto h = sel.at("h_tot").get<std::vector<double>>();
    const auto q = sel.at("q").get<std::vector<double>>();
    const bool tall = std::all_of(h.begin(), h.end(), [](double v) { return v >= 0.75; });
    log += fmt::format(" seed {}: mean Q {:.3f}, min H_tot {:.3f}", seed, mean_q,
                       *std::min_element(h.begin(), h.end()));
    if (mean_q < 0.5 || !tall) {
      log += ";";
      continue;
    }
    const auto periods = sel.at("evolution_periods").get<std::vector<double>>();
    const std::size_t pick = q[0] >= q[2] ? 0 : 2;
    const double p = periods[pick];
    const double span = std::max(8.0, 10.0 * std::max(p, *t0));
    const double start = span, stop = 2.0 * span, duration = 3.0 * span;
    const fs::path ecfg = g_work / "c8" / fmt::format("entrain_seed{}.json", seed);
    put(ecfg, json{{"seed", seed},
                   {"controller", (dir / "controller.json").string()},
                   {"stimulus", {{"period", p}, {"start", start}, {"stop", stop}, {"duration", duration}}},
                   {"probe_period", p}}
                  .dump(2));
    const fs::path edir = g_work / "c8" / fmt::format("entrain_seed{}", seed);
    if (cli(fmt::format("entrain --quiet --config {} --out {}", ecfg.string(), edir.string())) != 0)
      return {false, fmt::format("entrain failed for seed {}", seed)};
    const auto cross = onset_offset(edir / "sync.csv", start, stop, duration, p, *t0);
    log += fmt::format(", stimulus {:.3f} s: {};", p, cross.detail);
    if (cross.ok)
      return {true, fmt::format("T0 {:.3f} s;{}", *t0, log)};
  }
  return {false, fmt::format("T0 {:.3f} s;{}", *t0, log)};
}

// --- 9: analysis oracles -----------------------------------------------------------------

Outcome analysis_oracles() {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> period(0.3, 3.0), phase(0.0, two_pi);
  const double dt = 0.008;
  std::size_t recovered = 0;
  for (int k = 0; k < 100; ++k) {
    const double T = period(rng), ph = phase(rng);
    const double max_lag = 2.25 * T;
    const std::size_t n = static_cast<std::size_t>(std::ceil(8.0 * max_lag / dt));
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * dt;
      x[i] = std::cos(two_pi * t / T + ph);
      y[i] = std::sin(two_pi * t / T + ph);
    }
    const auto est = analysis::estimate_period(x, y, dt, 0.05, max_lag);
    if (est && std::abs(*est - T) <= dt) ++recovered;
  }

  const std::array<std::pair<analysis::GaitClass, std::array<double, 4>>, 4> patterns{{
      {analysis::GaitClass::Walk, {0.0, 0.5, 0.75, 0.25}},
      {analysis::GaitClass::Trot, {0.0, 0.5, 0.5, 0.0}},
      {analysis::GaitClass::Pace, {0.0, 0.5, 0.0, 0.5}},
      {analysis::GaitClass::Bound, {0.0, 0.0, 0.5, 0.5}},
  }};
  std::normal_distribution<double> jitter(0.0, 0.02);
  std::size_t labelled = 0;
  for (const auto& [gait, phases] : patterns)
    for (int k = 0; k < 10; ++k) {
      const double T = period(rng) / 2.0 + 0.3, ph0 = phase(rng);
      std::array<double, 4> off{};
      for (std::size_t l = 0; l < 4; ++l) off[l] = phases[l] + jitter(rng);
      std::array<std::vector<double>, 4> s;
      for (std::size_t i = 0; i < 2500; ++i) {
        const double t = static_cast<double>(i) * dt;
        for (std::size_t l = 0; l < 4; ++l)
          s[l].push_back(std::max(0.0, std::cos(two_pi * (t / T - off[l]) + ph0)));
      }
      if (analysis::classify_gait(analysis::interlimb_correlation(s)) == gait) ++labelled;
    }
  return {recovered == 100 && labelled == 40,
          fmt::format("{}/100 periods within one sample; {}/40 gait patterns labelled", recovered, labelled)};
}

// --- 10: determinism ------------------------------------------------------------------------

Outcome determinism() {
  const fs::path root = g_work / "c10";
  fs::create_directories(root);
  std::mt19937_64 rng(1010);
  tools::Controller c;
  c.name = "determinism";
  c.cpg = genome::random_genome(genome::Kind::Cpg, rng);
  c.natural_period = 0.7;
  c.filter = genome::random_genome(genome::Kind::Filter, rng);
  const fs::path ctrl = root / "controller.json";
  put(ctrl, tools::to_json(c).dump(2));

  put(root / "cpg.json", json{{"seed", 4},
                              {"evolution", {{"population", 8}, {"partitions", 3}, {"generations", 2},
                                             {"evaluations", 2}, {"final_evaluations", 2}}},
                              {"protocol", {{"stage_duration", 2.0}, {"burn_in", 1.0}, {"actuation_ramp", 0.5}}}}
                             .dump(2));
  put(root / "filter.json", json{{"seed", 5},
                                 {"controller", ctrl.string()},
                                 {"evolution", {{"population", 4}, {"partitions", 2}, {"generations", 2},
                                                {"final_evaluations", 2}}},
                                 {"protocol", {{"duration", 6.0}, {"silent_settle", 0.5}, {"silent_window", 1.0}}}}
                                .dump(2));
  put(root / "entrain.json", json{{"seed", 6}, {"controller", ctrl.string()}}.dump(2));

  std::vector<std::pair<std::string, std::string>> runs{
      {"evolve-cpg", "evolve-cpg --quiet --config " + (root / "cpg.json").string()},
      {"evolve-filter", "evolve-filter --quiet --config " + (root / "filter.json").string()},
      {"sweep", "sweep --quiet --controller " + ctrl.string() +
                    " --i-dc 0.3,0.7 --theta-c -0.1,0.1 --duration 5"},
      {"entrain", "entrain --quiet --config " + (root / "entrain.json").string()},
  };
  const DeskRun* with_reps = nullptr;
  for (const auto& r : g_desk)
    for (const auto& ind : r.individuals)
      if (!with_reps && all_positive(ind.at("fitness").get<evolve::Fitness>())) with_reps = &r;
  if (with_reps) runs.push_back({"reps", "reps --quiet --from " + with_reps->dir.string()});

  std::vector<std::string> same, differ;
  const auto check = [&](const std::string& name, const std::string& first) {
    const fs::path a = root / (name + "_a"), b = root / (name + "_b");
    if (cli(first + " --workers 1 --out " + a.string()) != 0) {
      differ.push_back(name + " (first run failed)");
      return;
    }
    const std::string command = name;
    if (cli(command + " --quiet --workers 3 --config " + (a / "manifest.json").string() + " --out " +
            b.string()) != 0) {
      differ.push_back(name + " (re-run failed)");
      return;
    }
    (tree(a) == tree(b) ? same : differ).push_back(name);
  };
  for (const auto& [name, args] : runs) check(name, args);
  check("analyze", "analyze --quiet " + (root / "entrain_a" / "trajectory.csv").string());

  std::string s;
  for (const auto& n : same) s += (s.empty() ? "" : ", ") + n;
  std::string d;
  for (const auto& n : differ) d += (d.empty() ? "" : ", ") + n;
  return {differ.empty() && with_reps,
          fmt::format("identical: {}{}{}", s, d.empty() ? "" : "; differing: " + d,
                      with_reps ? "" : "; reps skipped (no all-positive population)")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cpgflex acceptance suite"};
  std::string workdir = (fs::temp_directory_path() / "cpgflex_acceptance").string();
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory (cleared first)");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  g_work = workdir;
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, neuron_contrast},  {2, oscillation_condition}, {3, nsga3_correctness},
      {4, toy_convergence},  {5, fitness_formulas},      {6, q_metric},
      {7, desk_pipeline},    {8, desk_entrainment},      {9, analysis_oracles},
      {10, determinism},
  };
  // Wall-clock limits from the criteria, in seconds.
  const std::map<int, double> limits{{1, 10.0}, {2, 60.0}, {4, 30.0}, {7, 7200.0}};

  std::ofstream report(g_work / "report.txt");
  bool all = true;
  for (const auto& [n, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (const auto it = limits.find(n); it != limits.end() && secs > it->second) {
      o.pass = false;
      o.detail += fmt::format("; over the {:.0f} s limit", it->second);
    }
    all = all && o.pass;
    const auto line =
        fmt::format("criterion {:>2} {}: {} [{:.1f} s]\n", n, o.pass ? "PASS" : "FAIL", o.detail, secs);
    fmt::print("{}", line);
    std::fflush(stdout);
    report << line << std::flush;
  }
  return all ? 0 : 1;
}
