#include "cpgflex/stimulus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cpgflex/errors.hpp"
#include "cpgflex/rng.hpp"

namespace cpgflex::stimulus {

std::vector<double> generate_train(const StimulusTrain& train) {
  if (!(train.period > 0.0)) throw ConfigurationError("stimulus period must be positive");
  if (!(train.jitter >= 0.0)) throw ConfigurationError("jitter must be non-negative");
  Rng rng(train.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> times;
  for (std::size_t k = 0;; ++k) {
    const double nominal = static_cast<double>(k) * train.period;
    if (nominal >= train.duration) break;
    if (train.drop_every > 0 && k % train.drop_every == train.drop_every - 1) continue;
    double t = nominal;
    if (train.jitter > 0.0) t += noise(rng) * train.jitter * train.period;
    t = std::max(t, 0.0);
    if (t < train.duration) times.push_back(t);
  }
  std::sort(times.begin(), times.end());
  return times;
}

std::vector<double> lowpass_signal(const std::vector<double>& impulse_times, double gamma,
                                   double dt, double duration, double amplitude) {
  if (!(gamma > 0.0)) throw ConfigurationError("low-pass time constant must be positive");
  if (!(dt > 0.0)) throw ConfigurationError("dt must be positive");
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  std::vector<double> kicks(steps, 0.0);
  for (double t : impulse_times) {
    const auto k = static_cast<long long>(std::llround(t / dt));
    if (k >= 0 && static_cast<std::size_t>(k) < steps) kicks[static_cast<std::size_t>(k)] += amplitude;
  }
  const double decay = std::exp(-dt / gamma);
  std::vector<double> out(steps);
  double level = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    level = level * decay + kicks[k];
    out[k] = level;
  }
  return out;
}

void FilterWiring::validate() const {
  for (std::size_t i = 0; i < kFilterNeurons; ++i) {
    if (W[i][i] != 0.0) throw ConfigurationError("filter self-connection");
    for (std::size_t j = 0; j < kFilterNeurons; ++j)
      if (W[i][j] > 0.0) throw ConfigurationError("filter weights must be inhibitory (<= 0)");
  }
  if (!(gamma_lowpass > 0.0)) throw ConfigurationError("low-pass constant must be positive");
  if (!(tau0 >= 0.0)) throw ConfigurationError("filter threshold must be non-negative");
}

std::array<double, kFilterTargets> filter_to_cpg_currents(
    const std::array<double, kFilterNeurons>& filter_u, const FilterWiring& wiring) {
  std::array<double, kFilterTargets> out{};
  for (std::size_t f = 0; f < kFilterNeurons; ++f) {
    const double h = neuro::rectify(filter_u[f] - wiring.tau0);
    for (std::size_t l = 0; l < kFilterTargets; ++l) out[l] += wiring.M[f][l] * h;
  }
  return out;
}

neuro::NetworkSpec filter_network(const FilterWiring& wiring) {
  wiring.validate();
  neuro::NetworkSpec spec;
  spec.params.resize(kFilterNeurons);
  spec.roles.assign(kFilterNeurons, neuro::Role::Filter);
  spec.w = neuro::SquareMatrix(kFilterNeurons);
  spec.tau = neuro::SquareMatrix(kFilterNeurons);
  for (std::size_t i = 0; i < kFilterNeurons; ++i) {
    auto p = wiring.neuron;
    p.c = wiring.c;
    p.d = 0.0;
    p.G = wiring.G[i];
    spec.params[i] = p;
    for (std::size_t j = 0; j < kFilterNeurons; ++j) spec.w(i, j) = wiring.W[i][j];
  }
  return spec;
}

neuro::NetworkSpec attach_filter(const neuro::NetworkSpec& cpg, const FilterWiring& wiring) {
  if (cpg.size() != neuro::kCpgNeurons)
    throw ConfigurationError("attach_filter expects a bare 12-neuron CPG");
  const neuro::NetworkSpec filter = filter_network(wiring);
  const std::size_t n = neuro::kCpgNeurons + kFilterNeurons;
  neuro::NetworkSpec spec;
  spec.params = cpg.params;
  spec.params.insert(spec.params.end(), filter.params.begin(), filter.params.end());
  spec.roles = cpg.roles;
  spec.roles.insert(spec.roles.end(), filter.roles.begin(), filter.roles.end());
  spec.w = neuro::SquareMatrix(n);
  spec.tau = neuro::SquareMatrix(n);
  for (std::size_t i = 0; i < neuro::kCpgNeurons; ++i)
    for (std::size_t j = 0; j < neuro::kCpgNeurons; ++j) {
      spec.w(i, j) = cpg.w(i, j);
      spec.tau(i, j) = cpg.tau(i, j);
    }
  for (std::size_t i = 0; i < kFilterNeurons; ++i)
    for (std::size_t j = 0; j < kFilterNeurons; ++j)
      spec.w(neuro::kCpgNeurons + i, neuro::kCpgNeurons + j) = filter.w(i, j);
  for (std::size_t f = 0; f < kFilterNeurons; ++f)
    for (std::size_t l = 0; l < kFilterTargets; ++l) {
      const std::size_t target = wiring.targets[l];
      if (target >= neuro::kCpgNeurons) throw ConfigurationError("filter target outside the CPG");
      spec.w(target, neuro::kCpgNeurons + f) = wiring.M[f][l];
      spec.tau(target, neuro::kCpgNeurons + f) = wiring.tau0;
    }
  spec.validate();
  return spec;
}

double silent_output_sd(const FilterWiring& wiring, std::uint64_t seed, double settle,
                        double window, double dt) {
  const neuro::NetworkSpec spec = filter_network(wiring);
  neuro::Integrator net(spec, neuro::random_initial_state(kFilterNeurons, seed));
  const neuro::StepInput silent;
  const auto settle_steps = static_cast<std::size_t>(std::llround(settle / dt));
  const auto window_steps = static_cast<std::size_t>(std::llround(window / dt));
  for (std::size_t k = 0; k < settle_steps; ++k) net.step(silent, dt);
  std::array<double, kFilterNeurons> sum{}, sum_sq{};
  // Shifted by the first sample to keep the variance well conditioned.
  std::array<double, kFilterNeurons> shift{};
  for (std::size_t i = 0; i < kFilterNeurons; ++i)
    shift[i] = neuro::rectify(net.state().u[i] - wiring.tau0);
  for (std::size_t k = 0; k < window_steps; ++k) {
    net.step(silent, dt);
    for (std::size_t i = 0; i < kFilterNeurons; ++i) {
      const double x = neuro::rectify(net.state().u[i] - wiring.tau0) - shift[i];
      sum[i] += x;
      sum_sq[i] += x * x;
    }
  }
  if (window_steps == 0) return 0.0;
  const double n = static_cast<double>(window_steps);
  double total = 0.0;
  for (std::size_t i = 0; i < kFilterNeurons; ++i) {
    const double mean = sum[i] / n;
    total += std::sqrt(std::max(0.0, sum_sq[i] / n - mean * mean));
  }
  return total / static_cast<double>(kFilterNeurons);
}

void validate_impulse_times(const std::vector<double>& times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0)
      throw ValidationError("impulse time " + std::to_string(i) + " is negative or not finite", i);
    if (i > 0 && times[i] < times[i - 1])
      throw ValidationError("impulse times are not sorted (line " + std::to_string(i + 1) + ")",
                            i);
  }
}

void write_impulse_times(const std::vector<double>& times, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigurationError("cannot write " + path);
  for (double t : times) out << fmt::format("{:.17g}\n", t);
}

std::vector<double> read_impulse_times(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read stimulus file " + path);
  std::vector<double> times;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream is(line);
    double t;
    if (!(is >> t))
      throw ValidationError("cannot parse impulse time on line " + std::to_string(line_no),
                            times.size());
    times.push_back(t);
  }
  validate_impulse_times(times);
  return times;
}

}  // namespace cpgflex::stimulus
