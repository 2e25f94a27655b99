#pragma once

// Rhythmic stimuli and the filter layer that feeds them into the CPG.
//
// An impulse train is low-pass filtered (exponential decay with constant
// Gamma), drives six mutually inhibiting filter neurons through gains G, and
// their outputs reach the four limb interneurons through rectifying links
// with threshold tau0 followed by the 6x4 matrix M.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cpgflex/neuro.hpp"

namespace cpgflex::stimulus {

inline constexpr std::size_t kFilterNeurons = 6;
inline constexpr std::size_t kFilterTargets = 4;
inline constexpr double kFilterThreshold = 0.15;

struct StimulusTrain {
  double period = 1.0;      // s
  double duration = 40.0;   // s
  std::size_t drop_every = 4;  // every 4th impulse (index 3 mod 4) is absent; 0 disables
  double jitter = 0.0;      // sd as a fraction of the period
  double amplitude = 1.0;
  std::uint64_t seed = 0;
};

/// Impulse times in [0, duration), sorted.
std::vector<double> generate_train(const StimulusTrain& train);

/// Exponentially decaying trace sampled at steps k * dt, k = 0..round(duration/dt)-1.
/// Each impulse adds `amplitude` at the nearest step.
std::vector<double> lowpass_signal(const std::vector<double>& impulse_times, double gamma,
                                   double dt, double duration, double amplitude = 1.0);

struct FilterWiring {
  std::array<double, kFilterNeurons> G{};
  /// W(i, j): link from filter neuron j to i; all <= 0, zero diagonal.
  std::array<std::array<double, kFilterNeurons>, kFilterNeurons> W{};
  /// M[f][limb]: weight from filter neuron f to the interneuron of `limb`.
  std::array<std::array<double, kFilterTargets>, kFilterNeurons> M{};
  double c = 2.0;
  double gamma_lowpass = 0.1;  // s
  double tau0 = kFilterThreshold;
  /// CPG neuron targeted by each column of M (defaults to the limb interneurons).
  std::array<std::size_t, kFilterTargets> targets{0, 3, 6, 9};
  neuro::NeuronParams neuron{0.052, 0.03, 2.0, 0.3, 4.0, 1.0, 0.0, 0.0, 0.0};

  void validate() const;
};

/// Currents into the four targets: M^T h(u_f - tau0).
std::array<double, kFilterTargets> filter_to_cpg_currents(
    const std::array<double, kFilterNeurons>& filter_u, const FilterWiring& wiring);

/// The filter layer alone (6 neurons).
neuro::NetworkSpec filter_network(const FilterWiring& wiring);

/// CPG block (first 12) followed by the filter neurons, with M links thresholded at tau0.
neuro::NetworkSpec attach_filter(const neuro::NetworkSpec& cpg, const FilterWiring& wiring);

/// Mean over filter neurons of the standard deviation of h(u - tau0) during a
/// silent run: `settle` seconds discarded, then `window` seconds measured.
double silent_output_sd(const FilterWiring& wiring, std::uint64_t seed, double settle = 5.0,
                        double window = 10.0, double dt = neuro::kDefaultDt);

/// One time per line, seconds. Reading rejects unsorted, negative or non-finite times.
void write_impulse_times(const std::vector<double>& times, const std::string& path);
std::vector<double> read_impulse_times(const std::string& path);
void validate_impulse_times(const std::vector<double>& times);

}  // namespace cpgflex::stimulus
