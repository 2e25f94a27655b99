#pragma once

// Small independent helpers shared by the test files.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <vector>

#include "cpgflex/neuro.hpp"

namespace testsupport {

/// Local maxima after `from` that rise more than `margin` above the
/// post-transient minimum.
inline std::size_t sustained_peaks(const std::vector<double>& s, std::size_t from,
                                   double margin = 1e-3) {
  if (s.size() < from + 3) return 0;
  const double lo = *std::min_element(s.begin() + static_cast<long>(from), s.end());
  std::size_t n = 0;
  for (std::size_t k = from + 1; k + 1 < s.size(); ++k)
    if (s[k] > s[k - 1] && s[k] >= s[k + 1] && s[k] - lo > margin) ++n;
  return n;
}

/// Mean spacing of upward mean-crossings over the second half (linear interpolation).
inline std::optional<double> crossing_period(const std::vector<double>& s, double dt) {
  const std::size_t from = s.size() / 2;
  double mean = 0.0;
  for (std::size_t k = from; k < s.size(); ++k) mean += s[k];
  mean /= static_cast<double>(s.size() - from);
  std::vector<double> times;
  for (std::size_t k = from; k + 1 < s.size(); ++k)
    if (s[k] < mean && s[k + 1] >= mean)
      times.push_back((static_cast<double>(k) + (mean - s[k]) / (s[k + 1] - s[k])) * dt);
  if (times.size() < 3) return std::nullopt;
  return (times.back() - times.front()) / static_cast<double>(times.size() - 1);
}

/// Two neurons with identical parameters inhibiting each other.
inline cpgflex::neuro::NetworkSpec pair(const cpgflex::neuro::NeuronParams& p, double w) {
  cpgflex::neuro::NetworkSpec s;
  s.params = {p, p};
  s.w = cpgflex::neuro::SquareMatrix(2);
  s.tau = cpgflex::neuro::SquareMatrix(2);
  s.w(0, 1) = w;
  s.w(1, 0) = w;
  s.roles = {cpgflex::neuro::Role::MotorA, cpgflex::neuro::Role::MotorB};
  return s;
}

inline cpgflex::neuro::NetworkSpec single(const cpgflex::neuro::NeuronParams& p) {
  cpgflex::neuro::NetworkSpec s;
  s.params = {p};
  s.w = cpgflex::neuro::SquareMatrix(1);
  s.tau = cpgflex::neuro::SquareMatrix(1);
  s.roles = {cpgflex::neuro::Role::Interneuron};
  return s;
}

/// Series of neuron i's membrane state.
inline std::vector<double> u_series(const cpgflex::neuro::Trajectory& tr, std::size_t i) {
  std::vector<double> out(tr.steps());
  for (std::size_t k = 0; k < tr.steps(); ++k) out[k] = tr.u_at(k, i);
  return out;
}

inline std::vector<double> h_series(const cpgflex::neuro::Trajectory& tr, std::size_t i) {
  std::vector<double> out(tr.steps());
  for (std::size_t k = 0; k < tr.steps(); ++k) out[k] = tr.h_at(k, i);
  return out;
}

/// Period of a pair driven by a constant tonic current `drive` (entered as c).
inline std::optional<double> pair_period(cpgflex::neuro::NeuronParams p, double w, double drive,
                                         cpgflex::neuro::Model model, double duration = 40.0) {
  using namespace cpgflex::neuro;
  p.c = drive;
  p.d = 0.0;
  const auto spec = pair(p, w);
  NetworkState init{{0.1, 0.0}, {0.0, 0.0}, 0.0};
  const auto tr = simulate(
      spec, init, [](std::size_t, double) { return StepInput{}; }, duration, kDefaultDt, model);
  const auto u = u_series(tr, 0);
  const std::size_t from = u.size() / 2;
  if (sustained_peaks(u, from, 1e-2) < 3) return std::nullopt;
  return crossing_period(u, kDefaultDt);
}

}  // namespace testsupport
