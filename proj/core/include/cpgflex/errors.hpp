#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpgflex {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent dimensions or invalid configuration values.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Input data failed validation (allele out of range, unsorted stimulus, ...).
/// `index()` is the offending element when one is known.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::size_t index = npos)
      : Error(what), index_(index) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// A neuron state became non-finite during integration.
class IntegrationBlowup : public Error {
 public:
  IntegrationBlowup(std::size_t neuron, double time)
      : Error("integration blow-up at neuron " + std::to_string(neuron) + ", t=" +
              std::to_string(time)),
        neuron_(neuron),
        time_(time) {}

  std::size_t neuron() const noexcept { return neuron_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t neuron_;
  double time_;
};

/// The rigid-body simulation produced a non-finite state.
class SimulationDiverged : public Error {
 public:
  using Error::Error;
};

/// Too few samples for the requested analysis window.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Least-squares design matrix without full column rank.
class RankDeficient : public Error {
 public:
  RankDeficient(const std::string& what, std::vector<std::size_t> columns)
      : Error(what), columns_(std::move(columns)) {}

  const std::vector<std::size_t>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::size_t> columns_;
};

}  // namespace cpgflex
