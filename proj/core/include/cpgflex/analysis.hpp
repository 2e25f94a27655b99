#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpgflex/body.hpp"
#include "cpgflex/neuro.hpp"

namespace cpgflex::analysis {

// --- period ---------------------------------------------------------------

struct PeakRule {
  double min_prominence = 0.05;
  /// Normalized autocorrelation a peak must reach to count.
  double min_height = 0.3;
  /// Peaks this close to the highest one count as equal; the shortest lag wins.
  double tie_tolerance = 0.02;
};

/// Period of the rhythm in (x, y) from the autocorrelation of the
/// mean-subtracted complex series z = x + i y, using the real part of the
/// unbiased normalized autocorrelation. Returns the lag of its highest local
/// maximum in [min_lag, max_lag] that satisfies `rule` (harmonics of equal
/// height resolve to the shortest lag), or nullopt.
/// Throws InsufficientData when the series is shorter than 2 * max_lag.
std::optional<double> estimate_period(std::span<const double> x, std::span<const double> y,
                                      double dt, double min_lag, double max_lag,
                                      const PeakRule& rule = {});

/// The normalized autocorrelation used above, for lags 0..max_lag_steps.
std::vector<double> complex_autocorrelation(std::span<const double> x, std::span<const double> y,
                                            std::size_t max_lag_steps);

// --- interlimb correlation and gait ---------------------------------------

using Matrix4 = std::array<std::array<double, 4>, 4>;

struct Correlation {
  Matrix4 c{};                       // zero diagonal
  std::array<bool, 4> degenerate{};  // zero-variance series
  bool any_degenerate() const { return degenerate[0] || degenerate[1] || degenerate[2] || degenerate[3]; }
  double max_offdiagonal() const;
};

/// Pearson coefficients between the four limb series (order LF, RF, LH, RH).
Correlation interlimb_correlation(const std::array<std::vector<double>, 4>& series);

enum class GaitClass { Walk, Trot, Pace, Bound, Unclassified };

std::string to_string(GaitClass g);

struct GaitRule {
  double threshold = 0.3;
  /// Alternative walk definition: every off-diagonal entry negative.
  bool walk_if_all_negative = false;
};

GaitClass classify_gait(const Correlation& corr, const GaitRule& rule = {});
GaitClass classify_gait(const Matrix4& corr, const GaitRule& rule = {});

// --- entrainment ----------------------------------------------------------

/// (1 + |2 T_out/T_in - round(2 T_out/T_in)| / epsilon + sigma0/sigma_t)^-1
double entrainment_q(double t_out, double t_in, double sigma0, double sigma_t = 0.1,
                     double epsilon = 0.1);

struct WaveletOptions {
  double sigma = 1.5;   // Gaussian envelope sd, in cycles of the probe period
  double smooth = 0.5;  // sd of the Gaussian smoothing, s
};

/// Modulus of the complex Morlet response at `probe_period`, Gaussian
/// smoothed and scaled to a maximum of one. An all-zero (or constant) series
/// yields an all-zero trace. Throws InsufficientData if the series is not
/// longer than three wavelet supports (support = +-1 envelope sd).
std::vector<double> wavelet_sync(std::span<const double> series, double probe_period, double dt,
                                 const WaveletOptions& options = {});

// --- trial-level metrics ----------------------------------------------------

struct GaitMetrics {
  std::optional<double> period;
  Correlation corr;
  GaitClass gait = GaitClass::Unclassified;
  double max_corr = 0.0;
  double h_tot = 0.0;
  double t_tot = 0.0;
  double forward_speed = 0.0;   // m/s over the analysed window
  double sideways_speed = 0.0;  // m/s
  /// Below the upright-height gate.
  bool excluded = false;
};

struct AnalysisOptions {
  double min_lag = 0.05;
  double max_lag = 4.0;
  PeakRule peak;
  GaitRule gait;
  double height_gate = 0.75;
};

/// Analyses the second half of a recorded trial: period from the LF leg/knee
/// membrane states, correlation from the four leg-neuron outputs.
GaitMetrics analyze_trial(const body::TrialResult& trial, const AnalysisOptions& options = {});

/// Column-oriented time series, e.g. read back from a trajectory CSV.
struct SeriesTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;  // one vector per column

  const std::vector<double>& column(const std::string& name) const;
  bool has(const std::string& name) const;
};

SeriesTable read_csv(const std::string& path);

/// Metrics from an exported trajectory CSV (time, x, y, u1, u2, h1, h4, h7, h10 and
/// height). Without a height column, z / standing_height (capped at 1) is used.
GaitMetrics analyze_table(const SeriesTable& table, double standing_height,
                          const AnalysisOptions& options = {});

// --- sweeps -----------------------------------------------------------------

struct SweepCell {
  double i_dc = 0.0;
  double theta_c = 0.0;
  bool ok = false;
  std::string error;
  GaitMetrics metrics;
};

struct SweepOptions {
  double duration = 20.0;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  AnalysisOptions analysis;
};

/// One constant-control trial per (I_DC, theta_C) cell, row-major in I_DC.
std::vector<SweepCell> sweep_heatmap(const neuro::NetworkSpec& cpg,
                                     const body::JointCommandParams& cmd,
                                     const body::MorphologyParams& morphology,
                                     const std::vector<double>& i_dc_grid,
                                     const std::vector<double>& theta_c_grid,
                                     const SweepOptions& options = {});

// --- regression ----------------------------------------------------------------

struct OlsResult {
  std::vector<std::string> names;  // "intercept" first
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  std::vector<double> t_statistics;
  std::vector<double> p_values;
  std::vector<double> residuals;
  std::size_t dof = 0;
};

/// Ordinary least squares with an intercept column prepended. Throws
/// RankDeficient naming collinear predictor columns (0-based, intercept excluded).
OlsResult ols_fit(std::span<const double> y, const std::vector<std::vector<double>>& predictors,
                  std::vector<std::string> names = {});

}  // namespace cpgflex::analysis
