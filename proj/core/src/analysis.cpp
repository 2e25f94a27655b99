#include "cpgflex/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "cpgflex/errors.hpp"

namespace cpgflex::analysis {

namespace {

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

template <class Series>
std::vector<double> second_half(const Series& s) {
  return {s.begin() + static_cast<long>(s.size() / 2), s.end()};
}

}  // namespace

// --- period ---------------------------------------------------------------

std::vector<double> complex_autocorrelation(std::span<const double> x, std::span<const double> y,
                                            std::size_t max_lag_steps) {
  if (x.size() != y.size()) throw ConfigurationError("period series differ in length");
  const std::size_t n = x.size();
  if (max_lag_steps >= n) throw InsufficientData("lag exceeds series length");
  const double mx = mean_of(x), my = mean_of(y);
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[i] - mx;
    ys[i] = y[i] - my;
  }
  // Re(z_{i+k} conj(z_i)) = x_{i+k} x_i + y_{i+k} y_i
  std::vector<double> r(max_lag_steps + 1, 0.0);
  for (std::size_t k = 0; k <= max_lag_steps; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) s += xs[i + k] * xs[i] + ys[i + k] * ys[i];
    r[k] = s / static_cast<double>(n - k);
  }
  const double r0 = r[0];
  if (!(r0 > 0.0)) return std::vector<double>(max_lag_steps + 1, 0.0);
  for (double& v : r) v /= r0;
  return r;
}

std::optional<double> estimate_period(std::span<const double> x, std::span<const double> y,
                                      double dt, double min_lag, double max_lag,
                                      const PeakRule& rule) {
  if (!(dt > 0.0)) throw ConfigurationError("dt must be positive");
  if (!(max_lag > min_lag) || min_lag < 0.0) throw ConfigurationError("bad lag window");
  const auto kmax = static_cast<std::size_t>(std::floor(max_lag / dt + 1e-9));
  const auto kmin = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(min_lag / dt - 1e-9)));
  if (x.size() < 2 * kmax || x.size() < kmax + 2)
    throw InsufficientData("series of " + std::to_string(x.size()) +
                           " samples is shorter than twice the maximum lag");
  const std::vector<double> r = complex_autocorrelation(x, y, kmax + 1);
  if (r[0] == 0.0) return std::nullopt;

  std::vector<std::size_t> peaks;
  for (std::size_t k = kmin; k <= kmax; ++k) {
    if (!(r[k] > r[k - 1] && r[k] >= r[k + 1])) continue;
    if (r[k] < rule.min_height) continue;
    // Prominence against the lowest point before reaching a higher value on each side.
    double left_min = r[k];
    for (std::size_t j = k; j-- > 0;) {
      if (r[j] > r[k]) break;
      left_min = std::min(left_min, r[j]);
    }
    double right_min = r[k];
    for (std::size_t j = k + 1; j < r.size(); ++j) {
      if (r[j] > r[k]) break;
      right_min = std::min(right_min, r[j]);
    }
    if (r[k] - std::max(left_min, right_min) < rule.min_prominence) continue;
    peaks.push_back(k);
  }
  if (peaks.empty()) return std::nullopt;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k : peaks) top = std::max(top, r[k]);
  for (std::size_t k : peaks)
    if (r[k] >= top - rule.tie_tolerance) return static_cast<double>(k) * dt;
  return std::nullopt;
}

// --- correlation / gait ---------------------------------------------------------

double Correlation::max_offdiagonal() const {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) m = std::max(m, c[i][j]);
  return m;
}

Correlation interlimb_correlation(const std::array<std::vector<double>, 4>& series) {
  const std::size_t n = series[0].size();
  for (const auto& s : series)
    if (s.size() != n) throw ConfigurationError("limb series differ in length");
  if (n < 2) throw InsufficientData("need at least two samples for a correlation");
  Correlation out;
  std::array<std::vector<double>, 4> centred;
  std::array<double, 4> norm{};
  for (std::size_t l = 0; l < 4; ++l) {
    const double m = mean_of(series[l]);
    centred[l].resize(n);
    double scale = 0.0, spread = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      centred[l][k] = series[l][k] - m;
      scale = std::max(scale, std::abs(series[l][k]));
      spread = std::max(spread, std::abs(centred[l][k]));
    }
    // Work on the series divided by its largest deviation so huge values cannot overflow.
    double ss = 0.0;
    if (spread > 0.0)
      for (double& v : centred[l]) {
        v /= spread;
        ss += v * v;
      }
    norm[l] = std::sqrt(ss);
    // Relative test so rounding noise on a constant series counts as flat.
    out.degenerate[l] =
        norm[l] * spread <= 1e-12 * std::max(1.0, scale) * std::sqrt(static_cast<double>(n));
  }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) {
      double v = 0.0;
      if (!out.degenerate[i] && !out.degenerate[j]) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += centred[i][k] * centred[j][k];
        v = std::clamp(s / (norm[i] * norm[j]), -1.0, 1.0);
      }
      out.c[i][j] = out.c[j][i] = v;
    }
  return out;
}

std::string to_string(GaitClass g) {
  switch (g) {
    case GaitClass::Walk: return "walk";
    case GaitClass::Trot: return "trot";
    case GaitClass::Pace: return "pace";
    case GaitClass::Bound: return "bound";
    case GaitClass::Unclassified: break;
  }
  return "unclassified";
}

GaitClass classify_gait(const Matrix4& c, const GaitRule& rule) {
  double best = -std::numeric_limits<double>::infinity();
  std::size_t bi = 0, bj = 1;
  bool all_negative = true;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) {
      if (!std::isfinite(c[i][j])) return GaitClass::Unclassified;
      if (c[i][j] >= 0.0) all_negative = false;
      if (c[i][j] > best) {
        best = c[i][j];
        bi = i;
        bj = j;
      }
    }
  if (rule.walk_if_all_negative ? all_negative : best < rule.threshold) return GaitClass::Walk;
  // Limbs: LF=0, RF=1, LH=2, RH=3.
  const bool same_girdle = (bi / 2) == (bj / 2);
  const bool same_side = (bi % 2) == (bj % 2);
  if (same_girdle) return GaitClass::Bound;
  if (same_side) return GaitClass::Pace;
  return GaitClass::Trot;
}

GaitClass classify_gait(const Correlation& corr, const GaitRule& rule) {
  if (corr.any_degenerate()) return GaitClass::Unclassified;
  return classify_gait(corr.c, rule);
}

// --- entrainment ------------------------------------------------------------------

double entrainment_q(double t_out, double t_in, double sigma0, double sigma_t, double epsilon) {
  if (!(t_in > 0.0) || !(sigma_t > 0.0) || !(epsilon > 0.0))
    throw ConfigurationError("entrainment score needs positive T_in, sigma_t and epsilon");
  const double ratio = 2.0 * t_out / t_in;
  const double mismatch = std::abs(ratio - std::round(ratio));
  return 1.0 / (1.0 + mismatch / epsilon + sigma0 / sigma_t);
}

std::vector<double> wavelet_sync(std::span<const double> series, double probe_period, double dt,
                                 const WaveletOptions& options) {
  if (!(probe_period > 0.0) || !(dt > 0.0) || !(options.sigma > 0.0))
    throw ConfigurationError("wavelet needs positive period, dt and sigma");
  const std::size_t n = series.size();
  const double sigma_t = options.sigma * probe_period;
  const double support = 2.0 * sigma_t;
  if (!(static_cast<double>(n) * dt > 3.0 * support))
    throw InsufficientData("series is not longer than three wavelet supports");

  const double m = mean_of(series);
  const auto half = static_cast<long>(std::ceil(4.0 * sigma_t / dt));
  std::vector<std::complex<double>> kernel(static_cast<std::size_t>(2 * half + 1));
  double env_sum = 0.0;
  for (long k = -half; k <= half; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double env = std::exp(-0.5 * (t / sigma_t) * (t / sigma_t));
    env_sum += env;
    kernel[static_cast<std::size_t>(k + half)] =
        env * std::polar(1.0, 2.0 * std::numbers::pi * t / probe_period);
  }
  std::vector<double> response(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::complex<double> acc = 0.0;
    for (long k = -half; k <= half; ++k) {
      const long j = static_cast<long>(i) + k;
      if (j < 0 || j >= static_cast<long>(n)) continue;
      acc += (series[static_cast<std::size_t>(j)] - m) * kernel[static_cast<std::size_t>(k + half)];
    }
    response[i] = std::abs(acc) / env_sum;
  }

  std::vector<double> smoothed(n, 0.0);
  if (options.smooth > 0.0) {
    const auto sh = static_cast<long>(std::ceil(4.0 * options.smooth / dt));
    std::vector<double> g(static_cast<std::size_t>(2 * sh + 1));
    for (long k = -sh; k <= sh; ++k) {
      const double t = static_cast<double>(k) * dt / options.smooth;
      g[static_cast<std::size_t>(k + sh)] = std::exp(-0.5 * t * t);
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0, w = 0.0;
      for (long k = -sh; k <= sh; ++k) {
        const long j = static_cast<long>(i) + k;
        if (j < 0 || j >= static_cast<long>(n)) continue;
        s += response[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(k + sh)];
        w += g[static_cast<std::size_t>(k + sh)];
      }
      smoothed[i] = s / w;
    }
  } else {
    smoothed = response;
  }
  double scale = 0.0;
  for (double v : series) scale = std::max(scale, std::abs(v - m));
  const double peak = *std::max_element(smoothed.begin(), smoothed.end());
  if (!(peak > 1e-12 * std::max(scale, 1e-300)) || scale == 0.0)
    return std::vector<double>(n, 0.0);
  for (double& v : smoothed) v /= peak;
  return smoothed;
}

// --- trial metrics ------------------------------------------------------------------

namespace {

GaitMetrics metrics_from_series(std::span<const double> a_lf, std::span<const double> b_lf,
                                const std::array<std::vector<double>, 4>& legs, double dt,
                                const AnalysisOptions& options) {
  GaitMetrics g;
  try {
    g.period = estimate_period(a_lf, b_lf, dt, options.min_lag, options.max_lag, options.peak);
  } catch (const InsufficientData&) {
    g.period = std::nullopt;
  }
  g.corr = interlimb_correlation(legs);
  g.gait = classify_gait(g.corr, options.gait);
  g.max_corr = g.corr.max_offdiagonal();
  return g;
}

}  // namespace

GaitMetrics analyze_trial(const body::TrialResult& trial, const AnalysisOptions& options) {
  const auto& tr = trial.trace;
  if (tr.cpg_time.size() < 4 || tr.neurons < neuro::kCpgNeurons)
    throw InsufficientData("trial was not recorded");
  const double dt = tr.cpg_time.size() > 1 ? tr.cpg_time[1] - tr.cpg_time[0] : tr.cpg_time[0];
  const auto a_lf = second_half(tr.state_series(neuro::cpg_index(0, neuro::Role::MotorA)));
  const auto b_lf = second_half(tr.state_series(neuro::cpg_index(0, neuro::Role::MotorB)));
  std::array<std::vector<double>, 4> legs;
  for (std::size_t l = 0; l < 4; ++l) legs[l] = second_half(tr.neuron_series(neuro::cpg_index(l, neuro::Role::MotorA)));
  GaitMetrics g = metrics_from_series(a_lf, b_lf, legs, dt, options);
  g.h_tot = trial.metrics.h_tot;
  g.t_tot = trial.metrics.t_tot;
  g.excluded = trial.metrics.fallen || g.h_tot < options.height_gate;
  if (tr.position.size() >= 2) {
    const std::size_t k0 = tr.position.size() / 2, k1 = tr.position.size() - 1;
    const double span_t = tr.body_time[k1] - tr.body_time[k0];
    if (span_t > 0.0) {
      g.forward_speed = (tr.position[k1].y - tr.position[k0].y) / span_t;
      g.sideways_speed = (tr.position[k1].x - tr.position[k0].x) / span_t;
    }
  }
  return g;
}

const std::vector<double>& SeriesTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return data[i];
  throw ConfigurationError("missing column '" + name + "'");
}

bool SeriesTable::has(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

SeriesTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read " + path);
  SeriesTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty CSV " + path);
  {
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      t.columns.push_back(cell);
    }
  }
  t.data.assign(t.columns.size(), {});
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream is(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(is, cell, ',')) {
      if (c >= t.columns.size())
        throw ValidationError("too many fields on data row " + std::to_string(row), row);
      try {
        t.data[c].push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("bad number on data row " + std::to_string(row), row);
      }
      ++c;
    }
    if (c != t.columns.size())
      throw ValidationError("too few fields on data row " + std::to_string(row), row);
  }
  return t;
}

GaitMetrics analyze_table(const SeriesTable& table, double standing_height,
                          const AnalysisOptions& options) {
  const auto& time = table.column("time");
  if (time.size() < 4) throw InsufficientData("trajectory has fewer than four rows");
  const double dt = time[1] - time[0];
  if (!(dt > 0.0)) throw ValidationError("time column is not increasing");
  const auto a_lf = second_half(table.column("u1"));
  const auto b_lf = second_half(table.column("u2"));
  std::array<std::vector<double>, 4> legs;
  for (std::size_t l = 0; l < 4; ++l)
    legs[l] = second_half(table.column("h" + std::to_string(l * 3 + 1)));
  GaitMetrics g = metrics_from_series(a_lf, b_lf, legs, dt, options);
  double hs = 0.0;
  if (table.has("height")) {
    for (double v : table.column("height")) hs += v;
  } else {
    if (!(standing_height > 0.0)) throw ConfigurationError("standing height must be positive");
    for (double v : table.column("z")) hs += std::min(v / standing_height, 1.0);
  }
  g.h_tot = hs / static_cast<double>(time.size());
  g.excluded = g.h_tot < options.height_gate;
  const auto& x = table.column("x");
  const auto& y = table.column("y");
  const std::size_t k0 = time.size() / 2, k1 = time.size() - 1;
  const double span_t = time[k1] - time[k0];
  if (span_t > 0.0) {
    g.forward_speed = (y[k1] - y[k0]) / span_t;
    g.sideways_speed = (x[k1] - x[k0]) / span_t;
  }
  return g;
}

// --- sweep --------------------------------------------------------------------------

std::vector<SweepCell> sweep_heatmap(const neuro::NetworkSpec& cpg,
                                     const body::JointCommandParams& cmd,
                                     const body::MorphologyParams& morphology,
                                     const std::vector<double>& i_dc_grid,
                                     const std::vector<double>& theta_c_grid,
                                     const SweepOptions& options) {
  std::vector<SweepCell> cells;
  for (double i_dc : i_dc_grid)
    for (double theta : theta_c_grid) cells.push_back({i_dc, theta, false, {}, {}});
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < cells.size();) {
      SweepCell& cell = cells[k];
      try {
        body::TrialOptions to;
        to.record = true;
        const auto result =
            body::run_trial(cpg, cmd, morphology,
                            body::Schedule::constant(options.duration, cell.i_dc, cell.theta_c),
                            options.seed, to);
        cell.metrics = analyze_trial(result, options.analysis);
        cell.ok = true;
      } catch (const Error& e) {
        cell.error = e.what();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers,
                                                           static_cast<unsigned>(cells.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return cells;
}

// --- OLS ----------------------------------------------------------------------------

OlsResult ols_fit(std::span<const double> y, const std::vector<std::vector<double>>& predictors,
                  std::vector<std::string> names) {
  const std::size_t n = y.size();
  const std::size_t p = predictors.size() + 1;
  for (const auto& col : predictors)
    if (col.size() != n) throw ConfigurationError("predictor length differs from response");
  if (n <= p) throw InsufficientData("need more observations than coefficients");
  if (names.empty())
    for (std::size_t j = 0; j < predictors.size(); ++j) names.push_back("x" + std::to_string(j));
  if (names.size() != predictors.size()) throw ConfigurationError("one name per predictor");

  Eigen::MatrixXd X(static_cast<long>(n), static_cast<long>(p));
  Eigen::VectorXd Y(static_cast<long>(n));
  for (std::size_t i = 0; i < n; ++i) {
    X(static_cast<long>(i), 0) = 1.0;
    Y(static_cast<long>(i)) = y[i];
    for (std::size_t j = 0; j < predictors.size(); ++j)
      X(static_cast<long>(i), static_cast<long>(j + 1)) = predictors[j][i];
  }

  // Greedy column scan: a predictor that adds no rank is collinear with earlier ones.
  std::vector<std::size_t> collinear;
  {
    Eigen::MatrixXd acc = X.leftCols(1);
    for (std::size_t j = 1; j < p; ++j) {
      Eigen::MatrixXd trial(acc.rows(), acc.cols() + 1);
      trial << acc, X.col(static_cast<long>(j));
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
      qr.setThreshold(1e-10);
      if (static_cast<long>(qr.rank()) < trial.cols())
        collinear.push_back(j - 1);
      else
        acc = std::move(trial);
    }
  }
  if (!collinear.empty()) {
    std::string list;
    for (auto c : collinear) list += (list.empty() ? "" : ", ") + names[c];
    throw RankDeficient("design matrix is rank deficient; collinear: " + list, collinear);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  const Eigen::VectorXd beta = qr.solve(Y);
  const Eigen::VectorXd resid = Y - X * beta;
  const std::size_t dof = n - p;
  const double sigma2 = resid.squaredNorm() / static_cast<double>(dof);
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();

  OlsResult r;
  r.names.push_back("intercept");
  r.names.insert(r.names.end(), names.begin(), names.end());
  r.dof = dof;
  boost::math::students_t dist(static_cast<double>(dof));
  for (std::size_t j = 0; j < p; ++j) {
    const double b = beta(static_cast<long>(j));
    const double se = std::sqrt(std::max(0.0, sigma2 * xtx_inv(static_cast<long>(j), static_cast<long>(j))));
    double t, pv;
    if (se > 0.0) {
      t = b / se;
      pv = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    } else {
      t = b == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), b);
      pv = b == 0.0 ? 1.0 : 0.0;
    }
    r.coefficients.push_back(b);
    r.standard_errors.push_back(se);
    r.t_statistics.push_back(t);
    r.p_values.push_back(pv);
  }
  r.residuals.assign(resid.data(), resid.data() + resid.size());
  return r;
}

}  // namespace cpgflex::analysis
