#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "cpgflex/analysis.hpp"
#include "cpgflex/body.hpp"
#include "cpgflex/errors.hpp"

using namespace cpgflex;
using namespace cpgflex::analysis;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Circle {
  std::vector<double> x, y;
};

Circle circle(double period, double dt, double duration, double phase = 0.0) {
  Circle c;
  for (std::size_t k = 0; k * dt < duration; ++k) {
    const double t = static_cast<double>(k) * dt;
    c.x.push_back(std::cos(kTwoPi * t / period + phase));
    c.y.push_back(std::sin(kTwoPi * t / period + phase));
  }
  return c;
}

/// Four limb series cos(2 pi (t/T - phase_l)).
std::array<std::vector<double>, 4> limbs(const std::array<double, 4>& phase, double period = 0.8) {
  std::array<std::vector<double>, 4> s;
  for (std::size_t k = 0; k < 2000; ++k) {
    const double t = static_cast<double>(k) * 0.008;
    for (std::size_t l = 0; l < 4; ++l) s[l].push_back(std::cos(kTwoPi * (t / period - phase[l])));
  }
  return s;
}

Matrix4 only(std::size_t i, std::size_t j, double v, double rest = 0.1) {
  Matrix4 m{};
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) m[a][b] = a == b ? 0.0 : rest;
  m[i][j] = m[j][i] = v;
  return m;
}

Matrix4 relabel_left_right(const Matrix4& m) {
  const std::array<std::size_t, 4> p{1, 0, 3, 2};
  Matrix4 out{};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) out[i][j] = m[p[i]][p[j]];
  return out;
}

neuro::NetworkSpec silent_cpg() {
  neuro::CpgParameters p;
  p.gamma = 0.05;
  p.a = 1.0;
  p.b = 0.1;
  p.kappa = 4.0;
  p.u0 = 1.0;
  for (int k = 0; k < 3; ++k) {
    p.c[k] = 0.2;
    p.d[k] = 0.0;
  }
  const auto topo = neuro::CpgTopology::standard();
  p.weights.assign(topo.classes.size(), 0.0);
  return neuro::build_cpg(p, topo);
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("period of a unit circle orbit") {
  const double dt = 0.008;
  const auto c = circle(1.0, dt, 20.0);
  const auto p = estimate_period(c.x, c.y, dt, 0.05, 4.0);
  REQUIRE(p.has_value());
  CHECK(std::abs(*p - 1.0) <= dt);
}

TEST_CASE("random periods are recovered within one sample") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> period(0.3, 3.0), phase(0.0, kTwoPi);
  const double dt = 0.008;
  for (int k = 0; k < 25; ++k) {
    const double T = period(rng);
    const auto c = circle(T, dt, 8.0 * 2.25 * T + 1.0, phase(rng));
    const auto p = estimate_period(c.x, c.y, dt, 0.05, 2.25 * T);
    REQUIRE(p.has_value());
    CHECK(std::abs(*p - T) <= dt);
  }
}

TEST_CASE("no period for flat or noisy input") {
  const std::vector<double> flat(2000, 0.7);
  CHECK_FALSE(estimate_period(flat, flat, 0.008, 0.05, 4.0).has_value());
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> x(2500), y(2500);
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = n(rng);
      y[k] = n(rng);
    }
    CHECK_FALSE(estimate_period(x, y, 0.008, 0.05, 4.0).has_value());
  }
}

TEST_CASE("period needs two maximum lags of data") {
  const auto c = circle(1.0, 0.008, 7.9);
  CHECK_THROWS_AS(estimate_period(c.x, c.y, 0.008, 0.05, 4.0), InsufficientData);
}

TEST_CASE("time reversal keeps the period") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.05);
  auto c = circle(1.37, 0.008, 25.0);
  for (auto& v : c.x) v += n(rng);
  for (auto& v : c.y) v += n(rng);
  const auto fwd = estimate_period(c.x, c.y, 0.008, 0.05, 3.0);
  std::reverse(c.x.begin(), c.x.end());
  std::reverse(c.y.begin(), c.y.end());
  const auto back = estimate_period(c.x, c.y, 0.008, 0.05, 3.0);
  REQUIRE(fwd.has_value());
  REQUIRE(back.has_value());
  CHECK(*fwd == doctest::Approx(*back));
}

TEST_CASE("interlimb correlation examples") {
  auto s = limbs({0.0, 0.0, 0.5, 0.25});
  auto c = interlimb_correlation(s);
  CHECK(c.c[0][1] == doctest::Approx(1.0));
  CHECK(c.c[0][2] == doctest::Approx(-1.0));
  CHECK(c.c[0][3] == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(c.c[i][i] == 0.0);
    for (std::size_t j = 0; j < 4; ++j) CHECK(c.c[i][j] == c.c[j][i]);
  }
  CHECK_FALSE(c.any_degenerate());

  s = limbs({0.0, 0.25, 0.5, 0.75});
  c = interlimb_correlation(s);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) CHECK(c.c[i][j] <= 1e-9);
  CHECK(c.max_offdiagonal() == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

  s[2].assign(s[2].size(), 0.4);
  c = interlimb_correlation(s);
  CHECK(c.degenerate[2]);
  CHECK(c.c[0][2] == 0.0);
  CHECK(classify_gait(c) == GaitClass::Unclassified);
}

TEST_CASE("gait rule examples") {
  CHECK(classify_gait(only(0, 3, 0.9)) == GaitClass::Trot);
  CHECK(classify_gait(only(1, 2, 0.9)) == GaitClass::Trot);
  CHECK(classify_gait(only(0, 1, 0.8)) == GaitClass::Bound);
  CHECK(classify_gait(only(2, 3, 0.8)) == GaitClass::Bound);
  CHECK(classify_gait(only(0, 2, 0.7)) == GaitClass::Pace);
  CHECK(classify_gait(only(1, 3, 0.7)) == GaitClass::Pace);
  CHECK(classify_gait(only(0, 3, 0.2, 0.2)) == GaitClass::Walk);
  CHECK(classify_gait(only(0, 3, 0.29, -0.5)) == GaitClass::Walk);
  GaitRule strict;
  strict.walk_if_all_negative = true;
  CHECK(classify_gait(only(0, 3, 0.2, -0.5), strict) == GaitClass::Trot);
  CHECK(classify_gait(only(0, 3, -0.1, -0.5), strict) == GaitClass::Walk);
  CHECK(to_string(GaitClass::Trot) == "trot");
}

TEST_CASE("correlation survives huge amplitudes") {
  auto s = limbs({0.0, 0.5, 0.5, 0.0});
  const auto ref = interlimb_correlation(s);
  for (auto& series : s)
    for (double& v : series) v *= 1e200;
  const auto big = interlimb_correlation(s);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(big.c[i][j] == doctest::Approx(ref.c[i][j]).epsilon(1e-12));
  CHECK_FALSE(big.any_degenerate());
}

TEST_CASE("phase patterns classify as their gait") {
  CHECK(classify_gait(interlimb_correlation(limbs({0.0, 0.5, 0.75, 0.25}))) == GaitClass::Walk);
  CHECK(classify_gait(interlimb_correlation(limbs({0.0, 0.5, 0.5, 0.0}))) == GaitClass::Trot);
  CHECK(classify_gait(interlimb_correlation(limbs({0.0, 0.5, 0.0, 0.5}))) == GaitClass::Pace);
  CHECK(classify_gait(interlimb_correlation(limbs({0.0, 0.0, 0.5, 0.5}))) == GaitClass::Bound);
}

TEST_CASE("gait is unchanged by swapping left and right") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    Matrix4 m{};
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j) m[i][j] = m[j][i] = u(rng);
    CHECK(classify_gait(m) == classify_gait(relabel_left_right(m)));
  }
}

TEST_CASE("entrainment score examples") {
  CHECK(entrainment_q(1.0, 1.0, 0.0) == 1.0);
  CHECK(entrainment_q(0.5, 1.0, 0.0) == 1.0);
  CHECK(entrainment_q(0.8, 1.0, 0.0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(entrainment_q(0.8, 1.0, 0.0) == 1.0 / (1.0 + std::abs(1.6 - 2.0) / 0.1));
  CHECK(entrainment_q(1.0, 1.0, 0.1) == doctest::Approx(0.5));
  for (double k : {0.1, 0.7, 3.0, 250.0})
    CHECK(entrainment_q(k * 0.83, k * 1.21, 0.03) == doctest::Approx(entrainment_q(0.83, 1.21, 0.03)));
}

TEST_CASE("wavelet sync is selective for the probe period") {
  const double dt = 0.008, T = 1.0;
  std::vector<double> matched, doubled, zero;
  for (std::size_t k = 0; k * dt < 40.0; ++k) {
    const double t = static_cast<double>(k) * dt;
    matched.push_back(std::sin(kTwoPi * t / T));
    doubled.push_back(std::sin(kTwoPi * t / (2.0 * T)));
    zero.push_back(0.0);
  }
  const auto m = wavelet_sync(matched, T, dt);
  const std::size_t lo = static_cast<std::size_t>(10.0 / dt), hi = m.size() - lo;
  for (std::size_t k = lo; k < hi; k += 25) CHECK(m[k] == doctest::Approx(1.0).epsilon(0.02));

  // Unnormalized comparison: scale the mismatched trace by its raw maximum.
  std::vector<double> mixed = matched;
  for (std::size_t k = 0; k < mixed.size(); ++k)
    mixed[k] = k < mixed.size() / 2 ? doubled[k] : matched[k];
  const auto both = wavelet_sync(mixed, T, dt);
  const std::size_t early = static_cast<std::size_t>(12.0 / dt);
  const std::size_t late = mixed.size() - early;
  CHECK(both[early] < 0.5 * both[late]);

  for (double v : wavelet_sync(zero, T, dt)) CHECK(v == 0.0);
  const std::vector<double> short_series(static_cast<std::size_t>(8.9 / dt), 1.0);
  CHECK_THROWS_AS(wavelet_sync(short_series, T, dt), InsufficientData);
}

TEST_CASE("a one-cell sweep equals a single analysed trial") {
  const auto cpg = silent_cpg();
  SweepOptions o;
  o.duration = 6.0;
  o.seed = 9;
  const body::JointCommandParams cmd;
  const auto cells = sweep_heatmap(cpg, cmd, body::MorphologyParams::normal(), {0.5}, {0.1}, o);
  REQUIRE(cells.size() == 1);
  REQUIRE(cells[0].ok);
  body::TrialOptions to;
  to.record = true;
  const auto direct = analyze_trial(
      body::run_trial(cpg, cmd, body::MorphologyParams::normal(),
                      body::Schedule::constant(6.0, 0.5, 0.1), 9, to));
  CHECK(cells[0].metrics.h_tot == direct.h_tot);
  CHECK(cells[0].metrics.forward_speed == direct.forward_speed);
  CHECK(cells[0].metrics.sideways_speed == direct.sideways_speed);
  CHECK(cells[0].metrics.max_corr == direct.max_corr);
  CHECK(cells[0].metrics.period == direct.period);
}

TEST_CASE("a silent controller barely moves anywhere on the grid") {
  SweepOptions o;
  o.duration = 6.0;
  o.workers = 2;
  const auto cells = sweep_heatmap(silent_cpg(), body::JointCommandParams{},
                                   body::MorphologyParams::normal(), {0.0, 1.0}, {-0.5, 0.5}, o);
  REQUIRE(cells.size() == 4);
  CHECK(cells[1].i_dc == 0.0);
  CHECK(cells[1].theta_c == 0.5);
  for (const auto& c : cells) {
    REQUIRE(c.ok);
    CHECK(std::abs(c.metrics.forward_speed) < 0.01);
    CHECK(std::abs(c.metrics.sideways_speed) < 0.01);
    CHECK_FALSE(c.metrics.excluded);
  }
}

TEST_CASE("least squares examples") {
  std::vector<double> x, y;
  for (int k = 0; k < 20; ++k) {
    x.push_back(k);
    y.push_back(2.0 * k);
  }
  auto r = ols_fit(y, {x}, {"x"});
  CHECK(r.names == std::vector<std::string>{"intercept", "x"});
  CHECK(r.coefficients[1] == doctest::Approx(2.0));
  CHECK(r.coefficients[0] == doctest::Approx(0.0).scale(1.0));
  for (double e : r.residuals) CHECK(std::abs(e) < 1e-9);
  CHECK(r.dof == 18);

  std::vector<double> c(20, 3.5);
  r = ols_fit(c, {x});
  CHECK(r.coefficients[1] == doctest::Approx(0.0).scale(1.0));
  CHECK(r.coefficients[0] == doctest::Approx(3.5));

  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> xs, ys;
  for (int k = 0; k < 100; ++k) {
    xs.push_back(k / 10.0);
    ys.push_back(k / 10.0 + n(rng));
  }
  r = ols_fit(ys, {xs});
  CHECK(std::abs(r.coefficients[1] - 1.0) < 3.0 * r.standard_errors[1]);
  CHECK(r.p_values[1] < 1e-6);
  CHECK(r.t_statistics[1] == doctest::Approx(r.coefficients[1] / r.standard_errors[1]));
}

TEST_CASE("collinear predictors are named") {
  std::vector<double> a{1, 2, 3, 4, 5, 6}, b{2, 4, 6, 8, 10, 12}, y{1, 3, 2, 5, 4, 6};
  try {
    ols_fit(y, {a, b});
    FAIL("expected rank deficiency");
  } catch (const RankDeficient& e) {
    REQUIRE_FALSE(e.columns().empty());
    for (auto col : e.columns()) CHECK(col < 2);
  }
  CHECK_THROWS_AS(ols_fit(std::vector<double>{1, 2}, {std::vector<double>{1, 2}}), Error);
}

}  // TEST_SUITE
