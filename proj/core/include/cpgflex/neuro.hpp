#pragma once

// Networks of Matsuoka-type rate neurons.
//
// Two variants are provided. The classic model couples the fast variable u to
// the slow recovery variable v linearly:
//
//   t0 du/dt = -u - a v + I
//   t0 dv/dt = -gamma v + b h(u)
//
// The modified model gates the recovery term with a sigmoidal deactivation
// S(x) = 1 / (1 + exp(x)), which makes the firing period depend on the tonic
// drive c + d * I_DC:
//
//   t0 du/dt = -u - a S(kappa (u - u0)) v + c + d I_DC + I_AC
//
// I_AC is the fast synaptic input: G I_ext + I_fb + sum_j w_ij h(u_j - tau_ij).
// Both are integrated with fixed-step explicit Euler.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cpgflex::neuro {

inline constexpr double kDefaultDt = 0.008;
inline constexpr double kDefaultTimeConstant = 0.052;

enum class Role { Interneuron, MotorA, MotorB, Filter };

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

struct NeuronParams {
  double t0 = kDefaultTimeConstant;
  double gamma = 0.0;
  double a = 0.0;
  double b = 0.0;
  double kappa = 1.0;
  double u0 = 0.0;
  double c = 0.0;
  double d = 0.0;
  double G = 0.0;
};

/// Dense square matrix, row-major. Entry (i, j) is the link from j to i.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }

  bool operator==(const SquareMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct NetworkSpec {
  std::vector<NeuronParams> params;
  SquareMatrix w;
  SquareMatrix tau;
  std::vector<Role> roles;

  std::size_t size() const noexcept { return params.size(); }

  /// Throws ConfigurationError on dimension mismatch, self-connections or t0 <= 0.
  void validate() const;
};

struct NetworkState {
  std::vector<double> u;
  std::vector<double> v;
  double t = 0.0;

  std::size_t size() const noexcept { return u.size(); }
};

struct StepInput {
  double i_dc = 0.0;
  double i_ext = 0.0;
  /// Per-neuron feedback current. Empty means all zero.
  std::vector<double> i_fb;
};

enum class Model { Modified, Classic };

constexpr double rectify(double x) noexcept { return x > 0.0 ? x : 0.0; }

/// The decreasing logistic used by the deactivation term.
double deactivation(double x) noexcept;

std::vector<double> synaptic_input(const NetworkSpec& spec, const NetworkState& state,
                                   const StepInput& in);

NetworkState step_modified(const NetworkSpec& spec, const NetworkState& state,
                           const StepInput& in, double dt = kDefaultDt);
NetworkState step_classic(const NetworkSpec& spec, const NetworkState& state,
                          const StepInput& in, double dt = kDefaultDt);

/// Tonic drive exceeds the deactivation midpoint by more than 2/kappa.
bool check_oscillation_condition(const NeuronParams& params, double i_dc);

/// Allocation-free stepper for the hot loops of trials and evolution.
class Integrator {
 public:
  Integrator(const NetworkSpec& spec, NetworkState state, Model model = Model::Modified);

  void step(const StepInput& in, double dt = kDefaultDt);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const NetworkState& state() const noexcept { return state_; }
  double output(std::size_t i) const noexcept { return rectify(state_.u[i]); }

 private:
  NetworkSpec spec_;
  NetworkState state_;
  Model model_;
  std::vector<std::vector<std::size_t>> order_;
  std::vector<double> du_;
  std::vector<double> dv_;
};

/// Row-major trajectory: entry [k * n + i] is neuron i after step k.
struct Trajectory {
  std::size_t neurons = 0;
  std::vector<double> t;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> h;

  std::size_t steps() const noexcept { return t.size(); }
  double u_at(std::size_t k, std::size_t i) const { return u[k * neurons + i]; }
  double h_at(std::size_t k, std::size_t i) const { return h[k * neurons + i]; }
};

using InputFunction = std::function<StepInput(std::size_t step, double t)>;

/// Runs round(duration / dt) steps from `initial`; samples after every step.
Trajectory simulate(const NetworkSpec& spec, const NetworkState& initial,
                    const InputFunction& inputs, double duration, double dt = kDefaultDt,
                    Model model = Model::Modified);

/// u ~ U[0, 1), v = 0, reproducible from `seed`.
NetworkState random_initial_state(std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CPG layout: four limbs of (interneuron, A, B), limb order LF, RF, LH, RH.

enum class Limb : std::size_t { LF = 0, RF = 1, LH = 2, RH = 3 };
inline constexpr std::size_t kLimbs = 4;
inline constexpr std::size_t kCpgNeurons = 12;

constexpr std::size_t limb_slot(Role role) {
  return role == Role::Interneuron ? 0 : role == Role::MotorA ? 1 : 2;
}
constexpr std::size_t cpg_index(std::size_t limb, Role role) {
  return limb * 3 + limb_slot(role);
}
constexpr std::size_t mirror_limb(std::size_t limb) { return limb ^ 1u; }
constexpr std::size_t mirror_cpg_index(std::size_t i) {
  return cpg_index(mirror_limb(i / 3), Role::Interneuron) + i % 3;
}
constexpr bool is_left(std::size_t limb) { return limb % 2 == 0; }
constexpr bool is_front(std::size_t limb) { return limb < 2; }

/// A group of directed links sharing one evolvable weight.
struct WeightClass {
  std::string name;
  std::vector<std::pair<std::size_t, std::size_t>> links;  // (target, source)
};

struct CpgTopology {
  std::vector<WeightClass> classes;

  /// Six within-limb links plus six laterally symmetric interneuron classes.
  static CpgTopology standard();

  /// Each class is closed under left-right mirroring and has no self-links.
  bool is_lateral_symmetric() const;
};

struct CpgParameters {
  double t0 = kDefaultTimeConstant;
  double gamma = 0.0;
  double a = 0.0;
  double b = 0.0;
  double kappa = 1.0;
  double u0 = 0.0;
  double c[3] = {};  // interneuron, A, B
  double d[3] = {};
  std::vector<double> weights;  // one per topology class
};

NetworkSpec build_cpg(const CpgParameters& params, const CpgTopology& topology);

/// w(i, j) == w(m(i), m(j)) over the CPG block, where m swaps left and right.
bool is_laterally_symmetric(const NetworkSpec& spec, double tol = 0.0);

/// Swaps the left and right limbs of the leading CPG block.
NetworkState mirror_state(const NetworkState& state);

// JSON (schema "cpgflex.network/1")
nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_from_json(const nlohmann::json& doc);

}  // namespace cpgflex::neuro
