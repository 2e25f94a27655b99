#include "cpgflex/neuro.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "cpgflex/errors.hpp"

namespace cpgflex::neuro {

namespace {

bool has_cpg_block(const NetworkSpec& spec) {
  if (spec.size() < kCpgNeurons) return false;
  for (std::size_t i = 0; i < kCpgNeurons; ++i) {
    const Role expected = i % 3 == 0 ? Role::Interneuron : i % 3 == 1 ? Role::MotorA : Role::MotorB;
    if (spec.roles[i] != expected) return false;
  }
  return true;
}

// Summation order over presynaptic neurons. Inside a CPG block the order is
// keyed on the limb relation (same, contralateral, ipsilateral, diagonal),
// which is invariant under left-right mirroring, so mirrored networks produce
// bit-identical mirrored sums.
std::vector<std::vector<std::size_t>> summation_order(const NetworkSpec& spec) {
  const std::size_t n = spec.size();
  std::vector<std::vector<std::size_t>> order(n);
  const bool cpg = has_cpg_block(spec);
  for (std::size_t i = 0; i < n; ++i) {
    auto& o = order[i];
    o.reserve(n);
    if (cpg && i < kCpgNeurons) {
      const std::size_t limb = i / 3;
      for (std::size_t relation = 0; relation < kLimbs; ++relation)
        for (std::size_t slot = 0; slot < 3; ++slot) o.push_back((limb ^ relation) * 3 + slot);
      for (std::size_t j = kCpgNeurons; j < n; ++j) o.push_back(j);
    } else {
      for (std::size_t j = 0; j < n; ++j) o.push_back(j);
    }
    std::erase(o, i);
  }
  return order;
}

void check_dimensions(const NetworkSpec& spec, const NetworkState& state, const StepInput& in) {
  const std::size_t n = spec.size();
  if (state.u.size() != n || state.v.size() != n)
    throw ConfigurationError("state has " + std::to_string(state.u.size()) +
                             " neurons, network has " + std::to_string(n));
  if (!in.i_fb.empty() && in.i_fb.size() != n)
    throw ConfigurationError("feedback vector has " + std::to_string(in.i_fb.size()) +
                             " entries, network has " + std::to_string(n));
}

double fast_input(const NetworkSpec& spec, const std::vector<double>& u, const StepInput& in,
                  std::size_t i, const std::vector<std::size_t>& order) {
  double sum = 0.0;
  const auto w = spec.w.row(i);
  const auto tau = spec.tau.row(i);
  for (std::size_t j : order) {
    if (w[j] != 0.0) sum += w[j] * rectify(u[j] - tau[j]);
  }
  double fb = in.i_fb.empty() ? 0.0 : in.i_fb[i];
  return spec.params[i].G * in.i_ext + fb + sum;
}

void euler_step(const NetworkSpec& spec, NetworkState& state, const StepInput& in, double dt,
                Model model, const std::vector<std::vector<std::size_t>>& order,
                std::vector<double>& du, std::vector<double>& dv) {
  const std::size_t n = spec.size();
  for (std::size_t i = 0; i < n; ++i) {
    const NeuronParams& p = spec.params[i];
    const double u = state.u[i];
    const double v = state.v[i];
    const double drive = p.c + p.d * in.i_dc + fast_input(spec, state.u, in, i, order[i]);
    const double recovery =
        model == Model::Modified ? p.a * deactivation(p.kappa * (u - p.u0)) * v : p.a * v;
    du[i] = (-u - recovery + drive) / p.t0;
    dv[i] = (-p.gamma * v + p.b * rectify(u)) / p.t0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    state.u[i] += dt * du[i];
    state.v[i] += dt * dv[i];
  }
  state.t += dt;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(state.u[i]) || !std::isfinite(state.v[i]))
      throw IntegrationBlowup(i, state.t);
  }
}

NetworkState step_with(const NetworkSpec& spec, const NetworkState& state, const StepInput& in,
                       double dt, Model model) {
  check_dimensions(spec, state, in);
  if (!(dt > 0.0)) throw ConfigurationError("dt must be positive");
  NetworkState next = state;
  std::vector<double> du(spec.size()), dv(spec.size());
  euler_step(spec, next, in, dt, model, summation_order(spec), du, dv);
  return next;
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Interneuron: return "interneuron";
    case Role::MotorA: return "motor-A";
    case Role::MotorB: return "motor-B";
    case Role::Filter: return "filter";
  }
  return "unknown";
}

Role role_from_string(std::string_view name) {
  if (name == "interneuron") return Role::Interneuron;
  if (name == "motor-A") return Role::MotorA;
  if (name == "motor-B") return Role::MotorB;
  if (name == "filter") return Role::Filter;
  throw ConfigurationError("unknown neuron role '" + std::string(name) + "'");
}

void NetworkSpec::validate() const {
  const std::size_t n = size();
  if (w.size() != n || tau.size() != n || roles.size() != n)
    throw ConfigurationError("network matrices/roles do not match neuron count " +
                             std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (w(i, i) != 0.0)
      throw ConfigurationError("self-connection on neuron " + std::to_string(i));
    if (!(params[i].t0 > 0.0))
      throw ConfigurationError("t0 must be positive (neuron " + std::to_string(i) + ")");
  }
}

double deactivation(double x) noexcept { return 1.0 / (1.0 + std::exp(x)); }

std::vector<double> synaptic_input(const NetworkSpec& spec, const NetworkState& state,
                                   const StepInput& in) {
  check_dimensions(spec, state, in);
  const auto order = summation_order(spec);
  std::vector<double> out(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) out[i] = fast_input(spec, state.u, in, i, order[i]);
  return out;
}

NetworkState step_modified(const NetworkSpec& spec, const NetworkState& state,
                           const StepInput& in, double dt) {
  return step_with(spec, state, in, dt, Model::Modified);
}

NetworkState step_classic(const NetworkSpec& spec, const NetworkState& state,
                          const StepInput& in, double dt) {
  return step_with(spec, state, in, dt, Model::Classic);
}

bool check_oscillation_condition(const NeuronParams& params, double i_dc) {
  return params.c + params.d * i_dc > params.u0 + 2.0 / params.kappa;
}

Integrator::Integrator(const NetworkSpec& spec, NetworkState state, Model model)
    : spec_(spec), state_(std::move(state)), model_(model) {
  spec_.validate();
  check_dimensions(spec_, state_, StepInput{});
  order_ = summation_order(spec_);
  du_.resize(spec_.size());
  dv_.resize(spec_.size());
}

void Integrator::step(const StepInput& in, double dt) {
  if (!in.i_fb.empty() && in.i_fb.size() != spec_.size())
    throw ConfigurationError("feedback vector size mismatch");
  euler_step(spec_, state_, in, dt, model_, order_, du_, dv_);
}

Trajectory simulate(const NetworkSpec& spec, const NetworkState& initial,
                    const InputFunction& inputs, double duration, double dt, Model model) {
  if (duration < 0.0) throw ConfigurationError("duration must be non-negative");
  if (!(dt > 0.0)) throw ConfigurationError("dt must be positive");
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  Integrator net(spec, initial, model);
  Trajectory out;
  out.neurons = spec.size();
  out.t.reserve(steps);
  out.u.reserve(steps * out.neurons);
  out.v.reserve(steps * out.neurons);
  out.h.reserve(steps * out.neurons);
  for (std::size_t k = 0; k < steps; ++k) {
    net.step(inputs ? inputs(k, net.state().t) : StepInput{}, dt);
    const auto& s = net.state();
    out.t.push_back(s.t);
    for (std::size_t i = 0; i < out.neurons; ++i) {
      out.u.push_back(s.u[i]);
      out.v.push_back(s.v[i]);
      out.h.push_back(rectify(s.u[i]));
    }
  }
  return out;
}

NetworkState random_initial_state(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetworkState s;
  s.u.resize(n);
  s.v.assign(n, 0.0);
  for (auto& u : s.u) u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return s;
}

// ---------------------------------------------------------------------------

CpgTopology CpgTopology::standard() {
  CpgTopology topo;
  const auto within = [&](std::string name, Role to, Role from) {
    WeightClass wc{std::move(name), {}};
    for (std::size_t limb = 0; limb < kLimbs; ++limb)
      wc.links.emplace_back(cpg_index(limb, to), cpg_index(limb, from));
    topo.classes.push_back(std::move(wc));
  };
  within("in_to_a", Role::MotorA, Role::Interneuron);
  within("a_to_in", Role::Interneuron, Role::MotorA);
  within("in_to_b", Role::MotorB, Role::Interneuron);
  within("b_to_in", Role::Interneuron, Role::MotorB);
  within("a_to_b", Role::MotorB, Role::MotorA);
  within("b_to_a", Role::MotorA, Role::MotorB);

  constexpr std::size_t LF = 0, RF = 1, LH = 2, RH = 3;
  const auto inter = [&](std::string name,
                         std::initializer_list<std::pair<std::size_t, std::size_t>> limbs) {
    WeightClass wc{std::move(name), {}};
    for (auto [to, from] : limbs)
      wc.links.emplace_back(cpg_index(to, Role::Interneuron), cpg_index(from, Role::Interneuron));
    topo.classes.push_back(std::move(wc));
  };
  inter("ipsi_front_to_hind", {{LH, LF}, {RH, RF}});
  inter("ipsi_hind_to_front", {{LF, LH}, {RF, RH}});
  inter("contra_front", {{RF, LF}, {LF, RF}});
  inter("contra_hind", {{RH, LH}, {LH, RH}});
  inter("diag_front_to_hind", {{RH, LF}, {LH, RF}});
  inter("diag_hind_to_front", {{RF, LH}, {LF, RH}});
  return topo;
}

bool CpgTopology::is_lateral_symmetric() const {
  for (const auto& wc : classes) {
    for (auto [to, from] : wc.links) {
      if (to == from || to >= kCpgNeurons || from >= kCpgNeurons) return false;
      const std::pair<std::size_t, std::size_t> m{mirror_cpg_index(to), mirror_cpg_index(from)};
      if (std::find(wc.links.begin(), wc.links.end(), m) == wc.links.end()) return false;
    }
  }
  return true;
}

NetworkSpec build_cpg(const CpgParameters& p, const CpgTopology& topology) {
  if (p.weights.size() != topology.classes.size())
    throw ConfigurationError("expected " + std::to_string(topology.classes.size()) +
                             " CPG weights, got " + std::to_string(p.weights.size()));
  NetworkSpec spec;
  spec.params.resize(kCpgNeurons);
  spec.roles.resize(kCpgNeurons);
  spec.w = SquareMatrix(kCpgNeurons);
  spec.tau = SquareMatrix(kCpgNeurons);
  for (std::size_t i = 0; i < kCpgNeurons; ++i) {
    const std::size_t slot = i % 3;
    spec.roles[i] = slot == 0 ? Role::Interneuron : slot == 1 ? Role::MotorA : Role::MotorB;
    spec.params[i] = NeuronParams{p.t0, p.gamma, p.a, p.b, p.kappa, p.u0, p.c[slot], p.d[slot], 0.0};
  }
  for (std::size_t k = 0; k < topology.classes.size(); ++k)
    for (auto [to, from] : topology.classes[k].links) spec.w(to, from) = p.weights[k];
  spec.validate();
  return spec;
}

bool is_laterally_symmetric(const NetworkSpec& spec, double tol) {
  if (spec.size() < kCpgNeurons) return false;
  for (std::size_t i = 0; i < kCpgNeurons; ++i) {
    const std::size_t mi = mirror_cpg_index(i);
    for (std::size_t j = 0; j < kCpgNeurons; ++j) {
      const std::size_t mj = mirror_cpg_index(j);
      if (std::abs(spec.w(i, j) - spec.w(mi, mj)) > tol) return false;
      if (std::abs(spec.tau(i, j) - spec.tau(mi, mj)) > tol) return false;
    }
    const auto& a = spec.params[i];
    const auto& b = spec.params[mi];
    if (a.c != b.c || a.d != b.d || a.G != b.G) return false;
  }
  return true;
}

NetworkState mirror_state(const NetworkState& state) {
  if (state.size() < kCpgNeurons) throw ConfigurationError("state has no CPG block");
  NetworkState m = state;
  for (std::size_t i = 0; i < kCpgNeurons; ++i) {
    m.u[mirror_cpg_index(i)] = state.u[i];
    m.v[mirror_cpg_index(i)] = state.v[i];
  }
  return m;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const NetworkSpec& spec) {
  using nlohmann::json;
  json params = json::array();
  for (const auto& p : spec.params)
    params.push_back({{"t0", p.t0}, {"gamma", p.gamma}, {"a", p.a}, {"b", p.b},
                      {"kappa", p.kappa}, {"u0", p.u0}, {"c", p.c}, {"d", p.d}, {"G", p.G}});
  json roles = json::array();
  for (Role r : spec.roles) roles.push_back(std::string(to_string(r)));
  const auto matrix = [&](const SquareMatrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto r = m.row(i);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
  };
  return {{"schema", "cpgflex.network/1"}, {"n", spec.size()},   {"roles", roles},
          {"params", params},              {"w", matrix(spec.w)}, {"tau", matrix(spec.tau)}};
}

NetworkSpec network_from_json(const nlohmann::json& doc) {
  if (doc.value("schema", "") != "cpgflex.network/1")
    throw ConfigurationError("unsupported network schema");
  const std::size_t n = doc.at("n").get<std::size_t>();
  NetworkSpec spec;
  spec.params.resize(n);
  spec.roles.resize(n);
  spec.w = SquareMatrix(n);
  spec.tau = SquareMatrix(n);
  const auto& params = doc.at("params");
  const auto& roles = doc.at("roles");
  if (params.size() != n || roles.size() != n)
    throw ConfigurationError("params/roles length differs from n");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = params[i];
    spec.params[i] = {p.at("t0"), p.at("gamma"), p.at("a"), p.at("b"), p.at("kappa"),
                      p.at("u0"), p.at("c"),     p.at("d"), p.at("G")};
    spec.roles[i] = role_from_string(roles[i].get<std::string>());
  }
  const auto read = [&](const char* key, SquareMatrix& m) {
    const auto& rows = doc.at(key);
    if (rows.size() != n) throw ConfigurationError(std::string(key) + " has wrong row count");
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != n) throw ConfigurationError(std::string(key) + " row length");
      for (std::size_t j = 0; j < n; ++j) m(i, j) = rows[i][j].get<double>();
    }
  };
  read("w", spec.w);
  read("tau", spec.tau);
  spec.validate();
  return spec;
}

}  // namespace cpgflex::neuro
