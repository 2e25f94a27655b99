#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cpgflex/body.hpp"
#include "cpgflex/errors.hpp"

namespace cpgflex::body {

namespace {

constexpr double kClockTolerance = 1e-9;

std::size_t steps_for(double duration, double dt) {
  return static_cast<std::size_t>(std::llround(duration / dt));
}

void check_controller(const neuro::NetworkSpec& spec) {
  spec.validate();
  if (spec.size() < neuro::kCpgNeurons)
    throw ConfigurationError("controller needs at least the 12 CPG neurons");
  for (std::size_t i = 0; i < neuro::kCpgNeurons; ++i) {
    const auto expected = i % 3 == 0   ? neuro::Role::Interneuron
                          : i % 3 == 1 ? neuro::Role::MotorA
                                       : neuro::Role::MotorB;
    if (spec.roles[i] != expected)
      throw ConfigurationError("neuron " + std::to_string(i) + " is not in CPG layout");
  }
}

}  // namespace

double Schedule::duration() const {
  double total = 0.0;
  for (const auto& s : stages) total += s.duration;
  return total;
}

Schedule::Controls Schedule::at(double t) const {
  double start = 0.0;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const Stage& s = stages[k];
    const bool last = k + 1 == stages.size();
    if (t < start + s.duration || last) {
      const double f = s.duration > 0.0 ? std::clamp((t - start) / s.duration, 0.0, 1.0) : 1.0;
      return {s.i_dc_start + f * (s.i_dc_end - s.i_dc_start),
              s.theta_c_start + f * (s.theta_c_end - s.theta_c_start)};
    }
    start += s.duration;
  }
  return {0.0, 0.0};
}

Schedule Schedule::constant(double duration, double i_dc, double theta_c) {
  return Schedule{{Stage{duration, i_dc, i_dc, theta_c, theta_c}}};
}

nlohmann::json to_json(const Schedule& s) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& st : s.stages)
    stages.push_back({{"duration", st.duration},
                      {"i_dc", {st.i_dc_start, st.i_dc_end}},
                      {"theta_c", {st.theta_c_start, st.theta_c_end}}});
  return {{"stages", stages}};
}

Schedule schedule_from_json(const nlohmann::json& doc) {
  Schedule s;
  for (const auto& st : doc.at("stages")) {
    Stage stage;
    stage.duration = st.at("duration");
    const auto pair = [&](const char* key, double& a, double& b, double fallback) {
      if (!st.contains(key)) {
        a = b = fallback;
      } else if (st[key].is_array()) {
        if (st[key].size() != 2)
          throw ConfigurationError(std::string("schedule field '") + key + "' needs [start, end]");
        a = st[key][0];
        b = st[key][1];
      } else {
        a = b = st[key].get<double>();
      }
    };
    pair("i_dc", stage.i_dc_start, stage.i_dc_end, 0.5);
    pair("theta_c", stage.theta_c_start, stage.theta_c_end, 0.0);
    if (!(stage.duration >= 0.0)) throw ConfigurationError("stage duration must be >= 0");
    s.stages.push_back(stage);
  }
  return s;
}

std::vector<double> TrialTrace::neuron_series(std::size_t i) const {
  std::vector<double> out(cpg_time.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = h_at(k, i);
  return out;
}

std::vector<double> TrialTrace::state_series(std::size_t i) const {
  std::vector<double> out(cpg_time.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = neuron_u[k * neurons + i];
  return out;
}

std::vector<double> TrialTrace::leg_series(std::size_t limb) const {
  std::vector<double> out(joints.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = joints[k].leg[limb];
  return out;
}

TrialResult run_trial(const neuro::NetworkSpec& controller, const JointCommandParams& cmd,
                      const MorphologyParams& morphology, const Schedule& schedule,
                      std::uint64_t seed, const TrialOptions& options) {
  return run_trial(controller, cmd, morphology, schedule,
                   neuro::random_initial_state(controller.size(), seed), options);
}

TrialResult run_trial(const neuro::NetworkSpec& controller, const JointCommandParams& cmd,
                      const MorphologyParams& morphology, const Schedule& schedule,
                      const neuro::NetworkState& initial, const TrialOptions& opt) {
  check_controller(controller);
  morphology.validate();
  const double total = schedule.duration();
  if (!(total > 0.0))
    throw ConfigurationError("schedule has zero duration; trial metrics are undefined");
  if (!(opt.dt_cpg > 0 && opt.dt_physics > 0 && opt.dt_decision > 0))
    throw ConfigurationError("time steps must be positive");

  const std::size_t n = controller.size();
  const std::size_t cpg_total = steps_for(total, opt.dt_cpg);
  const std::size_t decisions = steps_for(total, opt.dt_decision);
  const std::size_t physics_per_decision = steps_for(opt.dt_decision, opt.dt_physics);
  if (!opt.stimulus.empty() && opt.stimulus.size() < cpg_total)
    throw ConfigurationError("stimulus shorter than the trial");

  neuro::Integrator net(controller, initial, opt.model);
  neuro::StepInput input;
  input.i_fb.assign(n, 0.0);

  // Burn-in: CPG alone at the initial drive, no feedback, no stimulus.
  input.i_dc = schedule.at(0.0).i_dc;
  const std::size_t burn_steps = steps_for(opt.burn_in, opt.dt_cpg);
  for (std::size_t k = 0; k < burn_steps; ++k) net.step(input, opt.dt_cpg);

  TrialResult result;
  TrialMetrics& metrics = result.metrics;
  TrialTrace& trace = result.trace;
  trace.neurons = n;

  const double h_stand = standing_height(cmd, morphology);
  BodyState body = initial_state(cmd, morphology);
  const LegAngles stand = standing_pose(cmd);
  LegAngles targets = stand;

  // Stage boundaries in physics-step units.
  std::vector<std::size_t> boundaries{0};
  {
    double t = 0.0;
    for (const auto& st : schedule.stages) {
      t += st.duration;
      boundaries.push_back(steps_for(t, opt.dt_physics));
    }
  }
  std::vector<Vec3> boundary_pos(boundaries.size(), body.position);
  std::size_t next_boundary = 1;
  while (next_boundary < boundaries.size() && boundaries[next_boundary] == 0) ++next_boundary;

  std::array<double, 4> prev_a{}, prev_b{};
  for (std::size_t limb = 0; limb < 4; ++limb) {
    prev_a[limb] = net.output(neuro::cpg_index(limb, neuro::Role::MotorA));
    prev_b[limb] = net.output(neuro::cpg_index(limb, neuro::Role::MotorB));
  }

  double height_sum = 0.0;
  double tilt_sq_sum = 0.0;
  std::size_t cpg_step = 0;
  std::size_t physics_step_count = 0;
  bool diverged = false;
  Vec3 last_position = body.position;

  const auto advance_cpg = [&](std::size_t upto) {
    while (cpg_step < upto) {
      const double t = static_cast<double>(cpg_step) * opt.dt_cpg;
      input.i_dc = schedule.at(t).i_dc;
      input.i_ext = opt.stimulus.empty() ? 0.0 : opt.stimulus[cpg_step];
      net.step(input, opt.dt_cpg);
      ++cpg_step;
      if (opt.record) {
        trace.cpg_time.push_back(static_cast<double>(cpg_step) * opt.dt_cpg);
        for (std::size_t i = 0; i < n; ++i) {
          trace.neuron_h.push_back(net.output(i));
          trace.neuron_u.push_back(net.state().u[i]);
        }
      }
    }
  };

  const std::size_t total_physics = decisions * physics_per_decision;
  for (std::size_t k = 0; k < decisions; ++k) {
    const double t_decision = static_cast<double>(k) * opt.dt_decision;
    // First CPG step at or after the decision time.
    const auto due = static_cast<std::size_t>(
        std::ceil(t_decision / opt.dt_cpg - kClockTolerance));
    if (!diverged) {
      try {
        advance_cpg(std::min(due, cpg_total));
      } catch (const IntegrationBlowup&) {
        diverged = true;
        metrics.divergence_time = t_decision;
      }
    }
    metrics.max_cpg_lead =
        std::max(metrics.max_cpg_lead, static_cast<double>(cpg_step) * opt.dt_cpg - t_decision);
    ++metrics.decisions;

    const auto controls = schedule.at(t_decision);
    if (!diverged) {
      std::array<double, 4> da{}, db{};
      for (std::size_t limb = 0; limb < 4; ++limb) {
        const double ha = net.output(neuro::cpg_index(limb, neuro::Role::MotorA));
        const double hb = net.output(neuro::cpg_index(limb, neuro::Role::MotorB));
        da[limb] = ha - prev_a[limb];
        db[limb] = hb - prev_b[limb];
        prev_a[limb] = ha;
        prev_b[limb] = hb;
      }
      const LegAngles command = joint_targets(da, db, opt.dt_decision, cmd, controls.theta_c);
      const double ramp =
          opt.actuation_ramp > 0.0 ? std::min(1.0, t_decision / opt.actuation_ramp) : 1.0;
      for (std::size_t limb = 0; limb < 4; ++limb) {
        targets.hip[limb] = stand.hip[limb] + ramp * (command.hip[limb] - stand.hip[limb]);
        targets.leg[limb] = stand.leg[limb] + ramp * (command.leg[limb] - stand.leg[limb]);
        targets.knee[limb] = stand.knee[limb] + ramp * (command.knee[limb] - stand.knee[limb]);
      }
      tilt_feedback(body, cmd).scatter(input.i_fb);
    }

    for (std::size_t p = 0; p < physics_per_decision; ++p) {
      if (!diverged) {
        try {
          body = physics_step(body, targets, morphology, opt.dt_physics);
          last_position = body.position;
        } catch (const SimulationDiverged&) {
          diverged = true;
          metrics.divergence_time = static_cast<double>(physics_step_count) * opt.dt_physics;
        }
      }
      ++physics_step_count;
      double height = 0.0;
      if (!diverged) {
        height = std::min(body.position.z / h_stand, 1.0);
        height_sum += height;
        const Vec3 top = body.orientation.rotate({0, 0, 1});
        tilt_sq_sum += top.x * top.x + top.y * top.y;  // |n x g|^2
      } else {
        tilt_sq_sum += 1.0;
      }
      while (next_boundary < boundaries.size() && boundaries[next_boundary] <= physics_step_count) {
        boundary_pos[next_boundary] = last_position;
        ++next_boundary;
      }
      if (opt.record) {
        trace.body_time.push_back(static_cast<double>(physics_step_count) * opt.dt_physics);
        trace.joints.push_back(body.joints);
        trace.position.push_back(body.position);
        trace.height.push_back(height);
        trace.orientation.push_back(body.orientation);
        trace.i_dc.push_back(controls.i_dc);
        trace.theta_c.push_back(controls.theta_c);
      }
    }
  }
  if (!diverged) {
    try {
      advance_cpg(cpg_total);
    } catch (const IntegrationBlowup&) {
      diverged = true;
      metrics.divergence_time = total;
    }
  }
  for (; next_boundary < boundaries.size(); ++next_boundary)
    boundary_pos[next_boundary] = last_position;

  metrics.fallen = diverged;
  metrics.cpg_steps = cpg_step;
  metrics.physics_steps = physics_step_count;
  const double samples = static_cast<double>(std::max<std::size_t>(1, total_physics));
  metrics.h_tot = height_sum / samples;
  metrics.t_tot = std::sqrt(tilt_sq_sum / samples);
  for (std::size_t j = 1; j < boundary_pos.size(); ++j) {
    metrics.stages.push_back({boundary_pos[j].x - boundary_pos[j - 1].x,
                              boundary_pos[j].y - boundary_pos[j - 1].y});
  }
  return result;
}

void write_trajectory_csv(const TrialTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigurationError("cannot write " + path);
  static constexpr const char* kLimbNames[] = {"lf", "rf", "lh", "rh"};
  out << "time,i_dc,theta_c";
  for (const char* l : kLimbNames) out << ",leg_" << l << ",knee_" << l;
  out << ",x,y,z,qw,qx,qy,qz,height";
  for (std::size_t i = 0; i < trace.neurons; ++i) out << ",h" << i;
  for (std::size_t i = 0; i < trace.neurons; ++i) out << ",u" << i;
  out << '\n';
  const double dt_cpg =
      trace.cpg_time.empty() ? 1.0 : trace.cpg_time.front();  // first CPG sample time = dt
  for (std::size_t k = 0; k < trace.body_time.size(); ++k) {
    const double t = trace.body_time[k];
    out << fmt::format("{:.6f},{:.6g},{:.6g}", t, trace.i_dc[k], trace.theta_c[k]);
    for (std::size_t limb = 0; limb < 4; ++limb)
      out << fmt::format(",{:.9g},{:.9g}", trace.joints[k].leg[limb], trace.joints[k].knee[limb]);
    const auto& p = trace.position[k];
    const auto& q = trace.orientation[k];
    out << fmt::format(",{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}", p.x, p.y, p.z, q.w, q.x,
                       q.y, q.z);
    out << fmt::format(",{:.9g}", trace.height[k]);
    // Latest CPG sample at or before t.
    if (!trace.cpg_time.empty()) {
      auto idx = static_cast<std::size_t>(std::floor(t / dt_cpg + 1e-9));
      idx = std::clamp<std::size_t>(idx, 1, trace.cpg_time.size()) - 1;
      for (std::size_t i = 0; i < trace.neurons; ++i)
        out << fmt::format(",{:.9g}", trace.h_at(idx, i));
      for (std::size_t i = 0; i < trace.neurons; ++i)
        out << fmt::format(",{:.9g}", trace.neuron_u[idx * trace.neurons + i]);
    }
    out << '\n';
  }
}

}  // namespace cpgflex::body
