#include "cpgflex/body.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cpgflex/errors.hpp"

namespace cpgflex::body {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Mat3 {
  double m[3][3];

  static Mat3 from(const Quat& q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
             {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
             {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
  }
  Vec3 operator*(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
  Vec3 transpose_times(const Vec3& v) const {
    return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
  }
};

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

// Sagittal-plane point rotated about the forward axis by the abduction angle,
// outward for both sides.
Vec3 abduct(std::size_t limb, double hip, double forward, double down) {
  const double phi = neuro::is_left(limb) ? hip : -hip;
  return {down * std::sin(phi), forward, down * std::cos(phi)};
}

struct ContactForce {
  Vec3 force;
  Vec3 torque;
};

// Penalty contact of one point at world-frame offset r from the centre of mass.
void contact(const Vec3& com, const Vec3& r, const Vec3& v_point, const MorphologyParams& m,
             ContactForce& acc, bool* touching = nullptr) {
  const double z = com.z + r.z;
  if (z >= 0.0) return;
  double fn = m.contact_stiffness * (-z) - m.contact_damping * v_point.z;
  if (fn <= 0.0) {
    if (touching) *touching = true;
    return;
  }
  fn = std::min(fn, m.max_normal_force);
  double fx = -m.friction_damping * v_point.x;
  double fy = -m.friction_damping * v_point.y;
  const double ft = std::sqrt(fx * fx + fy * fy);
  const double cap = m.friction_coefficient * fn;
  if (ft > cap) {
    fx *= cap / ft;
    fy *= cap / ft;
  }
  const Vec3 f{fx, fy, fn};
  acc.force += f;
  acc.torque += cross(r, f);
  if (touching) *touching = true;
}

constexpr std::array<std::array<double, 3>, 8> kCornerSigns{{{-1, 1, -1},
                                                             {1, 1, -1},
                                                             {-1, -1, -1},
                                                             {1, -1, -1},
                                                             {-1, 1, 1},
                                                             {1, 1, 1},
                                                             {-1, -1, 1},
                                                             {1, -1, 1}}};

}  // namespace

MorphologyParams MorphologyParams::normal() { return {}; }

MorphologyParams MorphologyParams::short_legged() {
  MorphologyParams m;
  m.upper_leg *= 0.60;
  m.lower_leg *= 0.67;
  return m;
}

MorphologyParams MorphologyParams::of(Morphology m) {
  return m == Morphology::Short ? short_legged() : normal();
}

Vec3 MorphologyParams::inertia() const {
  const double l = trunk_length, w = trunk_width, h = trunk_height;
  return {trunk_mass * (l * l + h * h) / 12.0, trunk_mass * (w * w + h * h) / 12.0,
          trunk_mass * (l * l + w * w) / 12.0};
}

void MorphologyParams::validate() const {
  if (!(upper_leg > 0 && lower_leg > 0 && trunk_length > 0 && trunk_width > 0 &&
        trunk_height > 0 && trunk_mass > 0))
    throw ConfigurationError("morphology lengths and mass must be positive");
  if (!(substep > 0 && servo_time_constant > 0 && servo_max_speed > 0 && max_normal_force > 0))
    throw ConfigurationError("substep and servo time constant must be positive");
}

Morphology morphology_from_string(const std::string& name) {
  if (name == "normal") return Morphology::Normal;
  if (name == "short") return Morphology::Short;
  throw ConfigurationError("unknown morphology '" + name + "' (expected normal|short)");
}

std::string to_string(Morphology m) { return m == Morphology::Short ? "short" : "normal"; }

nlohmann::json to_json(const JointCommandParams& c) {
  return {{"theta0_hip", c.theta0_hip}, {"theta0_leg", c.theta0_leg},
          {"theta0_knee", c.theta0_knee}, {"theta_lim_leg", c.theta_lim_leg},
          {"theta_lim_knee", c.theta_lim_knee}, {"A", c.A}, {"B", c.B},
          {"q_a_front", c.q_a_front}, {"q_b_front", c.q_b_front},
          {"q_a_side", c.q_a_side}, {"q_b_side", c.q_b_side}};
}

JointCommandParams command_from_json(const nlohmann::json& d) {
  JointCommandParams c;
  c.theta0_hip = d.at("theta0_hip");
  c.theta0_leg = d.at("theta0_leg");
  c.theta0_knee = d.at("theta0_knee");
  c.theta_lim_leg = d.value("theta_lim_leg", 90.0);
  c.theta_lim_knee = d.value("theta_lim_knee", 90.0);
  c.A = d.at("A");
  c.B = d.at("B");
  c.q_a_front = d.at("q_a_front");
  c.q_b_front = d.at("q_b_front");
  c.q_a_side = d.at("q_a_side");
  c.q_b_side = d.at("q_b_side");
  return c;
}

LegAngles standing_pose(const JointCommandParams& cmd) {
  LegAngles a;
  a.hip.fill(cmd.theta0_hip * kDegree);
  a.leg.fill(cmd.theta0_leg * kDegree);
  a.knee.fill(cmd.theta0_knee * kDegree);
  return a;
}

LegAngles joint_targets(std::span<const double, 4> delta_ha, std::span<const double, 4> delta_hb,
                        double dt_decision, const JointCommandParams& cmd, double theta_c) {
  if (!(dt_decision > 0.0)) throw ConfigurationError("decision interval must be positive");
  LegAngles out = standing_pose(cmd);
  const double lim_leg = cmd.theta_lim_leg * kDegree;
  const double lim_knee = cmd.theta_lim_knee * kDegree;
  for (std::size_t limb = 0; limb < 4; ++limb) {
    const double ra = delta_ha[limb] / dt_decision;
    const double rb = delta_hb[limb] / dt_decision;
    out.leg[limb] += lim_leg * (2.0 * logistic(2.0 * cmd.A / lim_leg * ra) - 1.0) + theta_c;
    out.knee[limb] += lim_knee * (2.0 * logistic(2.0 * cmd.B / lim_knee * rb) - 1.0);
  }
  return out;
}

LegAngles mirror(const LegAngles& a) {
  LegAngles m;
  for (std::size_t limb = 0; limb < 4; ++limb) {
    const std::size_t o = neuro::mirror_limb(limb);
    m.hip[o] = a.hip[limb];
    m.leg[o] = a.leg[limb];
    m.knee[o] = a.knee[limb];
  }
  return m;
}

BodyState mirror(const BodyState& s) {
  BodyState m = s;
  m.position.x = -s.position.x;
  m.velocity.x = -s.velocity.x;
  // Reflection x -> -x conjugates rotations: axis components y, z flip.
  m.orientation = {s.orientation.w, s.orientation.x, -s.orientation.y, -s.orientation.z};
  m.angular_velocity = {s.angular_velocity.x, -s.angular_velocity.y, -s.angular_velocity.z};
  m.joints = mirror(s.joints);
  for (std::size_t limb = 0; limb < 4; ++limb)
    m.foot_contact[neuro::mirror_limb(limb)] = s.foot_contact[limb];
  return m;
}

Tilt measure_tilt(const Quat& q) {
  const Vec3 top = q.rotate({0, 0, 1});
  const Vec3 front = q.rotate({0, 1, 0});
  Vec3 heading{front.x, front.y, 0.0};
  const double hn = norm(heading);
  // Nose pointing straight up or down: fall back to the body's own left axis.
  const Vec3 left = hn > 1e-9 ? Vec3{-heading.y / hn, heading.x / hn, 0.0} : q.rotate({-1, 0, 0});
  return {dot(top, left), front.z};
}

void MotorFeedback::scatter(std::span<double> currents) const {
  if (currents.size() < neuro::kCpgNeurons)
    throw ConfigurationError("feedback target has fewer than 12 neurons");
  for (std::size_t limb = 0; limb < 4; ++limb) {
    currents[neuro::cpg_index(limb, neuro::Role::Interneuron)] = 0.0;
    currents[neuro::cpg_index(limb, neuro::Role::MotorA)] = a[limb];
    currents[neuro::cpg_index(limb, neuro::Role::MotorB)] = b[limb];
  }
}

MotorFeedback tilt_feedback(const Tilt& tilt, const JointCommandParams& cmd) {
  MotorFeedback fb;
  for (std::size_t limb = 0; limb < 4; ++limb) {
    const double side = neuro::is_left(limb) ? tilt.side : -tilt.side;
    const double front = neuro::is_front(limb) ? tilt.front : -tilt.front;
    fb.a[limb] = cmd.q_a_side * side + cmd.q_a_front * front;
    fb.b[limb] = cmd.q_b_side * side + cmd.q_b_front * front;
  }
  return fb;
}

MotorFeedback tilt_feedback(const BodyState& state, const JointCommandParams& cmd) {
  return tilt_feedback(measure_tilt(state.orientation), cmd);
}

Vec3 hip_position(std::size_t limb, const MorphologyParams& m) {
  return {neuro::is_left(limb) ? -m.hip_offset_lateral : m.hip_offset_lateral,
          neuro::is_front(limb) ? m.hip_offset_forward : -m.hip_offset_forward, 0.0};
}

Vec3 knee_offset(std::size_t limb, double hip, double leg, const MorphologyParams& m) {
  return abduct(limb, hip, m.upper_leg * std::sin(leg), -m.upper_leg * std::cos(leg));
}

Vec3 foot_offset(std::size_t limb, double hip, double leg, double knee, const MorphologyParams& m) {
  const double forward = m.upper_leg * std::sin(leg) + m.lower_leg * std::sin(leg + knee);
  const double down = -m.upper_leg * std::cos(leg) - m.lower_leg * std::cos(leg + knee);
  return abduct(limb, hip, forward, down);
}

double standing_height(const JointCommandParams& cmd, const MorphologyParams& m) {
  const LegAngles pose = standing_pose(cmd);
  return -foot_offset(0, pose.hip[0], pose.leg[0], pose.knee[0], m).z;
}

double reference_height(const MorphologyParams& m) { return m.upper_leg + m.lower_leg; }

BodyState initial_state(const JointCommandParams& cmd, const MorphologyParams& m) {
  BodyState s;
  s.joints = standing_pose(cmd);
  s.position = {0.0, 0.0, standing_height(cmd, m)};
  return s;
}

BodyState physics_step(const BodyState& state, const LegAngles& targets,
                       const MorphologyParams& m, double dt) {
  if (!(dt > 0.0)) throw ConfigurationError("physics dt must be positive");
  const auto substeps = std::max<long long>(1, std::llround(dt / m.substep));
  const double h = dt / static_cast<double>(substeps);
  const double alpha = 1.0 - std::exp(-h / m.servo_time_constant);
  const double max_move = m.servo_max_speed * h;
  const auto servo = [&](double error) { return std::clamp(alpha * error, -max_move, max_move); };
  const Vec3 inertia = m.inertia();
  const Vec3 g{0.0, 0.0, -m.gravity};
  const double half_l = 0.5 * m.trunk_length, half_w = 0.5 * m.trunk_width,
               half_h = 0.5 * m.trunk_height;

  BodyState s = state;
  for (long long step = 0; step < substeps; ++step) {
    // Leg kinematics before and after the servo update give body-frame point velocities.
    std::array<Vec3, 4> knee_old, foot_old, knee_new, foot_new;
    for (std::size_t limb = 0; limb < 4; ++limb) {
      const Vec3 hip = hip_position(limb, m);
      knee_old[limb] = hip + knee_offset(limb, s.joints.hip[limb], s.joints.leg[limb], m);
      foot_old[limb] =
          hip + foot_offset(limb, s.joints.hip[limb], s.joints.leg[limb], s.joints.knee[limb], m);
      s.joints.hip[limb] += servo(targets.hip[limb] - s.joints.hip[limb]);
      s.joints.leg[limb] += servo(targets.leg[limb] - s.joints.leg[limb]);
      s.joints.knee[limb] += servo(targets.knee[limb] - s.joints.knee[limb]);
      knee_new[limb] = hip + knee_offset(limb, s.joints.hip[limb], s.joints.leg[limb], m);
      foot_new[limb] =
          hip + foot_offset(limb, s.joints.hip[limb], s.joints.leg[limb], s.joints.knee[limb], m);
    }

    const Mat3 R = Mat3::from(s.orientation);
    const auto point_velocity = [&](const Vec3& r_world, const Vec3& rel_body) {
      return s.velocity + cross(s.angular_velocity, r_world) + R * rel_body;
    };

    std::array<ContactForce, 4> per_limb{};
    for (std::size_t limb = 0; limb < 4; ++limb) {
      bool touching = false;
      const Vec3 rk = R * knee_new[limb];
      contact(s.position, rk, point_velocity(rk, (knee_new[limb] - knee_old[limb]) * (1.0 / h)), m,
              per_limb[limb]);
      const Vec3 rf = R * foot_new[limb];
      contact(s.position, rf, point_velocity(rf, (foot_new[limb] - foot_old[limb]) * (1.0 / h)), m,
              per_limb[limb], &touching);
      s.foot_contact[limb] = touching;
    }
    std::array<ContactForce, 8> corners{};
    for (std::size_t c = 0; c < 8; ++c) {
      const auto& sg = kCornerSigns[c];
      const Vec3 r = R * Vec3{sg[0] * half_w, sg[1] * half_l, sg[2] * half_h};
      contact(s.position, r, point_velocity(r, {}), m, corners[c]);
    }
    // Left/right pairs are added first so mirrored states sum identically.
    const auto pair_sum = [](const ContactForce& a, const ContactForce& b) {
      return ContactForce{a.force + b.force, a.torque + b.torque};
    };
    const ContactForce front = pair_sum(per_limb[0], per_limb[1]);
    const ContactForce hind = pair_sum(per_limb[2], per_limb[3]);
    ContactForce total = pair_sum(front, hind);
    for (std::size_t c = 0; c < 8; c += 2) {
      const ContactForce p = pair_sum(corners[c], corners[c + 1]);
      total.force += p.force;
      total.torque += p.torque;
    }

    // Translation: exact for gravity, symplectic Euler for contact forces.
    const Vec3 a_contact = total.force * (1.0 / m.trunk_mass);
    s.position += s.velocity * h + g * (0.5 * h * h) + a_contact * (h * h);
    s.velocity += (a_contact + g) * h;

    // Rotation: Euler's equations in the body frame, midpoint rule.
    const Vec3 tau_b = R.transpose_times(total.torque);
    const auto omega_dot = [&](const Vec3& w) {
      const Vec3 iw{inertia.x * w.x, inertia.y * w.y, inertia.z * w.z};
      const Vec3 rhs = tau_b - cross(w, iw);
      return Vec3{rhs.x / inertia.x, rhs.y / inertia.y, rhs.z / inertia.z};
    };
    Vec3 w_b = R.transpose_times(s.angular_velocity);
    const Vec3 w_mid = w_b + omega_dot(w_b) * (0.5 * h);
    w_b += omega_dot(w_mid) * h;
    const double angle = norm(w_b) * h;
    if (angle > 0.0) s.orientation = (s.orientation * Quat::from_axis_angle(w_b, angle)).normalized();
    s.angular_velocity = s.orientation.rotate(w_b);
    s.time += h;

    if (!finite(s.position) || !finite(s.velocity) || !finite(s.angular_velocity) ||
        !std::isfinite(s.orientation.w) || norm(s.velocity) > 1e3 ||
        norm(s.angular_velocity) > 1e4)
      throw SimulationDiverged("body state diverged at t=" + std::to_string(s.time));
  }
  return s;
}

double mechanical_energy(const BodyState& s, const MorphologyParams& m) {
  const Vec3 I = m.inertia();
  const Vec3 w = s.orientation.inverse_rotate(s.angular_velocity);
  return 0.5 * m.trunk_mass * dot(s.velocity, s.velocity) +
         0.5 * (I.x * w.x * w.x + I.y * w.y * w.y + I.z * w.z * w.z) +
         m.trunk_mass * m.gravity * s.position.z;
}

}  // namespace cpgflex::body
