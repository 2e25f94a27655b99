#pragma once

// Reduced-order quadruped: a rigid trunk carrying four massless, servoed legs
// (hip abduction, leg pitch, knee pitch). Feet, knees and the trunk's lower
// corners touch a flat ground through penalty springs with viscous damping and
// Coulomb-capped viscous friction.
//
// World frame: x to the robot's right, y forward, z up.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cpgflex/geometry.hpp"
#include "cpgflex/neuro.hpp"

namespace cpgflex::body {

inline constexpr double kDegree = 3.14159265358979323846 / 180.0;

enum class Morphology { Normal, Short };

struct MorphologyParams {
  double trunk_mass = 2.2;                         // kg, legs included
  double trunk_length = 0.42;                      // m
  double trunk_width = 0.22;                       // m
  double trunk_height = 0.08;                      // m
  double hip_offset_forward = 0.1946;              // m from the centre of mass
  double hip_offset_lateral = 0.1;                 // m
  double upper_leg = 0.16;                         // m
  double lower_leg = 0.16;                         // m
  double contact_stiffness = 5000.0;               // N/m per contact point
  double contact_damping = 60.0;                   // N s/m
  double friction_damping = 150.0;                 // N s/m, tangential slip
  double friction_coefficient = 0.9;
  double gravity = 9.81;                           // m/s^2
  double servo_time_constant = 0.04;               // s
  double servo_max_speed = 6.0;                    // rad/s per joint
  double max_normal_force = 60.0;                  // N per contact point (actuator saturation)
  double substep = 0.002;                          // s, internal integration step

  static MorphologyParams normal();
  /// Upper leg 40% shorter, lower leg 33% shorter.
  static MorphologyParams short_legged();
  static MorphologyParams of(Morphology m);

  /// Principal moments of inertia of the trunk box.
  Vec3 inertia() const;
  void validate() const;
};

Morphology morphology_from_string(const std::string& name);
std::string to_string(Morphology m);

struct JointCommandParams {
  double theta0_hip = 10.0;     // degrees
  double theta0_leg = 30.0;     // degrees, > 0
  double theta0_knee = -60.0;   // degrees, < 0
  double theta_lim_leg = 90.0;  // degrees
  double theta_lim_knee = 90.0; // degrees
  double A = 0.02;
  double B = 0.02;
  double q_a_front = 0.0;
  double q_b_front = 0.0;
  double q_a_side = 0.0;
  double q_b_side = 0.0;
};

nlohmann::json to_json(const JointCommandParams& cmd);
JointCommandParams command_from_json(const nlohmann::json& doc);

/// Joint angles in radians, limb order LF, RF, LH, RH.
struct LegAngles {
  std::array<double, 4> hip{};
  std::array<double, 4> leg{};
  std::array<double, 4> knee{};

  friend bool operator==(const LegAngles&, const LegAngles&) = default;
};

/// Pose held at rest: hips at theta0_hip, legs at theta0_leg, knees at theta0_knee.
LegAngles standing_pose(const JointCommandParams& cmd);

/// Maps the change in rectified A/B outputs over one decision interval to leg
/// and knee angles. Hip angles are the constant standing values.
LegAngles joint_targets(std::span<const double, 4> delta_ha, std::span<const double, 4> delta_hb,
                        double dt_decision, const JointCommandParams& cmd, double theta_c);

struct BodyState {
  Vec3 position;
  Quat orientation;
  Vec3 velocity;
  Vec3 angular_velocity;  // world frame
  LegAngles joints;
  std::array<bool, 4> foot_contact{};
  double time = 0.0;

  friend bool operator==(const BodyState&, const BodyState&) = default;
};

/// Left-right reflection of a state (x -> -x, limbs swapped).
BodyState mirror(const BodyState& state);
LegAngles mirror(const LegAngles& angles);

/// Sideways component of the trunk-top normal (positive when the top faces
/// the robot's left, i.e. the left side is lower) and upward component of
/// the trunk-front normal (positive nose up).
struct Tilt {
  double side = 0.0;
  double front = 0.0;
};

Tilt measure_tilt(const Quat& orientation);

/// Feedback currents for the A and B motor neurons of each limb.
struct MotorFeedback {
  std::array<double, 4> a{};
  std::array<double, 4> b{};

  /// Scatters into a per-neuron vector of length `neurons` (CPG block first).
  void scatter(std::span<double> currents) const;
};

MotorFeedback tilt_feedback(const Tilt& tilt, const JointCommandParams& cmd);
MotorFeedback tilt_feedback(const BodyState& state, const JointCommandParams& cmd);

/// Foot position relative to the hip, in the trunk frame, for the given joint angles.
Vec3 foot_offset(std::size_t limb, double hip, double leg, double knee, const MorphologyParams& m);
Vec3 knee_offset(std::size_t limb, double hip, double leg, const MorphologyParams& m);
Vec3 hip_position(std::size_t limb, const MorphologyParams& m);

/// Height of the trunk centre above the feet for the standing pose (no penetration).
double standing_height(const JointCommandParams& cmd, const MorphologyParams& m);

/// Hip height with the legs straight down.
double reference_height(const MorphologyParams& m);

/// Trunk resting on its feet in the standing pose, level, at rest.
BodyState initial_state(const JointCommandParams& cmd, const MorphologyParams& m);

/// Advances the trunk by `dt` (split into internal substeps) while the joints
/// track `targets` with a first-order lag. Throws SimulationDiverged.
BodyState physics_step(const BodyState& state, const LegAngles& targets,
                       const MorphologyParams& morphology, double dt = 0.02);

/// Total mechanical energy of the trunk (kinetic, rotational, potential).
double mechanical_energy(const BodyState& state, const MorphologyParams& m);

// ---------------------------------------------------------------------------
// Trials

/// Piecewise-linear control schedule: each stage ramps I_DC and theta_C
/// linearly from its start to its end value.
struct Stage {
  double duration = 0.0;
  double i_dc_start = 0.5;
  double i_dc_end = 0.5;
  double theta_c_start = 0.0;  // rad
  double theta_c_end = 0.0;    // rad
};

struct Schedule {
  std::vector<Stage> stages;

  double duration() const;
  struct Controls {
    double i_dc;
    double theta_c;
  };
  Controls at(double t) const;

  static Schedule constant(double duration, double i_dc, double theta_c);
};

nlohmann::json to_json(const Schedule& s);
Schedule schedule_from_json(const nlohmann::json& doc);

struct TrialOptions {
  double dt_cpg = 0.008;
  double dt_physics = 0.02;
  double dt_decision = 0.1;
  double burn_in = 8.0;
  double actuation_ramp = 2.0;
  bool record = false;
  /// External input per trial CPG step (post low-pass). Empty means silence.
  std::vector<double> stimulus;
  neuro::Model model = neuro::Model::Modified;
};

struct StageDisplacement {
  double x = 0.0;  // sideways, m
  double y = 0.0;  // forward, m
};

struct TrialMetrics {
  std::vector<StageDisplacement> stages;
  double h_tot = 0.0;
  double t_tot = 0.0;
  bool fallen = false;
  std::optional<double> divergence_time;
  std::size_t cpg_steps = 0;
  std::size_t physics_steps = 0;
  std::size_t decisions = 0;
  double max_cpg_lead = 0.0;  // CPG clock minus decision time, s
};

/// Time series recorded when TrialOptions::record is set.
struct TrialTrace {
  std::size_t neurons = 0;
  std::vector<double> cpg_time;      // per CPG step (trial phase only)
  std::vector<double> neuron_h;      // [k * neurons + i], rectified outputs
  std::vector<double> neuron_u;      // same layout, membrane states
  std::vector<double> body_time;     // per physics step
  std::vector<LegAngles> joints;     // actual joint angles
  std::vector<Vec3> position;
  std::vector<double> height;        // trunk height over standing height, capped at 1
  std::vector<Quat> orientation;
  std::vector<double> i_dc;
  std::vector<double> theta_c;

  double h_at(std::size_t k, std::size_t i) const { return neuron_h[k * neurons + i]; }
  /// Series of one neuron's rectified output.
  std::vector<double> neuron_series(std::size_t i) const;
  std::vector<double> state_series(std::size_t i) const;
  std::vector<double> leg_series(std::size_t limb) const;
};

struct TrialResult {
  TrialMetrics metrics;
  TrialTrace trace;
};

/// Runs burn-in, then the scheduled trial with CPG, physics and decision
/// exchange on their own clocks. The first 12 neurons of `controller` must be
/// the CPG block. Initial u is drawn from `seed`.
TrialResult run_trial(const neuro::NetworkSpec& controller, const JointCommandParams& cmd,
                      const MorphologyParams& morphology, const Schedule& schedule,
                      std::uint64_t seed, const TrialOptions& options = {});

/// Same, from an explicit initial network state (burn-in still applies).
TrialResult run_trial(const neuro::NetworkSpec& controller, const JointCommandParams& cmd,
                      const MorphologyParams& morphology, const Schedule& schedule,
                      const neuro::NetworkState& initial, const TrialOptions& options = {});

/// CSV with columns time, joint angles, trunk pose and neuron outputs.
void write_trajectory_csv(const TrialTrace& trace, const std::string& path);

}  // namespace cpgflex::body
