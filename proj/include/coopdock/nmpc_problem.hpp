#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coopdock/thruster_allocation.hpp"
#include "coopdock/vessel_dynamics.hpp"

namespace coopdock {

inline constexpr int kJointStateDim = 12;
inline constexpr int kControlDim = 8;

using JointState = Eigen::Matrix<double, kJointStateDim, 1>;
using Vec12 = JointState;
using Mat12 = Eigen::Matrix<double, 12, 12>;

JointState join_states(const VesselState& usv1, const VesselState& usv2);
VesselState usv1_state(const JointState& q);
VesselState usv2_state(const JointState& q);

struct BiasPair {
  BiasForce usv1;
  BiasForce usv2;
};

// Target poses [x, y, psi] of both hulls.
struct ReferencePose {
  Vec3 usv1 = Vec3::Zero();
  Vec3 usv2 = Vec3::Zero();

  Eigen::Matrix<double, 6, 1> flat() const;
  static ReferencePose from_flat(const Eigen::Matrix<double, 6, 1>& r);
};

struct ReferenceCheck {
  bool valid = true;
  bool distance_ok = true;
  bool heading_ok = true;
  double distance = 0.0;        // planar distance between the two targets
  double heading_offset = 0.0;  // wrap(psi_ref1 - psi_ref2 - pi)
  std::string message;
};

// Docking targets must keep the hulls at least d_min apart and stern to stern.
ReferenceCheck validate_reference(const ReferencePose& ref, double d_min,
                                  double heading_tolerance = 1e-9);

struct MpcConfig {
  int horizon = 50;  // N
  double dt = 0.5;   // s
  Vec3 q1_weights = Vec3::Constant(1e3);
  Vec3 q2_weights = Vec3::Constant(1e3);
  Vec8 control_weights = Vec8::Ones();
  Vec8 f_min = -Vec8::Ones();
  Vec8 f_max = Vec8::Ones();
  Vec8 df_min = -Vec8::Ones();  // per second
  Vec8 df_max = Vec8::Ones();   // per second
  double d_min = 1.8;
  double v_max_1 = 3.3;
  double v_max_2 = 3.0;
  double slack_weight = 1e6;     // quadratic collision-slack penalty
  double slack_l1_weight = 1e6;  // linear collision-slack penalty, keeps the slack exact
  int max_iterations = 100;
  double tolerance = 1e-6;
  double time_budget_s = 0.0;  // wall clock per solve; 0 disables the budget

  void validate() const;

  // Controller settings of the case study with d_min from the two hull lengths.
  static MpcConfig case_study(const VesselParams& p1, const VesselParams& p2);
};

double tracking_cost(const JointState& q, const ReferencePose& ref, const Vec3& q1_weights,
                     const Vec3& q2_weights);
double control_cost(const Vec8& u, const Vec8& weights);

// One joint forward-Euler step of both hulls with the biases frozen.
JointState joint_step(const VesselParams& p1, const VesselParams& p2, const JointState& q,
                      const Vec8& u, const BiasPair& bias, double dt);

// Multiple-shooting transcription of the receding-horizon docking problem.
//
// Decision vector z = [q(0..N); u(0..N-1); s(0..N)], where s are the
// collision slacks. Equalities are the initial condition and the dynamics;
// inequalities are written as c(z) >= 0 and ordered by family: collision
// (N+1), speed (2(N+1)), input box (16N), input rate (16N), slack sign (N+1).
class NmpcProblem {
 public:
  NmpcProblem(MpcConfig config, VesselParams usv1, VesselParams usv2, JointState q_k, Vec8 u_prev,
              BiasPair bias, ReferencePose reference);

  const MpcConfig& config() const { return config_; }
  const VesselParams& usv1() const { return usv1_; }
  const VesselParams& usv2() const { return usv2_; }
  const JointState& initial_state() const { return q_k_; }
  const Vec8& previous_input() const { return u_prev_; }
  const BiasPair& bias() const { return bias_; }
  const ReferencePose& reference() const { return reference_; }
  // Reference with headings moved to the branch nearest the initial headings.
  const ReferencePose& unwrapped_reference() const { return unwrapped_ref_; }
  int horizon() const { return config_.horizon; }

  int num_primal_variables() const;  // states and inputs
  int num_slack_variables() const;
  int num_variables() const;
  int num_equality_constraints() const;
  int num_inequality_constraints() const;
  int num_collision_constraints() const;

  int state_offset(int h) const;
  int input_offset(int h) const;
  int slack_offset(int h) const;

  JointState step(const JointState& q, const Vec8& u) const;
  // d step / d q and d step / d u.
  Mat12 step_state_jacobian(const JointState& q, const Vec8& u) const;
  Eigen::Matrix<double, 12, 8> step_input_jacobian(const JointState& q, const Vec8& u) const;
  // Hessian of weights' step(q, u) with respect to [q; u].
  Eigen::Matrix<double, 20, 20> step_weighted_hessian(const JointState& q, const Vec8& u,
                                                      const JointState& weights) const;

  double stage_tracking_cost(const JointState& q) const;  // unwrapped-reference form

  double objective(const Eigen::VectorXd& z) const;
  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& z) const;
  Eigen::VectorXd equality_constraints(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd equality_jacobian(const Eigen::VectorXd& z) const;
  Eigen::VectorXd inequality_constraints(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd inequality_jacobian(const Eigen::VectorXd& z) const;

  // Cold-start point: q held at q_k, u_prev repeated, slacks just large
  // enough for the collision rows.
  Eigen::VectorXd cold_start() const;

 private:
  MpcConfig config_;
  VesselParams usv1_;
  VesselParams usv2_;
  JointState q_k_;
  Vec8 u_prev_;
  BiasPair bias_;
  ReferencePose reference_;
  ReferencePose unwrapped_ref_;
  Eigen::Matrix<double, 3, 4> fixed_map_;
};

// Convenience constructor mirroring the operation list of the controller.
NmpcProblem build_problem(const MpcConfig& config, const VesselParams& usv1,
                          const VesselParams& usv2, const JointState& q_k, const Vec8& u_prev,
                          const BiasPair& bias, const ReferencePose& reference);

}  // namespace coopdock
