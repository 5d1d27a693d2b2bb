#pragma once

#include <Eigen/Dense>

namespace coopdock {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

enum class ThrusterLayout {
  FixedQuad,   // two stern thrusters, two tilted bow thrusters
  TwinAzimuth  // two azimuth thrusters
};

// Physical description of one hull. Units: kg, kg*m^2, N*s/m, m, rad, m/s.
struct VesselParams {
  Mat3 mass = Mat3::Identity();
  Mat3 damping = Mat3::Identity();
  double length = 1.0;     // d_i, hull length parameter
  double width = 1.0;      // w_i, hull width parameter
  double bow_tilt = 0.0;   // alpha, fixed-thruster layout only
  double max_speed = 1.0;  // planar speed bound
  ThrusterLayout layout = ThrusterLayout::FixedQuad;

  // Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
};

// Reference hulls used throughout the case study.
VesselParams usv1_params();
VesselParams usv2_params();

// Pose eta = [x, y, psi] in the inertial frame, velocity nu = [u, v, omega]
// in the body frame.
struct VesselState {
  Vec3 eta = Vec3::Zero();
  Vec3 nu = Vec3::Zero();

  Vec6 stacked() const;
  static VesselState from_stacked(const Vec6& q);
};

// Lumped exogenous force [b_x, b_y, b_psi], fixed in the inertial frame.
struct BiasForce {
  Vec3 f = Vec3::Zero();
};

enum class PlantFidelity { LinearLowSpeed, WithCoriolis };

Mat3 rotation_matrix(double psi);
// d/dpsi of rotation_matrix(psi).
Mat3 rotation_matrix_derivative(double psi);

// Maps theta into (-pi, pi].
double wrap_angle(double theta);

// Rotates the inertial bias into the body frame at heading psi.
Vec3 body_bias(const BiasForce& bias, double psi);

// Rigid-body 3-DOF Coriolis/centripetal matrix built from the inertia matrix.
Mat3 coriolis_matrix(const VesselParams& params, const Vec3& nu);

// [eta_dot; nu_dot].
Vec6 continuous_dynamics(const VesselParams& params, const VesselState& state, const Vec3& tau,
                         const BiasForce& bias,
                         PlantFidelity fidelity = PlantFidelity::LinearLowSpeed);

// Forward Euler without heading wrap. This is the prediction map used by the
// controller and the observer; keeping psi continuous keeps it smooth.
Vec6 euler_map(const VesselParams& params, const Vec6& q, const Vec3& tau, const BiasForce& bias,
               double dt, PlantFidelity fidelity = PlantFidelity::LinearLowSpeed);

// Partial derivatives of euler_map (LinearLowSpeed) with respect to q and tau.
Mat6 euler_state_jacobian(const VesselParams& params, const Vec6& q, const BiasForce& bias,
                          double dt);
Eigen::Matrix<double, 6, 3> euler_force_jacobian(const VesselParams& params, double dt);

// Forward Euler step with the heading wrapped into (-pi, pi].
VesselState euler_step(const VesselParams& params, const VesselState& state, const Vec3& tau,
                       const BiasForce& bias, PlantFidelity fidelity, double dt);

}  // namespace coopdock
