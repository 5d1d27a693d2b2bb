#include "coopdock/vessel_dynamics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace coopdock {

namespace {

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

bool is_positive_definite(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (m + m.transpose()));
  return eig.eigenvalues().minCoeff() > 0.0;
}

}  // namespace

void VesselParams::validate() const {
  if (!mass.allFinite() || !damping.allFinite()) {
    throw std::invalid_argument("vessel matrices must be finite");
  }
  if (!mass.isApprox(mass.transpose(), 1e-12) || !is_positive_definite(mass)) {
    throw std::invalid_argument("inertia matrix must be symmetric positive definite");
  }
  if (!is_positive_definite(damping)) {
    throw std::invalid_argument("linear damping matrix must be positive definite");
  }
  if (!(length > 0.0) || !(width > 0.0) || !(max_speed > 0.0)) {
    throw std::invalid_argument("length, width and max speed must be positive");
  }
  require_finite(bow_tilt, "bow thruster tilt");
}

VesselParams usv1_params() {
  VesselParams p;
  p.mass << 1426, 0, 0,
            0, 3250, 130,
            0, 130, 7619;
  p.damping << 343, 0, 0,
               0, 825, 33,
               0, 33, 1890;
  p.length = 2.1;
  p.width = 0.8;
  p.bow_tilt = 15.0 * std::numbers::pi / 180.0;
  p.max_speed = 3.3;
  p.layout = ThrusterLayout::FixedQuad;
  return p;
}

VesselParams usv2_params() {
  VesselParams p;
  p.mass = Vec3(774, 1625, 3810).asDiagonal();
  p.damping = Vec3(704, 412, 945).asDiagonal();
  p.length = 1.5;
  p.width = 0.85;
  p.bow_tilt = 0.0;
  p.max_speed = 3.0;
  p.layout = ThrusterLayout::TwinAzimuth;
  return p;
}

Vec6 VesselState::stacked() const {
  Vec6 q;
  q << eta, nu;
  return q;
}

VesselState VesselState::from_stacked(const Vec6& q) {
  return VesselState{q.head<3>(), q.tail<3>()};
}

Mat3 rotation_matrix(double psi) {
  require_finite(psi, "heading");
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  Mat3 r;
  r << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return r;
}

Mat3 rotation_matrix_derivative(double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  Mat3 r;
  r << -s, -c, 0,
       c, -s, 0,
       0, 0, 0;
  return r;
}

double wrap_angle(double theta) {
  require_finite(theta, "angle");
  if (theta > -std::numbers::pi && theta <= std::numbers::pi) {
    return theta;
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(theta + std::numbers::pi, two_pi);
  if (r < 0.0) {
    r += two_pi;
  }
  r -= std::numbers::pi;
  // fmod lands exactly on -pi for odd multiples of pi; the interval is (-pi, pi].
  return r <= -std::numbers::pi ? std::numbers::pi : r;
}

Vec3 body_bias(const BiasForce& bias, double psi) {
  return rotation_matrix(psi).transpose() * bias.f;
}

Mat3 coriolis_matrix(const VesselParams& params, const Vec3& nu) {
  const Mat3& m = params.mass;
  const double c13 = -(m(1, 1) * nu(1) + m(1, 2) * nu(2));
  const double c23 = m(0, 0) * nu(0);
  Mat3 c;
  c << 0, 0, c13,
       0, 0, c23,
       -c13, -c23, 0;
  return c;
}

Vec6 continuous_dynamics(const VesselParams& params, const VesselState& state, const Vec3& tau,
                         const BiasForce& bias, PlantFidelity fidelity) {
  if (!tau.allFinite() || !state.eta.allFinite() || !state.nu.allFinite()) {
    throw std::invalid_argument("dynamics inputs must be finite");
  }
  Vec3 force = body_bias(bias, state.eta(2)) + tau - params.damping * state.nu;
  if (fidelity == PlantFidelity::WithCoriolis) {
    force -= coriolis_matrix(params, state.nu) * state.nu;
  }
  Eigen::LDLT<Mat3> ldlt(params.mass);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("inertia matrix is singular");
  }
  Vec6 qdot;
  qdot << rotation_matrix(state.eta(2)) * state.nu, ldlt.solve(force);
  return qdot;
}

Vec6 euler_map(const VesselParams& params, const Vec6& q, const Vec3& tau, const BiasForce& bias,
               double dt, PlantFidelity fidelity) {
  return q + dt * continuous_dynamics(params, VesselState::from_stacked(q), tau, bias, fidelity);
}

Mat6 euler_state_jacobian(const VesselParams& params, const Vec6& q, const BiasForce& bias,
                          double dt) {
  const double psi = q(2);
  const Vec3 nu = q.tail<3>();
  const Mat3 m_inv = params.mass.inverse();
  const Mat3 dr = rotation_matrix_derivative(psi);
  Mat6 f = Mat6::Identity();
  f.block<3, 1>(0, 2) += dt * dr * nu;
  f.block<3, 3>(0, 3) = dt * rotation_matrix(psi);
  f.block<3, 1>(3, 2) = dt * m_inv * (dr.transpose() * bias.f);
  f.block<3, 3>(3, 3) = Mat3::Identity() - dt * m_inv * params.damping;
  return f;
}

Eigen::Matrix<double, 6, 3> euler_force_jacobian(const VesselParams& params, double dt) {
  Eigen::Matrix<double, 6, 3> g = Eigen::Matrix<double, 6, 3>::Zero();
  g.bottomRows<3>() = dt * params.mass.inverse();
  return g;
}

VesselState euler_step(const VesselParams& params, const VesselState& state, const Vec3& tau,
                       const BiasForce& bias, PlantFidelity fidelity, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("time step must be positive");
  }
  VesselState next = VesselState::from_stacked(euler_map(params, state.stacked(), tau, bias, dt, fidelity));
  next.eta(2) = wrap_angle(next.eta(2));
  return next;
}

}  // namespace coopdock
