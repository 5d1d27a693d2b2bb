#include "coopdock/disturbance_observer.hpp"

#include <stdexcept>

namespace coopdock {

Mat9 ObserverConfig::process_covariance() const {
  Vec9 d;
  d << Vec3::Constant(process_pose), Vec3::Constant(process_velocity), Vec3::Constant(process_bias);
  return d.asDiagonal();
}

Mat6 ObserverConfig::measurement_covariance() const {
  Vec6 s;
  s << sigma_position, sigma_position, sigma_heading, sigma_velocity, sigma_velocity, sigma_yaw_rate;
  return s.cwiseProduct(s).asDiagonal();
}

ObserverState make_observer(const VesselState& initial, const ObserverConfig& config) {
  ObserverState obs;
  obs.x_hat << initial.eta, initial.nu, Vec3::Zero();
  obs.Q_proc = config.process_covariance();
  obs.R_meas = config.measurement_covariance();
  obs.P.setZero();
  obs.P.topLeftCorner<6, 6>() = obs.R_meas;
  obs.P.bottomRightCorner<3, 3>() = Mat3::Identity() * config.initial_bias_variance;
  return obs;
}

Vec9 augmented_transition(const VesselParams& params, const Vec9& x, const Vec3& tau, double dt) {
  const BiasForce bias{x.tail<3>()};
  Vec9 next;
  next << euler_map(params, x.head<6>(), tau, bias, dt), x.tail<3>();
  return next;
}

Mat9 augmented_jacobian(const VesselParams& params, const Vec9& x, double dt) {
  Mat9 f = Mat9::Identity();
  f.topLeftCorner<6, 6>() = euler_state_jacobian(params, x.head<6>(), BiasForce{x.tail<3>()}, dt);
  // The bias enters like a body force rotated by R(psi)^T.
  f.block<6, 3>(0, 6) =
      euler_force_jacobian(params, dt) * rotation_matrix(x(2)).transpose();
  return f;
}

ObserverState ekf_predict(const ObserverState& obs, const Vec3& tau, const VesselParams& params,
                          double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("observer time step must be positive");
  }
  const Mat9 f = augmented_jacobian(params, obs.x_hat, dt);
  ObserverState next = obs;
  next.x_hat = augmented_transition(params, obs.x_hat, tau, dt);
  next.x_hat(2) = wrap_angle(next.x_hat(2));
  next.P = f * obs.P * f.transpose() + obs.Q_proc;
  next.P = 0.5 * (next.P + next.P.transpose()).eval();
  if (!next.P.allFinite()) {
    throw std::runtime_error("observer covariance diverged during prediction");
  }
  return next;
}

ObserverState ekf_predict(const ObserverState& obs, const VesselCommand& cmd,
                          const VesselParams& params, double dt) {
  return ekf_predict(obs, allocate(cmd, params), params, dt);
}

ObserverState ekf_update(const ObserverState& obs, const Measurement& meas) {
  const int m = meas.kind == MeasurementKind::Full ? 6 : 3;
  if (meas.value.size() != m) {
    throw std::invalid_argument("measurement dimension does not match its kind");
  }
  if (!meas.value.allFinite()) {
    throw std::invalid_argument("measurement must be finite");
  }
  // The measurement selects the first m components of the augmented state.
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, 9);
  h.leftCols(m).setIdentity();
  const Eigen::MatrixXd r = obs.R_meas.topLeftCorner(m, m);

  Eigen::VectorXd innovation = meas.value - obs.x_hat.head(m);
  innovation(2) = wrap_angle(innovation(2));

  const Eigen::MatrixXd s = h * obs.P * h.transpose() + r;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("innovation covariance is singular");
  }
  const Eigen::MatrixXd gain = llt.solve(h * obs.P).transpose();

  ObserverState next = obs;
  next.x_hat = obs.x_hat + gain * innovation;
  next.x_hat(2) = wrap_angle(next.x_hat(2));
  // Joseph form keeps P positive semidefinite under round-off.
  const Mat9 i_kh = Mat9::Identity() - gain * h;
  next.P = i_kh * obs.P * i_kh.transpose() + gain * r * gain.transpose();
  next.P = 0.5 * (next.P + next.P.transpose()).eval();
  next.last_innovation = innovation;
  return next;
}

BiasForce bias_estimate(const ObserverState& obs) { return BiasForce{obs.x_hat.tail<3>()}; }

VesselState state_estimate(const ObserverState& obs) {
  return VesselState{obs.x_hat.head<3>(), obs.x_hat.segment<3>(3)};
}

}  // namespace coopdock
