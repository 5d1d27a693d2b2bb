#pragma once

#include <numbers>

#include <Eigen/Dense>

#include "coopdock/thruster_allocation.hpp"
#include "coopdock/vessel_dynamics.hpp"

namespace coopdock {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

enum class MeasurementKind { PoseOnly, Full };

struct Measurement {
  Eigen::VectorXd value;  // [x, y, psi] or [x, y, psi, u, v, omega]
  MeasurementKind kind = MeasurementKind::Full;
};

// Sensor standard deviations and per-step process noise of the augmented model.
struct ObserverConfig {
  double sigma_position = 0.02;         // m
  double sigma_heading = 0.5 * std::numbers::pi / 180.0;    // rad
  double sigma_velocity = 0.01;         // m/s
  double sigma_yaw_rate = 0.1 * std::numbers::pi / 180.0;   // rad/s
  double process_pose = 1e-6;
  double process_velocity = 1e-4;
  double process_bias = 1.0;
  double initial_bias_variance = 1e4;   // N^2, (N*m)^2 for yaw

  Mat9 process_covariance() const;
  Mat6 measurement_covariance() const;
};

// Augmented EKF state x_hat = [eta; nu; b] with b in the inertial frame.
struct ObserverState {
  Vec9 x_hat = Vec9::Zero();
  Mat9 P = Mat9::Identity();
  Mat9 Q_proc = Mat9::Zero();
  Mat6 R_meas = Mat6::Identity();
  Eigen::VectorXd last_innovation;  // empty until the first update
};

// Observer seeded with a state guess, zero bias prior.
ObserverState make_observer(const VesselState& initial, const ObserverConfig& config);

// Augmented forward-Euler transition with a constant bias, heading left unwrapped.
Vec9 augmented_transition(const VesselParams& params, const Vec9& x, const Vec3& tau, double dt);
Mat9 augmented_jacobian(const VesselParams& params, const Vec9& x, double dt);

ObserverState ekf_predict(const ObserverState& obs, const Vec3& tau, const VesselParams& params,
                          double dt);
ObserverState ekf_predict(const ObserverState& obs, const VesselCommand& cmd,
                          const VesselParams& params, double dt);

ObserverState ekf_update(const ObserverState& obs, const Measurement& meas);

BiasForce bias_estimate(const ObserverState& obs);
VesselState state_estimate(const ObserverState& obs);

}  // namespace coopdock
