#pragma once

#include <utility>
#include <variant>

#include <Eigen/Dense>

#include "coopdock/vessel_dynamics.hpp"

namespace coopdock {

using Vec4 = Eigen::Vector4d;
using Vec8 = Eigen::Matrix<double, 8, 1>;

// [f_stern_L, f_stern_R, f_bow_L, f_bow_R] in N. Index 2 is the port bow thruster.
struct FixedThrusterCmd {
  Vec4 forces = Vec4::Zero();
};

// forces [f_L, f_R] in N, angles [theta_L, theta_R] in rad. Angles are not
// normalised: theta = 0 pushes along +x of the body frame.
struct AzimuthThrusterCmd {
  Eigen::Vector2d forces = Eigen::Vector2d::Zero();
  Eigen::Vector2d angles = Eigen::Vector2d::Zero();
};

using VesselCommand = std::variant<FixedThrusterCmd, AzimuthThrusterCmd>;

struct JointControl {
  FixedThrusterCmd usv1;
  AzimuthThrusterCmd usv2;

  // [u1; u2] = [4 fixed forces, 2 azimuth forces, 2 azimuth angles].
  Vec8 flatten() const;
  static JointControl from_flat(const Vec8& u);
};

// Constant 3x4 map of the fixed-thruster layout.
Eigen::Matrix<double, 3, 4> fixed_allocation_matrix(const VesselParams& params);

Vec3 allocate_fixed(const FixedThrusterCmd& cmd, const VesselParams& params);
Vec3 allocate_azimuth(const AzimuthThrusterCmd& cmd, const VesselParams& params);

// d tau / d [f_L, f_R, theta_L, theta_R].
Eigen::Matrix<double, 3, 4> azimuth_allocation_jacobian(const AzimuthThrusterCmd& cmd,
                                                        const VesselParams& params);

// Dispatches on the command kind.
Vec3 allocate(const VesselCommand& cmd, const VesselParams& params);

std::pair<Vec3, Vec3> joint_allocate(const JointControl& u, const VesselParams& p1,
                                     const VesselParams& p2);

}  // namespace coopdock
