#include "coopdock/thruster_allocation.hpp"

#include <cmath>
#include <stdexcept>

namespace coopdock {

Vec8 JointControl::flatten() const {
  Vec8 u;
  u << usv1.forces, usv2.forces, usv2.angles;
  return u;
}

JointControl JointControl::from_flat(const Vec8& u) {
  JointControl j;
  j.usv1.forces = u.head<4>();
  j.usv2.forces = u.segment<2>(4);
  j.usv2.angles = u.segment<2>(6);
  return j;
}

Eigen::Matrix<double, 3, 4> fixed_allocation_matrix(const VesselParams& params) {
  const double s = std::sin(params.bow_tilt);
  const double c = std::cos(params.bow_tilt);
  const double w = params.width;
  const double d = params.length;
  Eigen::Matrix<double, 3, 4> b;
  b << 1, 1, s, s,
       0, 0, c, -c,
       w, -w, d * c + w * s, -d * c - w * s;
  return b;
}

Vec3 allocate_fixed(const FixedThrusterCmd& cmd, const VesselParams& params) {
  if (!cmd.forces.allFinite()) {
    throw std::invalid_argument("thruster forces must be finite");
  }
  return fixed_allocation_matrix(params) * cmd.forces;
}

Vec3 allocate_azimuth(const AzimuthThrusterCmd& cmd, const VesselParams& params) {
  if (!cmd.forces.allFinite() || !cmd.angles.allFinite()) {
    throw std::invalid_argument("azimuth commands must be finite");
  }
  const double fl = cmd.forces(0);
  const double fr = cmd.forces(1);
  const double cl = std::cos(cmd.angles(0));
  const double cr = std::cos(cmd.angles(1));
  const double sl = std::sin(cmd.angles(0));
  const double sr = std::sin(cmd.angles(1));
  return Vec3(fl * cl + fr * cr,
              -fl * sl - fr * sr,
              params.width * (fl * cl - fr * cr) + params.length * (fl * sl - fr * sr));
}

Eigen::Matrix<double, 3, 4> azimuth_allocation_jacobian(const AzimuthThrusterCmd& cmd,
                                                        const VesselParams& params) {
  const double fl = cmd.forces(0);
  const double fr = cmd.forces(1);
  const double cl = std::cos(cmd.angles(0));
  const double cr = std::cos(cmd.angles(1));
  const double sl = std::sin(cmd.angles(0));
  const double sr = std::sin(cmd.angles(1));
  const double w = params.width;
  const double d = params.length;
  Eigen::Matrix<double, 3, 4> j;
  j << cl, cr, -fl * sl, -fr * sr,
       -sl, -sr, -fl * cl, -fr * cr,
       w * cl + d * sl, -w * cr - d * sr, fl * (-w * sl + d * cl), fr * (w * sr - d * cr);
  return j;
}

Vec3 allocate(const VesselCommand& cmd, const VesselParams& params) {
  return std::visit(
      [&](const auto& c) -> Vec3 {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, FixedThrusterCmd>) {
          return allocate_fixed(c, params);
        } else {
          return allocate_azimuth(c, params);
        }
      },
      cmd);
}

std::pair<Vec3, Vec3> joint_allocate(const JointControl& u, const VesselParams& p1,
                                     const VesselParams& p2) {
  return {allocate_fixed(u.usv1, p1), allocate_azimuth(u.usv2, p2)};
}

}  // namespace coopdock
