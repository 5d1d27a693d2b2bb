#include "coopdock/nmpc_problem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace coopdock {

JointState join_states(const VesselState& usv1, const VesselState& usv2) {
  JointState q;
  q << usv1.eta, usv1.nu, usv2.eta, usv2.nu;
  return q;
}

VesselState usv1_state(const JointState& q) { return VesselState{q.segment<3>(0), q.segment<3>(3)}; }

VesselState usv2_state(const JointState& q) { return VesselState{q.segment<3>(6), q.segment<3>(9)}; }

Eigen::Matrix<double, 6, 1> ReferencePose::flat() const {
  Eigen::Matrix<double, 6, 1> r;
  r << usv1, usv2;
  return r;
}

ReferencePose ReferencePose::from_flat(const Eigen::Matrix<double, 6, 1>& r) {
  return ReferencePose{r.head<3>(), r.tail<3>()};
}

ReferenceCheck validate_reference(const ReferencePose& ref, double d_min, double heading_tolerance) {
  ReferenceCheck check;
  if (!ref.usv1.allFinite() || !ref.usv2.allFinite()) {
    check.valid = check.distance_ok = check.heading_ok = false;
    check.message = "reference pose must be finite";
    return check;
  }
  check.distance = (ref.usv1.head<2>() - ref.usv2.head<2>()).norm();
  check.heading_offset = wrap_angle(ref.usv1(2) - ref.usv2(2) - std::numbers::pi);
  const double heading_error = std::abs(check.heading_offset);
  check.distance_ok = check.distance >= d_min - 1e-12;
  check.heading_ok = heading_error <= heading_tolerance;
  check.valid = check.distance_ok && check.heading_ok;

  std::ostringstream msg;
  if (!check.distance_ok) {
    msg << "reference distance " << check.distance << " m is below d_min = " << d_min
        << " m (targets must satisfy ||p_ref1 - p_ref2|| >= d_min)";
  }
  if (!check.heading_ok) {
    if (!check.distance_ok) {
      msg << "; ";
    }
    msg << "reference headings are not stern to stern (psi_ref1 - psi_ref2 - pi = "
        << check.heading_offset << " rad, expected 0)";
  }
  check.message = msg.str();
  return check;
}

void MpcConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("mpc config: " + what); };
  if (horizon <= 1) fail("horizon N must be greater than 1");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (!(q1_weights.minCoeff() > 0.0) || !(q2_weights.minCoeff() > 0.0)) {
    fail("tracking weights must be positive");
  }
  if (!(control_weights.minCoeff() > 0.0)) fail("control weights must be positive");
  if (!((f_max - f_min).minCoeff() > 0.0)) fail("f_min must be below f_max");
  if (!(df_min.maxCoeff() <= 0.0) || !(df_max.minCoeff() >= 0.0) ||
      !((df_max - df_min).minCoeff() > 0.0)) {
    fail("rate bounds must bracket zero");
  }
  if (!(d_min > 0.0)) fail("d_min must be positive");
  if (!(v_max_1 > 0.0) || !(v_max_2 > 0.0)) fail("speed bounds must be positive");
  if (!(slack_weight > 0.0)) fail("slack weight must be positive");
  if (!(slack_l1_weight >= 0.0)) fail("linear slack weight must be non-negative");
  if (max_iterations < 1) fail("iteration cap must be at least 1");
  if (!(tolerance > 0.0)) fail("tolerance must be positive");
  if (time_budget_s < 0.0) fail("time budget must be non-negative");
}

MpcConfig MpcConfig::case_study(const VesselParams& p1, const VesselParams& p2) {
  MpcConfig c;
  c.horizon = 50;
  c.dt = 0.5;
  c.q1_weights = Vec3::Constant(1e3);
  c.q2_weights = Vec3::Constant(1e3);
  c.control_weights << 1e-2, 1e-2, 1e-3, 1e-3, 1e-2, 1e-2, 1e-4, 1e-4;
  c.f_max << 1000, 1000, 170, 170, 100, 100, 6.28, 6.28;
  c.f_min << -800, -80, -170, -170, -100, -100, -6.28, -6.28;
  c.df_max << 500, 500, 85, 85, 50, 50, 0.5, 0.5;
  c.df_min << -400, -400, -85, -85, -50, -50, -0.5, -0.5;
  c.d_min = 0.5 * (p1.length + p2.length);
  c.v_max_1 = p1.max_speed;
  c.v_max_2 = p2.max_speed;
  return c;
}

double tracking_cost(const JointState& q, const ReferencePose& ref, const Vec3& q1_weights,
                     const Vec3& q2_weights) {
  Vec3 xi1 = q.segment<3>(0) - ref.usv1;
  Vec3 xi2 = q.segment<3>(6) - ref.usv2;
  xi1(2) = wrap_angle(xi1(2));
  xi2(2) = wrap_angle(xi2(2));
  return xi1.dot(q1_weights.cwiseProduct(xi1)) + xi2.dot(q2_weights.cwiseProduct(xi2));
}

double control_cost(const Vec8& u, const Vec8& weights) { return u.dot(weights.cwiseProduct(u)); }

JointState joint_step(const VesselParams& p1, const VesselParams& p2, const JointState& q,
                      const Vec8& u, const BiasPair& bias, double dt) {
  const JointControl cmd = JointControl::from_flat(u);
  JointState next;
  next << euler_map(p1, q.head<6>(), allocate_fixed(cmd.usv1, p1), bias.usv1, dt),
      euler_map(p2, q.tail<6>(), allocate_azimuth(cmd.usv2, p2), bias.usv2, dt);
  return next;
}

NmpcProblem::NmpcProblem(MpcConfig config, VesselParams usv1, VesselParams usv2, JointState q_k,
                         Vec8 u_prev, BiasPair bias, ReferencePose reference)
    : config_(std::move(config)),
      usv1_(std::move(usv1)),
      usv2_(std::move(usv2)),
      q_k_(q_k),
      u_prev_(u_prev),
      bias_(bias),
      reference_(reference) {
  config_.validate();
  usv1_.validate();
  usv2_.validate();
  if (!q_k_.allFinite() || !u_prev_.allFinite() || !bias_.usv1.f.allFinite() ||
      !bias_.usv2.f.allFinite()) {
    throw std::invalid_argument("controller inputs must be finite");
  }
  const ReferenceCheck check = validate_reference(reference_, config_.d_min, 1e-9);
  if (!check.valid) {
    throw std::invalid_argument("invalid docking reference: " + check.message);
  }
  const double slack = 1e-9;
  if ((u_prev_ - config_.f_max).maxCoeff() > slack || (config_.f_min - u_prev_).maxCoeff() > slack) {
    throw std::invalid_argument("previous input lies outside [F_min, F_max]");
  }
  unwrapped_ref_ = reference_;
  unwrapped_ref_.usv1(2) = q_k_(2) + wrap_angle(reference_.usv1(2) - q_k_(2));
  unwrapped_ref_.usv2(2) = q_k_(8) + wrap_angle(reference_.usv2(2) - q_k_(8));
  fixed_map_ = fixed_allocation_matrix(usv1_);
}

NmpcProblem build_problem(const MpcConfig& config, const VesselParams& usv1,
                          const VesselParams& usv2, const JointState& q_k, const Vec8& u_prev,
                          const BiasPair& bias, const ReferencePose& reference) {
  return NmpcProblem(config, usv1, usv2, q_k, u_prev, bias, reference);
}

int NmpcProblem::num_primal_variables() const {
  const int n = horizon();
  return kJointStateDim * (n + 1) + kControlDim * n;
}

int NmpcProblem::num_slack_variables() const { return horizon() + 1; }

int NmpcProblem::num_variables() const { return num_primal_variables() + num_slack_variables(); }

int NmpcProblem::num_equality_constraints() const { return kJointStateDim * (horizon() + 1); }

int NmpcProblem::num_collision_constraints() const { return horizon() + 1; }

int NmpcProblem::num_inequality_constraints() const {
  const int n = horizon();
  return (n + 1) + 2 * (n + 1) + 16 * n + 16 * n + (n + 1);
}

int NmpcProblem::state_offset(int h) const { return kJointStateDim * h; }

int NmpcProblem::input_offset(int h) const {
  return kJointStateDim * (horizon() + 1) + kControlDim * h;
}

int NmpcProblem::slack_offset(int h) const { return num_primal_variables() + h; }

JointState NmpcProblem::step(const JointState& q, const Vec8& u) const {
  return joint_step(usv1_, usv2_, q, u, bias_, config_.dt);
}

Mat12 NmpcProblem::step_state_jacobian(const JointState& q, const Vec8&) const {
  Mat12 a = Mat12::Zero();
  a.topLeftCorner<6, 6>() = euler_state_jacobian(usv1_, q.head<6>(), bias_.usv1, config_.dt);
  a.bottomRightCorner<6, 6>() = euler_state_jacobian(usv2_, q.tail<6>(), bias_.usv2, config_.dt);
  return a;
}

Eigen::Matrix<double, 12, 8> NmpcProblem::step_input_jacobian(const JointState&,
                                                              const Vec8& u) const {
  const JointControl cmd = JointControl::from_flat(u);
  Eigen::Matrix<double, 12, 8> b = Eigen::Matrix<double, 12, 8>::Zero();
  b.topLeftCorner<6, 4>() = euler_force_jacobian(usv1_, config_.dt) * fixed_map_;
  b.bottomRightCorner<6, 4>() =
      euler_force_jacobian(usv2_, config_.dt) * azimuth_allocation_jacobian(cmd.usv2, usv2_);
  return b;
}

Eigen::Matrix<double, 20, 20> NmpcProblem::step_weighted_hessian(const JointState& q,
                                                                 const Vec8& u,
                                                                 const JointState& weights) const {
  const double dt = config_.dt;
  Eigen::Matrix<double, 20, 20> h = Eigen::Matrix<double, 20, 20>::Zero();
  const VesselParams* params[2] = {&usv1_, &usv2_};
  const BiasForce* bias[2] = {&bias_.usv1, &bias_.usv2};
  for (int v = 0; v < 2; ++v) {
    const int o = 6 * v;
    const double psi = q(o + 2);
    const Vec3 nu = q.segment<3>(o + 3);
    const Vec3 w_eta = weights.segment<3>(o);
    // Force weights pulled back through dt * M^-1.
    const Vec3 g = dt * params[v]->mass.transpose().lu().solve(weights.segment<3>(o + 3));
    const Mat3 dr = rotation_matrix_derivative(psi);
    Mat3 ddr = -rotation_matrix(psi);
    ddr(2, 2) = 0.0;
    h(o + 2, o + 2) = dt * w_eta.dot(ddr * nu) + g.dot(ddr.transpose() * bias[v]->f);
    const Vec3 cross = dt * dr.transpose() * w_eta;
    h.block<1, 3>(o + 2, o + 3) = cross.transpose();
    h.block<3, 1>(o + 3, o + 2) = cross;
    if (v == 1) {
      // Azimuth map: tau is bilinear in the forces and trigonometric in the angles.
      const double wd = usv2_.width;
      const double ld = usv2_.length;
      const double fl = u(4);
      const double fr = u(5);
      const double cl = std::cos(u(6));
      const double sl = std::sin(u(6));
      const double cr = std::cos(u(7));
      const double sr = std::sin(u(7));
      const double a_l = g(0) * cl - g(1) * sl + g(2) * (wd * cl + ld * sl);
      const double a_r = g(0) * cr - g(1) * sr - g(2) * (wd * cr + ld * sr);
      const double da_l = -g(0) * sl - g(1) * cl + g(2) * (-wd * sl + ld * cl);
      const double da_r = -g(0) * sr - g(1) * cr - g(2) * (-wd * sr + ld * cr);
      h(12 + 4, 12 + 6) = h(12 + 6, 12 + 4) = da_l;
      h(12 + 5, 12 + 7) = h(12 + 7, 12 + 5) = da_r;
      h(12 + 6, 12 + 6) = -fl * a_l;
      h(12 + 7, 12 + 7) = -fr * a_r;
    }
  }
  return h;
}

double NmpcProblem::stage_tracking_cost(const JointState& q) const {
  const Vec3 xi1 = q.segment<3>(0) - unwrapped_ref_.usv1;
  const Vec3 xi2 = q.segment<3>(6) - unwrapped_ref_.usv2;
  return xi1.dot(config_.q1_weights.cwiseProduct(xi1)) +
         xi2.dot(config_.q2_weights.cwiseProduct(xi2));
}

double NmpcProblem::objective(const Eigen::VectorXd& z) const {
  const int n = horizon();
  double f = 0.0;
  for (int h = 1; h <= n; ++h) {
    f += stage_tracking_cost(z.segment<12>(state_offset(h)));
  }
  for (int h = 1; h < n; ++h) {
    f += control_cost(z.segment<8>(input_offset(h)), config_.control_weights);
  }
  for (int h = 0; h <= n; ++h) {
    const double s = z(slack_offset(h));
    f += config_.slack_l1_weight * s + config_.slack_weight * s * s;
  }
  return f;
}

Eigen::VectorXd NmpcProblem::objective_gradient(const Eigen::VectorXd& z) const {
  const int n = horizon();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(num_variables());
  for (int h = 1; h <= n; ++h) {
    const int o = state_offset(h);
    g.segment<3>(o) = 2.0 * config_.q1_weights.cwiseProduct(z.segment<3>(o) - unwrapped_ref_.usv1);
    g.segment<3>(o + 6) =
        2.0 * config_.q2_weights.cwiseProduct(z.segment<3>(o + 6) - unwrapped_ref_.usv2);
  }
  for (int h = 1; h < n; ++h) {
    const int o = input_offset(h);
    g.segment<8>(o) = 2.0 * config_.control_weights.cwiseProduct(z.segment<8>(o));
  }
  for (int h = 0; h <= n; ++h) {
    g(slack_offset(h)) = config_.slack_l1_weight + 2.0 * config_.slack_weight * z(slack_offset(h));
  }
  return g;
}

Eigen::VectorXd NmpcProblem::equality_constraints(const Eigen::VectorXd& z) const {
  const int n = horizon();
  Eigen::VectorXd c(num_equality_constraints());
  c.head<12>() = z.segment<12>(state_offset(0)) - q_k_;
  for (int h = 0; h < n; ++h) {
    c.segment<12>(12 * (h + 1)) =
        z.segment<12>(state_offset(h + 1)) -
        step(z.segment<12>(state_offset(h)), z.segment<8>(input_offset(h)));
  }
  return c;
}

Eigen::MatrixXd NmpcProblem::equality_jacobian(const Eigen::VectorXd& z) const {
  const int n = horizon();
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(num_equality_constraints(), num_variables());
  j.block<12, 12>(0, state_offset(0)).setIdentity();
  for (int h = 0; h < n; ++h) {
    const JointState q = z.segment<12>(state_offset(h));
    const Vec8 u = z.segment<8>(input_offset(h));
    const int row = 12 * (h + 1);
    j.block<12, 12>(row, state_offset(h + 1)).setIdentity();
    j.block<12, 12>(row, state_offset(h)) = -step_state_jacobian(q, u);
    j.block<12, 8>(row, input_offset(h)) = -step_input_jacobian(q, u);
  }
  return j;
}

Eigen::VectorXd NmpcProblem::inequality_constraints(const Eigen::VectorXd& z) const {
  const int n = horizon();
  const double dt = config_.dt;
  Eigen::VectorXd c(num_inequality_constraints());
  int row = 0;
  for (int h = 0; h <= n; ++h) {
    const JointState q = z.segment<12>(state_offset(h));
    c(row++) = (q.segment<2>(0) - q.segment<2>(6)).norm() + z(slack_offset(h)) - config_.d_min;
  }
  for (int h = 0; h <= n; ++h) {
    const JointState q = z.segment<12>(state_offset(h));
    c(row++) = config_.v_max_1 * config_.v_max_1 - q.segment<2>(3).squaredNorm();
    c(row++) = config_.v_max_2 * config_.v_max_2 - q.segment<2>(9).squaredNorm();
  }
  for (int h = 0; h < n; ++h) {
    const Vec8 u = z.segment<8>(input_offset(h));
    c.segment<8>(row) = u - config_.f_min;
    c.segment<8>(row + 8) = config_.f_max - u;
    row += 16;
  }
  for (int h = 0; h < n; ++h) {
    const Vec8 u = z.segment<8>(input_offset(h));
    const Vec8 u_before = h == 0 ? u_prev_ : Vec8(z.segment<8>(input_offset(h - 1)));
    const Vec8 du = u - u_before;
    c.segment<8>(row) = du - dt * config_.df_min;
    c.segment<8>(row + 8) = dt * config_.df_max - du;
    row += 16;
  }
  for (int h = 0; h <= n; ++h) {
    c(row++) = z(slack_offset(h));
  }
  return c;
}

Eigen::MatrixXd NmpcProblem::inequality_jacobian(const Eigen::VectorXd& z) const {
  const int n = horizon();
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(num_inequality_constraints(), num_variables());
  int row = 0;
  for (int h = 0; h <= n; ++h) {
    const int o = state_offset(h);
    const Eigen::Vector2d d = z.segment<2>(o) - z.segment<2>(o + 6);
    const double dist = d.norm();
    const Eigen::Vector2d unit = dist > 0.0 ? Eigen::Vector2d(d / dist) : Eigen::Vector2d::Zero();
    j.block<1, 2>(row, o) = unit.transpose();
    j.block<1, 2>(row, o + 6) = -unit.transpose();
    j(row, slack_offset(h)) = 1.0;
    ++row;
  }
  for (int h = 0; h <= n; ++h) {
    const int o = state_offset(h);
    j.block<1, 2>(row++, o + 3) = -2.0 * z.segment<2>(o + 3).transpose();
    j.block<1, 2>(row++, o + 9) = -2.0 * z.segment<2>(o + 9).transpose();
  }
  for (int h = 0; h < n; ++h) {
    const int o = input_offset(h);
    j.block<8, 8>(row, o).setIdentity();
    j.block<8, 8>(row + 8, o) = -Eigen::Matrix<double, 8, 8>::Identity();
    row += 16;
  }
  for (int h = 0; h < n; ++h) {
    const int o = input_offset(h);
    j.block<8, 8>(row, o).setIdentity();
    j.block<8, 8>(row + 8, o) = -Eigen::Matrix<double, 8, 8>::Identity();
    if (h > 0) {
      j.block<8, 8>(row, input_offset(h - 1)) = -Eigen::Matrix<double, 8, 8>::Identity();
      j.block<8, 8>(row + 8, input_offset(h - 1)).setIdentity();
    }
    row += 16;
  }
  for (int h = 0; h <= n; ++h) {
    j(row++, slack_offset(h)) = 1.0;
  }
  return j;
}

Eigen::VectorXd NmpcProblem::cold_start() const {
  const int n = horizon();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(num_variables());
  for (int h = 0; h <= n; ++h) {
    z.segment<12>(state_offset(h)) = q_k_;
  }
  for (int h = 0; h < n; ++h) {
    z.segment<8>(input_offset(h)) = u_prev_;
  }
  const double gap = config_.d_min - (q_k_.segment<2>(0) - q_k_.segment<2>(6)).norm();
  for (int h = 0; h <= n; ++h) {
    z(slack_offset(h)) = std::max(0.0, gap);
  }
  return z;
}

}  // namespace coopdock
