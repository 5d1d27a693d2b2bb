#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "coopdock/nmpc_controller.hpp"

using namespace coopdock;

namespace {

constexpr double kPi = std::numbers::pi;

MpcConfig config_with_horizon(int n) {
  MpcConfig c = MpcConfig::case_study(usv1_params(), usv2_params());
  c.horizon = n;
  return c;
}

// Stern-to-stern target around `centre` with USV1 facing `heading`.
ReferencePose docking_reference(const Eigen::Vector2d& centre, double heading, double d_min = 1.8) {
  const Eigen::Vector2d dir(std::cos(heading), std::sin(heading));
  ReferencePose r;
  r.usv1 << centre + 0.5 * d_min * dir, heading;
  r.usv2 << centre - 0.5 * d_min * dir, wrap_angle(heading - kPi);
  return r;
}

JointState at_reference(const ReferencePose& r) {
  JointState q = JointState::Zero();
  q.segment<3>(0) = r.usv1;
  q.segment<3>(6) = r.usv2;
  return q;
}

NmpcProblem approach_problem(int n, const Eigen::Vector2d& shift = Eigen::Vector2d::Zero(),
                             double phi = 0.0) {
  const Mat3 rot = rotation_matrix(phi);
  ReferencePose ref = docking_reference(Eigen::Vector2d::Zero(), 0.3);
  JointState q = JointState::Zero();
  q.segment<3>(0) << 3.0, 1.0, 0.2;
  q.segment<3>(3) << 0.1, 0.0, 0.0;
  q.segment<3>(6) << -3.0, -0.5, 2.0;
  BiasPair b{BiasForce{Vec3(-30, 10, 0)}, BiasForce{Vec3(20, 40, 0)}};
  auto move_pose = [&](Vec3 pose) {
    pose = rot * pose;
    pose(2) = wrap_angle(pose(2) + phi);
    pose.head<2>() += shift;
    return pose;
  };
  ref.usv1 = move_pose(ref.usv1);
  ref.usv2 = move_pose(ref.usv2);
  q.segment<3>(0) = move_pose(q.segment<3>(0));
  q.segment<3>(6) = move_pose(q.segment<3>(6));
  b.usv1.f = rot * b.usv1.f;
  b.usv2.f = rot * b.usv2.f;
  return NmpcProblem(config_with_horizon(n), usv1_params(), usv2_params(), q, Vec8::Zero(), b, ref);
}

double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("tracking cost") {
  const ReferencePose ref = docking_reference(Eigen::Vector2d(1, 2), 0.5);
  const Vec3 w = Vec3::Constant(1e3);
  CHECK(tracking_cost(at_reference(ref), ref, w, w) == 0.0);
  JointState q = at_reference(ref);
  q(0) += 1.0;
  CHECK(tracking_cost(q, ref, w, w) == doctest::Approx(1000.0));

  ReferencePose r2;
  r2.usv1 = Vec3(0, 0, -kPi + 0.1);
  r2.usv2 = Vec3(-1.8, 0, 0.1);
  JointState q2 = at_reference(r2);
  q2(2) = kPi - 0.1;
  CHECK(tracking_cost(q2, r2, w, w) == doctest::Approx(40.0).epsilon(1e-9));
}

TEST_CASE("control cost") {
  const MpcConfig c = config_with_horizon(50);
  CHECK(control_cost(Vec8::Zero(), c.control_weights) == 0.0);
  Vec8 u = Vec8::Zero();
  u(0) = 10.0;
  CHECK(control_cost(u, c.control_weights) == doctest::Approx(1.0));
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 100.0);
  for (int i = 0; i < 20; ++i) {
    const Vec8 v = Vec8::NullaryExpr([&] { return n(rng); });
    CHECK(control_cost(-v, c.control_weights) == control_cost(v, c.control_weights));
  }
}

TEST_CASE("reference validation") {
  const ReferenceCheck ok = validate_reference(docking_reference(Eigen::Vector2d::Zero(), 0.0), 1.8);
  CHECK(ok.valid);
  ReferencePose exact;
  exact.usv1 = Vec3(0, 0, 0);
  exact.usv2 = Vec3(1.8, 0, -kPi);
  CHECK(validate_reference(exact, 0.5 * (2.1 + 1.5)).valid);

  ReferencePose close = exact;
  close.usv2(0) = 1.0;
  const ReferenceCheck c = validate_reference(close, 1.8);
  CHECK_FALSE(c.valid);
  CHECK_FALSE(c.distance_ok);
  CHECK(c.heading_ok);

  ReferencePose same_heading = exact;
  same_heading.usv2(2) = 0.0;
  const ReferenceCheck h = validate_reference(same_heading, 1.8);
  CHECK_FALSE(h.valid);
  CHECK_FALSE(h.heading_ok);
  CHECK(h.distance_ok);
}

TEST_CASE("problem dimensions") {
  const NmpcProblem p = approach_problem(50);
  CHECK(p.num_primal_variables() == 1012);
  CHECK(p.num_collision_constraints() == 51);
  CHECK(p.config().df_max(0) * p.config().dt == 250.0);
  CHECK(p.num_equality_constraints() == 12 * 51);
  CHECK(p.num_inequality_constraints() == 51 + 2 * 51 + 16 * 50 + 16 * 50 + 51);
}

TEST_CASE("problem construction rejects bad inputs") {
  const MpcConfig c = config_with_horizon(10);
  ReferencePose bad = docking_reference(Eigen::Vector2d::Zero(), 0.0, 1.0);
  CHECK_THROWS_AS(NmpcProblem(c, usv1_params(), usv2_params(), JointState::Zero(), Vec8::Zero(), BiasPair{}, bad),
                  std::invalid_argument);
  const ReferencePose good = docking_reference(Eigen::Vector2d::Zero(), 0.0);
  Vec8 u_prev = Vec8::Zero();
  u_prev(0) = 2000.0;
  CHECK_THROWS_AS(NmpcProblem(c, usv1_params(), usv2_params(), at_reference(good), u_prev, BiasPair{}, good),
                  std::invalid_argument);
  MpcConfig short_horizon = c;
  short_horizon.horizon = 1;
  CHECK_THROWS_AS(short_horizon.validate(), std::invalid_argument);
}

TEST_CASE("analytic derivatives match central differences") {
  const NmpcProblem p = approach_problem(10);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 1.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd z = p.cold_start();
    for (int i = 0; i < z.size(); ++i) {
      z(i) += 0.5 * n(rng);
    }
    for (int k = 0; k < p.horizon(); ++k) {
      z.segment<8>(p.input_offset(k)) += Vec8::NullaryExpr([&] { return 30.0 * n(rng); });
    }
    const Eigen::VectorXd grad = p.objective_gradient(z);
    const Eigen::MatrixXd jeq = p.equality_jacobian(z);
    const Eigen::MatrixXd jin = p.inequality_jacobian(z);
    Eigen::VectorXd fd_grad(z.size());
    Eigen::MatrixXd fd_eq(jeq.rows(), jeq.cols());
    Eigen::MatrixXd fd_in(jin.rows(), jin.cols());
    for (int j = 0; j < z.size(); ++j) {
      Eigen::VectorXd zp = z;
      Eigen::VectorXd zm = z;
      zp(j) += h;
      zm(j) -= h;
      fd_grad(j) = (p.objective(zp) - p.objective(zm)) / (2 * h);
      fd_eq.col(j) = (p.equality_constraints(zp) - p.equality_constraints(zm)) / (2 * h);
      fd_in.col(j) = (p.inequality_constraints(zp) - p.inequality_constraints(zm)) / (2 * h);
    }
    CHECK(relative_error(grad, fd_grad) < 1e-5);
    CHECK(relative_error(jeq, fd_eq) < 1e-5);
    CHECK(relative_error(jin, fd_in) < 1e-5);
  }
}

TEST_CASE("equilibrium problem has a zero solution") {
  const ReferencePose ref = docking_reference(Eigen::Vector2d(2, -1), 0.8);
  const NmpcProblem p(config_with_horizon(50), usv1_params(), usv2_params(), at_reference(ref), Vec8::Zero(),
                      BiasPair{}, ref);
  const MpcSolution sol = NmpcSolver{}.solve(p);
  CHECK(sol.status == SolveStatus::Optimal);
  CHECK(sol.cost <= 1e-6);
  double umax = 0.0;
  for (const Vec8& u : sol.u_seq) {
    umax = std::max(umax, u.cwiseAbs().maxCoeff());
  }
  // The reference sits exactly on the collision boundary, so the interior-point
  // subproblem leaves a sub-millinewton push away from it.
  CHECK(umax < 1e-3);
  CHECK(constraint_residuals(sol, p).max() <= 1e-8);
  CHECK(sol.q_pred.front() == p.initial_state());

  const WarmStart ws = shift_warm_start(sol, p);
  const MpcSolution again = NmpcSolver{}.solve(p, ws);
  CHECK(again.status == SolveStatus::Optimal);
  CHECK(again.iterations <= 3);
}

TEST_CASE("optimal solutions satisfy every constraint family") {
  const NmpcProblem p = approach_problem(20);
  const MpcSolution sol = NmpcSolver{}.solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const ResidualReport r = constraint_residuals(sol, p);
  CHECK(r.max() <= 1e-6);
  CHECK(sol.max_constraint_violation <= 1e-6);
  CHECK(sol.kkt_residual <= 1e-6);
  CHECK(sol.q_pred.front() == p.initial_state());
  CHECK(r.dynamics <= 1e-8);
  CHECK(static_cast<int>(sol.u_seq.size()) == 20);
  CHECK(static_cast<int>(sol.q_pred.size()) == 21);
}

TEST_CASE("constructed residual violations") {
  const ReferencePose ref = docking_reference(Eigen::Vector2d::Zero(), 0.0);
  const NmpcProblem p(config_with_horizon(10), usv1_params(), usv2_params(), at_reference(ref), Vec8::Zero(),
                      BiasPair{}, ref);
  MpcSolution sol;
  sol.u_seq.assign(10, Vec8::Zero());
  sol.q_pred = rollout(p, sol.u_seq);
  CHECK(constraint_residuals(sol, p).max() <= 1e-8);

  MpcSolution over = sol;
  over.u_seq[4](0) = p.config().f_max(0) + 10.0;
  CHECK(constraint_residuals(over, p).input_box == doctest::Approx(10.0));

  MpcSolution close = sol;
  close.q_pred[3].segment<2>(6) = close.q_pred[3].segment<2>(0) - Eigen::Vector2d(1.7, 0.0);
  CHECK(constraint_residuals(close, p).collision == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("warm start shift") {
  const ReferencePose ref = docking_reference(Eigen::Vector2d::Zero(), 0.0);
  const NmpcProblem p(config_with_horizon(10), usv1_params(), usv2_params(), at_reference(ref), Vec8::Zero(),
                      BiasPair{}, ref);
  MpcSolution sol;
  Vec8 u = Vec8::Zero();
  u << 50, 40, 10, -10, 20, 30, 0.1, -0.1;
  sol.u_seq.assign(10, u);
  sol.q_pred = rollout(p, sol.u_seq);
  sol.slack.assign(11, 0.0);
  const WarmStart ws = shift_warm_start(sol, p);
  for (const Vec8& v : ws.u) {
    CHECK(v == u);
  }
  double defect = 0.0;
  for (int h = 0; h < 10; ++h) {
    defect = std::max(defect, (ws.q[h + 1] - p.step(ws.q[h], ws.u[h])).cwiseAbs().maxCoeff());
  }
  CHECK(defect <= 1e-8);
}

TEST_CASE("translation invariance") {
  const NmpcProblem base = approach_problem(12);
  const Eigen::Vector2d offset(7.5, -4.0);
  const NmpcProblem moved = approach_problem(12, offset);
  const MpcSolution a = NmpcSolver{}.solve(base);
  const MpcSolution b = NmpcSolver{}.solve(moved);
  REQUIRE(a.status == SolveStatus::Optimal);
  REQUIRE(b.status == SolveStatus::Optimal);
  for (int h = 0; h < 12; ++h) {
    CHECK((a.u_seq[h] - b.u_seq[h]).cwiseQuotient(base.config().f_max.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-6);
  }
  for (int h = 0; h <= 12; ++h) {
    CHECK((a.q_pred[h].segment<2>(0) + offset - b.q_pred[h].segment<2>(0)).norm() < 1e-6);
    CHECK((a.q_pred[h].segment<2>(6) + offset - b.q_pred[h].segment<2>(6)).norm() < 1e-6);
  }
}

TEST_CASE("rotation equivariance") {
  const NmpcProblem base = approach_problem(12);
  const double phi = 0.9;
  const NmpcProblem turned = approach_problem(12, Eigen::Vector2d::Zero(), phi);
  const MpcSolution a = NmpcSolver{}.solve(base);
  const MpcSolution b = NmpcSolver{}.solve(turned);
  REQUIRE(a.status == SolveStatus::Optimal);
  REQUIRE(b.status == SolveStatus::Optimal);
  CHECK(b.cost == doctest::Approx(a.cost).epsilon(1e-5));
  const Mat3 rot = rotation_matrix(phi);
  for (int h = 0; h <= 12; ++h) {
    const Vec3 p1 = rot * Vec3(a.q_pred[h](0), a.q_pred[h](1), 0.0);
    CHECK((p1.head<2>() - b.q_pred[h].segment<2>(0)).norm() < 1e-5);
    CHECK(std::abs(wrap_angle(a.q_pred[h](2) + phi - b.q_pred[h](2))) < 1e-5);
  }
}

TEST_CASE("station keeping against a known bias balances the force") {
  const VesselParams p1 = usv1_params();
  const VesselParams p2 = usv2_params();
  const ReferencePose ref = docking_reference(Eigen::Vector2d::Zero(), 0.0);
  MpcConfig cfg = config_with_horizon(20);
  const BiasPair bias{BiasForce{Vec3(100, 0, 0)}, BiasForce{}};
  JointState q = at_reference(ref);
  Vec8 u_prev = Vec8::Zero();
  std::optional<WarmStart> ws;
  for (int k = 0; k < 60; ++k) {
    const NmpcProblem prob(cfg, p1, p2, q, u_prev, bias, ref);
    const MpcSolution sol = NmpcSolver{}.solve(prob, ws);
    REQUIRE(sol.status != SolveStatus::Infeasible);
    u_prev = sol.first_input();
    ws = shift_warm_start(sol, prob);
    q = joint_step(p1, p2, q, u_prev, bias, cfg.dt);
  }
  const Vec3 tau1 = allocate_fixed(JointControl::from_flat(u_prev).usv1, p1);
  const Vec3 expected = -body_bias(bias.usv1, q(2));
  CHECK((tau1 - expected).norm() <= 0.01 * expected.norm());
}

TEST_CASE("solve status names round-trip") {
  for (SolveStatus s : {SolveStatus::Optimal, SolveStatus::Relaxed, SolveStatus::MaxIter, SolveStatus::Infeasible,
                        SolveStatus::NotSolved}) {
    CHECK(solve_status_from_string(to_string(s)) == s);
  }
  CHECK_FALSE(solve_status_from_string("bogus").has_value());
}

TEST_CASE("weighted step Hessian matches differences of the Jacobians") {
  const NmpcProblem p = approach_problem(10);
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    JointState q = JointState::NullaryExpr([&] { return n(rng); });
    Vec8 u = Vec8::NullaryExpr([&] { return 50.0 * n(rng); });
    u.tail<2>() = Eigen::Vector2d(n(rng), n(rng));
    const JointState w = JointState::NullaryExpr([&] { return n(rng); });
    const Eigen::Matrix<double, 20, 20> analytic = p.step_weighted_hessian(q, u, w);
    auto gradient = [&](const JointState& qq, const Vec8& uu) {
      Eigen::Matrix<double, 20, 1> gr;
      gr.head<12>() = p.step_state_jacobian(qq, uu).transpose() * w;
      gr.tail<8>() = p.step_input_jacobian(qq, uu).transpose() * w;
      return gr;
    };
    Eigen::Matrix<double, 20, 20> fd;
    const double h = 1e-6;
    for (int j = 0; j < 20; ++j) {
      JointState qp = q, qm = q;
      Vec8 up = u, um = u;
      if (j < 12) {
        qp(j) += h;
        qm(j) -= h;
      } else {
        up(j - 12) += h;
        um(j - 12) -= h;
      }
      fd.col(j) = (gradient(qp, up) - gradient(qm, um)) / (2 * h);
    }
    CHECK(relative_error(analytic, fd) < 1e-5);
  }
}
