#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "coopdock/ocp_qp.hpp"

using namespace coopdock::qp;

namespace {

constexpr int kNx = 2;
constexpr int kNu = 1;
using Qp = OcpQp<kNx, kNu>;
using Solver = OcpQpSolver<kNx, kNu>;

struct DenseQp {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::MatrixXd G;  // G z >= h
  Eigen::VectorXd h;
};

// Layout z = [u0, x1, u1, x2, u2, ...]; x0 is data.
int u_index(int k) { return k * (kNx + kNu); }
int x_index(int k) { return (k - 1) * (kNx + kNu) + kNu; }

DenseQp densify(const Qp& qp) {
  const int n = qp.horizon();
  const int nz = (n + 1) * kNu + n * kNx;
  int m = 0;
  for (const auto& st : qp.stages) {
    m += st.num_constraints();
  }
  DenseQp d{Eigen::MatrixXd::Zero(nz, nz), Eigen::VectorXd::Zero(nz),
            Eigen::MatrixXd::Zero(n * kNx, nz), Eigen::VectorXd::Zero(n * kNx),
            Eigen::MatrixXd::Zero(m, nz), Eigen::VectorXd::Zero(m)};
  int row = 0;
  for (int k = 0; k <= n; ++k) {
    const auto& st = qp.stages[k];
    const int iu = u_index(k);
    d.H.block(iu, iu, kNu, kNu) += st.R;
    d.g.segment(iu, kNu) += st.r;
    if (k == 0) {
      d.g.segment(iu, kNu) += st.S * qp.x0;
    } else {
      const int ix = x_index(k);
      d.H.block(ix, ix, kNx, kNx) += st.Q;
      d.H.block(iu, ix, kNu, kNx) += st.S;
      d.H.block(ix, iu, kNx, kNu) += st.S.transpose();
      d.g.segment(ix, kNx) += st.q;
    }
    for (int i = 0; i < st.num_constraints(); ++i, ++row) {
      d.G.block(row, iu, 1, kNu) = st.Cu.row(i);
      d.h(row) = st.lower(i);
      if (k == 0) {
        d.h(row) -= st.Cx.row(i).dot(qp.x0);
      } else {
        d.G.block(row, x_index(k), 1, kNx) = st.Cx.row(i);
      }
    }
    if (k < n) {
      // x_{k+1} - A x_k - B u_k = b_k
      const int r = k * kNx;
      d.Aeq.block(r, x_index(k + 1), kNx, kNx).setIdentity();
      d.Aeq.block(r, iu, kNx, kNu) = -st.B;
      d.beq.segment(r, kNx) = st.b;
      if (k == 0) {
        d.beq.segment(r, kNx) += st.A * qp.x0;
      } else {
        d.Aeq.block(r, x_index(k), kNx, kNx) = -st.A;
      }
    }
  }
  return d;
}

// Brute force over active sets: the unique KKT point of a strictly convex QP.
Eigen::VectorXd brute_force(const DenseQp& d) {
  const int nz = static_cast<int>(d.g.size());
  const int m = static_cast<int>(d.h.size());
  const int ne = static_cast<int>(d.beq.size());
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < m; ++i) {
      if (mask & (1u << i)) {
        act.push_back(i);
      }
    }
    const int na = static_cast<int>(act.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nz + ne + na, nz + ne + na);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nz + ne + na);
    kkt.topLeftCorner(nz, nz) = d.H;
    kkt.block(0, nz, nz, ne) = d.Aeq.transpose();
    kkt.block(nz, 0, ne, nz) = d.Aeq;
    rhs.head(nz) = -d.g;
    rhs.segment(nz, ne) = d.beq;
    for (int j = 0; j < na; ++j) {
      kkt.block(0, nz + ne + j, nz, 1) = d.G.row(act[j]).transpose();
      kkt.block(nz + ne + j, 0, 1, nz) = d.G.row(act[j]);
      rhs(nz + ne + j) = d.h(act[j]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) {
      continue;
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd z = sol.head(nz);
    // With H z + g + Aeq' nu + G_A' w = 0, the inequality multiplier is -w.
    bool ok = true;
    for (int j = 0; j < na && ok; ++j) {
      ok = -sol(nz + ne + j) >= -1e-9;
    }
    if (ok && m > 0) {
      ok = (d.G * z - d.h).minCoeff() >= -1e-9;
    }
    if (ok) {
      return z;
    }
  }
  FAIL("no KKT point found");
  return {};
}

Qp random_qp(std::mt19937_64& rng, int n, int rows_per_stage) {
  std::normal_distribution<double> g(0.0, 1.0);
  auto rnd = [&] { return g(rng); };
  Qp qp;
  qp.x0 = Eigen::Vector2d(rnd(), rnd());
  qp.stages.resize(n + 1);
  std::vector<Eigen::Vector2d> xs{qp.x0};
  std::vector<Eigen::Matrix<double, 1, 1>> us;
  for (int k = 0; k <= n; ++k) {
    auto& st = qp.stages[k];
    Eigen::Matrix2d l = Eigen::Matrix2d::NullaryExpr(rnd);
    st.Q = l * l.transpose() + Eigen::Matrix2d::Identity();
    st.R(0, 0) = 1.0 + std::abs(rnd());
    st.S = 0.1 * Eigen::Matrix<double, 1, 2>::NullaryExpr(rnd);
    st.q = 3.0 * Eigen::Vector2d::NullaryExpr(rnd);
    st.r(0) = 3.0 * rnd();
    st.A = Eigen::Matrix2d::Identity() + 0.3 * Eigen::Matrix2d::NullaryExpr(rnd);
    st.B = Eigen::Vector2d::NullaryExpr(rnd);
    st.b = 0.1 * Eigen::Vector2d::NullaryExpr(rnd);
    us.emplace_back(Eigen::Matrix<double, 1, 1>(rnd()));
    if (k < n) {
      xs.push_back(st.A * xs.back() + st.B * us.back() + st.b);
    }
  }
  // Constraints strictly satisfied by the random rollout, so the QP is feasible.
  std::uniform_real_distribution<double> margin(0.0, 0.5);
  for (int k = 0; k <= n; ++k) {
    for (int i = 0; i < rows_per_stage; ++i) {
      const Eigen::Vector2d cx = Eigen::Vector2d::NullaryExpr(rnd);
      const Eigen::Matrix<double, 1, 1> cu(rnd());
      qp.stages[k].add_constraint(cx, cu, cx.dot(xs[k]) + cu(0) * us[k](0) - margin(rng));
    }
  }
  return qp;
}

Eigen::VectorXd stack(const Qp& qp, const Solver::Solution& s) {
  const int n = qp.horizon();
  Eigen::VectorXd z((n + 1) * kNu + n * kNx);
  for (int k = 0; k <= n; ++k) {
    z.segment(u_index(k), kNu) = s.u[k];
    if (k > 0) {
      z.segment(x_index(k), kNx) = s.x[k];
    }
  }
  return z;
}

}  // namespace

TEST_CASE("unconstrained structured QP matches the dense KKT solution") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Qp qp = random_qp(rng, 6, 0);
    Solver solver;
    const auto sol = solver.solve(qp);
    REQUIRE(sol.converged);
    const Eigen::VectorXd z = brute_force(densify(qp));
    CHECK((stack(qp, sol) - z).norm() < 1e-7 * (1.0 + z.norm()));
    CHECK(sol.x[0] == qp.x0);
  }
}

TEST_CASE("constrained structured QP matches brute-force active-set enumeration") {
  std::mt19937_64 rng(8);
  int active_seen = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Qp qp = random_qp(rng, 2, 2);
    Solver solver;
    const auto sol = solver.solve(qp);
    REQUIRE(sol.converged);
    const DenseQp d = densify(qp);
    const Eigen::VectorXd z = brute_force(d);
    CHECK((stack(qp, sol) - z).norm() < 1e-6 * (1.0 + z.norm()));
    if ((d.G * z - d.h).minCoeff() < 1e-7) {
      ++active_seen;
    }
    for (const auto& l : sol.lambda) {
      CHECK(l.minCoeff() >= 0.0);
    }
  }
  // The fixture is meant to exercise active constraints.
  CHECK(active_seen >= 10);
}

TEST_CASE("multipliers satisfy stationarity at the solution") {
  std::mt19937_64 rng(12);
  const Qp qp = random_qp(rng, 8, 3);
  Solver solver;
  const auto sol = solver.solve(qp);
  REQUIRE(sol.converged);
  CHECK(Solver::stationarity_residual(qp, sol.x, sol.u, sol.pi, sol.lambda) < 1e-7);
  for (int k = 0; k <= qp.horizon(); ++k) {
    const Eigen::VectorXd c = Solver::constraint_value(qp.stages[k], sol.x[k], sol.u[k]);
    CHECK(c.minCoeff() >= -1e-8);
    CHECK(std::abs(c.dot(sol.lambda[k])) < 1e-6);
  }
}

TEST_CASE("rejects a horizon without dynamics") {
  Qp qp;
  qp.stages.resize(1);
  Solver solver;
  CHECK_THROWS_AS(solver.solve(qp), std::invalid_argument);
}
