#include "coopdock/nmpc_controller.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "coopdock/ocp_qp.hpp"

namespace coopdock {

namespace {

// QP state: [scaled dq (12); scaled du(h-1) (8)], QP input: [scaled du (8); ds].
constexpr int kQpNx = 20;
constexpr int kQpNu = 9;
using Qp = qp::OcpQp<kQpNx, kQpNu>;
using QpStage = qp::OcpQpStage<kQpNx, kQpNu>;
using QpSolver = qp::OcpQpSolver<kQpNx, kQpNu>;

constexpr double kProximalWeight = 1e-6;

struct Scaling {
  Vec12 state;
  Vec8 input;
  double slack = 1e-3;  // m

  explicit Scaling(const MpcConfig& config) {
    const double pi = std::numbers::pi;
    state << 10, 10, pi, 3, 3, 1, 10, 10, pi, 3, 3, 1;
    input = config.f_max.cwiseAbs().cwiseMax(config.f_min.cwiseAbs());
  }
};

struct Iterate {
  std::vector<JointState> q;
  std::vector<Vec8> u;
  std::vector<double> s;
};

Iterate unpack(const NmpcProblem& p, const Eigen::VectorXd& z) {
  const int n = p.horizon();
  Iterate it;
  it.q.resize(n + 1);
  it.u.resize(n);
  it.s.resize(n + 1);
  for (int h = 0; h <= n; ++h) {
    it.q[h] = z.segment<12>(p.state_offset(h));
    it.s[h] = z(p.slack_offset(h));
  }
  for (int h = 0; h < n; ++h) {
    it.u[h] = z.segment<8>(p.input_offset(h));
  }
  return it;
}

Eigen::VectorXd pack(const NmpcProblem& p, const Iterate& it) {
  Eigen::VectorXd z(p.num_variables());
  for (int h = 0; h <= p.horizon(); ++h) {
    z.segment<12>(p.state_offset(h)) = it.q[h];
    z(p.slack_offset(h)) = it.s[h];
  }
  for (int h = 0; h < p.horizon(); ++h) {
    z.segment<8>(p.input_offset(h)) = it.u[h];
  }
  return z;
}

Vec8 input_before(const NmpcProblem& p, const Iterate& it, int h) {
  return h == 0 ? p.previous_input() : it.u[h - 1];
}

// Scaled L1 infeasibility, in the same units as the QP rows.
double infeasibility(const NmpcProblem& p, const Scaling& sc, const Iterate& it) {
  const MpcConfig& c = p.config();
  const int n = p.horizon();
  double v = 0.0;
  for (int h = 0; h < n; ++h) {
    v += ((it.q[h + 1] - p.step(it.q[h], it.u[h])).cwiseQuotient(sc.state)).lpNorm<1>();
    v += ((c.f_min - it.u[h]).cwiseMax(0.0) + (it.u[h] - c.f_max).cwiseMax(0.0))
             .cwiseQuotient(sc.input)
             .sum();
    const Vec8 du = it.u[h] - input_before(p, it, h);
    v += ((c.dt * c.df_min - du).cwiseMax(0.0) + (du - c.dt * c.df_max).cwiseMax(0.0))
             .cwiseQuotient(sc.input)
             .sum();
  }
  for (int h = 0; h <= n; ++h) {
    const JointState& q = it.q[h];
    v += std::max(0.0, c.d_min - (q.segment<2>(0) - q.segment<2>(6)).norm() - it.s[h]);
    v += std::max(0.0, -it.s[h]);
    if (h > 0) {
      v += std::max(0.0, q.segment<2>(3).squaredNorm() - c.v_max_1 * c.v_max_1);
      v += std::max(0.0, q.segment<2>(9).squaredNorm() - c.v_max_2 * c.v_max_2);
    }
  }
  return v;
}

// Multiplier estimate in QP units: dynamics multipliers per stage and
// inequality multipliers in QP row order.
struct Multipliers {
  std::vector<Eigen::Matrix<double, kQpNx, 1>> pi;
  std::vector<Eigen::VectorXd> lambda;
};

// Adds the constraint curvature of the Lagrangian to a stage and projects the
// stage Hessian onto the positive semidefinite cone.
void add_curvature(const NmpcProblem& p, const Scaling& sc, const Iterate& it,
                   const Multipliers& m, int k, QpStage& st) {
  const int n = p.horizon();
  const JointState& q = it.q[k];
  Eigen::Matrix<double, 20, 20> h = Eigen::Matrix<double, 20, 20>::Zero();
  if (k < n) {
    const JointState w = m.pi[k].head<12>().cwiseQuotient(sc.state);
    h = p.step_weighted_hessian(q, it.u[k], w);
  }
  const int coll_row = k < n ? 32 : 0;
  const double lam_coll = m.lambda[k](coll_row);
  const Eigen::Vector2d d = q.segment<2>(0) - q.segment<2>(6);
  const double dist = d.norm();
  if (dist > 1e-9) {
    const Eigen::Vector2d unit = d / dist;
    const Eigen::Matrix2d kmat = (Eigen::Matrix2d::Identity() - unit * unit.transpose()) / dist;
    h.block<2, 2>(0, 0) -= lam_coll * kmat;
    h.block<2, 2>(6, 6) -= lam_coll * kmat;
    h.block<2, 2>(0, 6) += lam_coll * kmat;
    h.block<2, 2>(6, 0) += lam_coll * kmat;
  }
  if (k >= 1) {
    h.block<2, 2>(3, 3) += 2.0 * m.lambda[k](coll_row + 1) * Eigen::Matrix2d::Identity();
    h.block<2, 2>(9, 9) += 2.0 * m.lambda[k](coll_row + 2) * Eigen::Matrix2d::Identity();
  }
  Eigen::Matrix<double, 20, 1> dscale;
  dscale << sc.state, sc.input;
  h = dscale.asDiagonal() * h * dscale.asDiagonal();
  if (k == n) {
    h.bottomRightCorner<8, 8>().setZero();
    h.topRightCorner<12, 8>().setZero();
    h.bottomLeftCorner<8, 12>().setZero();
  }

  h.topLeftCorner<12, 12>() += st.Q.topLeftCorner<12, 12>();
  h.bottomRightCorner<8, 8>() += st.R.topLeftCorner<8, 8>();
  h.bottomLeftCorner<8, 12>() += st.S.topLeftCorner<8, 12>();
  h.topRightCorner<12, 8>() += st.S.topLeftCorner<8, 12>().transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 20, 20>> eig(h);
  const Eigen::Matrix<double, 20, 1> lam = eig.eigenvalues().cwiseMax(0.0);
  h = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  st.Q.topLeftCorner<12, 12>() = h.topLeftCorner<12, 12>();
  st.R.topLeftCorner<8, 8>() = h.bottomRightCorner<8, 8>();
  st.S.topLeftCorner<8, 12>() = h.bottomLeftCorner<8, 12>();
  if (k == n) {
    st.R.topLeftCorner<8, 8>().setIdentity();
  }
}

// SQP subproblem in scaled step variables around the iterate. Without a
// multiplier estimate the Hessian is the Gauss-Newton one.
Qp build_qp(const NmpcProblem& p, const Scaling& sc, const Iterate& it,
            const Multipliers* multipliers) {
  const MpcConfig& c = p.config();
  const int n = p.horizon();
  const ReferencePose& ref = p.unwrapped_reference();
  Qp qp;
  qp.stages.resize(n + 1);

  for (int k = 0; k <= n; ++k) {
    QpStage& st = qp.stages[k];
    const JointState& q = it.q[k];

    if (k >= 1) {
      for (int i = 0; i < 3; ++i) {
        const double s1 = sc.state(i);
        const double s2 = sc.state(6 + i);
        st.Q(i, i) = 2.0 * c.q1_weights(i) * s1 * s1;
        st.q(i) = 2.0 * c.q1_weights(i) * (q(i) - ref.usv1(i)) * s1;
        st.Q(6 + i, 6 + i) = 2.0 * c.q2_weights(i) * s2 * s2;
        st.q(6 + i) = 2.0 * c.q2_weights(i) * (q(6 + i) - ref.usv2(i)) * s2;
      }
    }
    if (k >= 1 && k < n) {
      for (int i = 0; i < 8; ++i) {
        st.R(i, i) = 2.0 * c.control_weights(i) * sc.input(i) * sc.input(i);
        st.r(i) = 2.0 * c.control_weights(i) * it.u[k](i) * sc.input(i);
      }
    }
    if (k == n) {
      st.R.topLeftCorner<8, 8>().setIdentity();  // placeholder inputs of the last stage
    }
    if (k == 0) {
      // u(0) carries no cost and the fixed-thruster map has a null space; a
      // small proximal term picks the step nearest the current iterate.
      st.R.topLeftCorner<8, 8>().diagonal().setConstant(kProximalWeight);
    }
    st.R(8, 8) = 2.0 * c.slack_weight * sc.slack * sc.slack;
    st.r(8) = (c.slack_l1_weight + 2.0 * c.slack_weight * it.s[k]) * sc.slack;

    if (k < n) {
      const Mat12 a = p.step_state_jacobian(q, it.u[k]);
      const Eigen::Matrix<double, 12, 8> b = p.step_input_jacobian(q, it.u[k]);
      st.A.topLeftCorner<12, 12>() = sc.state.cwiseInverse().asDiagonal() * a * sc.state.asDiagonal();
      st.B.topLeftCorner<12, 8>() = sc.state.cwiseInverse().asDiagonal() * b * sc.input.asDiagonal();
      st.B.block<8, 8>(12, 0).setIdentity();
      st.b.head<12>() = (p.step(q, it.u[k]) - it.q[k + 1]).cwiseQuotient(sc.state);
    }

    const int rows = k < n ? 16 + 16 + 1 + (k >= 1 ? 2 : 0) + 1 : 1 + 2 + 1;
    st.Cx.setZero(rows, kQpNx);
    st.Cu.setZero(rows, kQpNu);
    st.lower.setZero(rows);
    int row = 0;

    if (k < n) {
      const Vec8& u = it.u[k];
      const Vec8 du = u - input_before(p, it, k);
      for (int i = 0; i < 8; ++i) {
        const double s = sc.input(i);
        st.Cu(row, i) = 1.0;
        st.lower(row++) = (c.f_min(i) - u(i)) / s;
        st.Cu(row, i) = -1.0;
        st.lower(row++) = (u(i) - c.f_max(i)) / s;
        st.Cu(row, i) = 1.0;
        st.Cx(row, 12 + i) = -1.0;
        st.lower(row++) = (c.dt * c.df_min(i) - du(i)) / s;
        st.Cu(row, i) = -1.0;
        st.Cx(row, 12 + i) = 1.0;
        st.lower(row++) = (du(i) - c.dt * c.df_max(i)) / s;
      }
    }

    const Eigen::Vector2d d = q.segment<2>(0) - q.segment<2>(6);
    const double dist = d.norm();
    const Eigen::Vector2d unit = dist > 1e-12 ? Eigen::Vector2d(d / dist) : Eigen::Vector2d(1.0, 0.0);
    st.Cx.block<1, 2>(row, 0) = (unit.cwiseProduct(sc.state.segment<2>(0))).transpose();
    st.Cx.block<1, 2>(row, 6) = -(unit.cwiseProduct(sc.state.segment<2>(6))).transpose();
    st.Cu(row, 8) = sc.slack;
    st.lower(row++) = c.d_min - dist - it.s[k];

    if (k >= 1) {
      st.Cx.block<1, 2>(row, 3) = -2.0 * q.segment<2>(3).cwiseProduct(sc.state.segment<2>(3)).transpose();
      st.lower(row++) = q.segment<2>(3).squaredNorm() - c.v_max_1 * c.v_max_1;
      st.Cx.block<1, 2>(row, 9) = -2.0 * q.segment<2>(9).cwiseProduct(sc.state.segment<2>(9)).transpose();
      st.lower(row++) = q.segment<2>(9).squaredNorm() - c.v_max_2 * c.v_max_2;
    }

    st.Cu(row, 8) = 1.0;
    st.lower(row++) = -it.s[k] / sc.slack;

    if (multipliers != nullptr) {
      add_curvature(p, sc, it, *multipliers, k, st);
    }
  }
  return qp;
}

// Inertia correction: shifts the state and input Hessian blocks by delta * I
// until the reduced Hessian is positive definite. `delta` carries the last
// shift between iterations.
void convexify(Qp& qp, double& delta) {
  if (QpSolver::reduced_hessian_positive_definite(qp)) {
    delta = 0.0;
    return;
  }
  double shift = delta > 0.0 ? std::max(1e-4, delta / 4.0) : 1e-4;
  for (;;) {
    Qp trial = qp;
    for (QpStage& st : trial.stages) {
      st.Q.topLeftCorner<12, 12>().diagonal().array() += shift;
      st.R.topLeftCorner<8, 8>().diagonal().array() += shift;
    }
    if (QpSolver::reduced_hessian_positive_definite(trial) || shift > 1e12) {
      qp = std::move(trial);
      delta = shift;
      return;
    }
    shift *= 4.0;
  }
}

double gradient_scale(const Qp& qp) {
  double g = 1.0;
  for (const QpStage& st : qp.stages) {
    g = std::max({g, st.q.cwiseAbs().maxCoeff(), st.r.cwiseAbs().maxCoeff()});
  }
  return g;
}

struct KktMeasure {
  double stationarity = 0.0;
  double complementarity = 0.0;
  double feasibility = 0.0;

  double total() const { return std::max({stationarity, complementarity, feasibility}); }
};

// KKT residual of the NLP at the current iterate with the QP multipliers.
KktMeasure kkt_at_iterate(const Qp& qp, const qp::OcpQpSolution<kQpNx, kQpNu>& sol) {
  const int n = qp.horizon();
  std::vector<QpStage::VecX> zx(n + 1, QpStage::VecX::Zero());
  std::vector<QpStage::VecU> zu(n + 1, QpStage::VecU::Zero());
  const double scale = gradient_scale(qp);
  KktMeasure m;
  m.stationarity = QpSolver::stationarity_residual(qp, zx, zu, sol.pi, sol.lambda) / scale;
  for (int k = 0; k <= n; ++k) {
    const QpStage& st = qp.stages[k];
    if (k < n) {
      m.feasibility = std::max(m.feasibility, st.b.cwiseAbs().maxCoeff());
    }
    for (int i = 0; i < st.num_constraints(); ++i) {
      const double value = -st.lower(i);  // constraint value at the iterate
      m.feasibility = std::max(m.feasibility, std::max(0.0, -value));
      m.complementarity =
          std::max(m.complementarity, std::abs(sol.lambda[k](i) * std::max(0.0, value)) / scale);
    }
  }
  return m;
}

double duality_gap(const qp::OcpQpSolution<kQpNx, kQpNu>& sol) {
  double gap = 0.0;
  for (std::size_t k = 0; k < sol.slack.size(); ++k) {
    gap += sol.slack[k].dot(sol.lambda[k]);
  }
  return gap;
}

double max_abs_inequality_multiplier(const qp::OcpQpSolution<kQpNx, kQpNu>& sol) {
  double m = 0.0;
  for (const auto& l : sol.lambda) {
    if (l.size() > 0) m = std::max(m, l.cwiseAbs().maxCoeff());
  }
  return m;
}

Iterate take_step(const Iterate& it, const qp::OcpQpSolution<kQpNx, kQpNu>& sol, const Scaling& sc,
                  double alpha) {
  Iterate next = it;
  const int n = static_cast<int>(it.u.size());
  for (int k = 0; k <= n; ++k) {
    next.q[k] += alpha * sol.x[k].head<12>().cwiseProduct(sc.state);
    next.s[k] += alpha * sol.u[k](8) * sc.slack;
    if (k < n) {
      next.u[k] += alpha * sol.u[k].head<8>().cwiseProduct(sc.input);
    }
  }
  return next;
}

double directional_gradient(const Qp& qp, const qp::OcpQpSolution<kQpNx, kQpNu>& sol) {
  double d = 0.0;
  const int n = qp.horizon();
  for (int k = 0; k <= n; ++k) {
    d += qp.stages[k].q.dot(sol.x[k]);
    // Placeholder inputs of the last stage carry no gradient.
    d += qp.stages[k].r.dot(sol.u[k]);
  }
  return d;
}

}  // namespace

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Relaxed: return "relaxed";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NotSolved: return "not_solved";
  }
  return "unknown";
}

std::optional<SolveStatus> solve_status_from_string(std::string_view text) {
  for (SolveStatus s : {SolveStatus::Optimal, SolveStatus::Relaxed, SolveStatus::MaxIter,
                        SolveStatus::Infeasible, SolveStatus::NotSolved}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

double ResidualReport::max() const {
  return std::max({initial_condition, dynamics, input_box, rate, collision, speed});
}

ResidualReport constraint_residuals(const MpcSolution& sol, const NmpcProblem& problem) {
  const MpcConfig& c = problem.config();
  ResidualReport r;
  auto heading_safe = [](JointState e) {
    e(2) = wrap_angle(e(2));
    e(8) = wrap_angle(e(8));
    return e;
  };
  if (sol.q_pred.empty()) {
    return r;
  }
  r.initial_condition =
      heading_safe(sol.q_pred.front() - problem.initial_state()).cwiseAbs().maxCoeff();
  for (std::size_t h = 0; h < sol.u_seq.size(); ++h) {
    const Vec8& u = sol.u_seq[h];
    if (h + 1 < sol.q_pred.size()) {
      const JointState defect = sol.q_pred[h + 1] - problem.step(sol.q_pred[h], u);
      r.dynamics = std::max(r.dynamics, heading_safe(defect).cwiseAbs().maxCoeff());
    }
    r.input_box = std::max({r.input_box, (u - c.f_max).maxCoeff(), (c.f_min - u).maxCoeff()});
    const Vec8 before = h == 0 ? problem.previous_input() : sol.u_seq[h - 1];
    const Vec8 du = u - before;
    r.rate = std::max({r.rate, (du - c.dt * c.df_max).maxCoeff(), (c.dt * c.df_min - du).maxCoeff()});
  }
  for (const JointState& q : sol.q_pred) {
    const double dist = (q.segment<2>(0) - q.segment<2>(6)).norm();
    r.collision = std::max(r.collision, c.d_min - dist);
    r.speed = std::max({r.speed, q.segment<2>(3).norm() - c.v_max_1, q.segment<2>(9).norm() - c.v_max_2});
  }
  r.input_box = std::max(0.0, r.input_box);
  r.rate = std::max(0.0, r.rate);
  r.collision = std::max(0.0, r.collision);
  r.speed = std::max(0.0, r.speed);
  return r;
}

std::vector<JointState> rollout(const NmpcProblem& problem, const std::vector<Vec8>& u_seq) {
  std::vector<JointState> q(u_seq.size() + 1);
  q[0] = problem.initial_state();
  for (std::size_t h = 0; h < u_seq.size(); ++h) {
    q[h + 1] = problem.step(q[h], u_seq[h]);
  }
  return q;
}

WarmStart shift_warm_start(const MpcSolution& prev, const NmpcProblem& problem) {
  const std::size_t n = prev.u_seq.size();
  if (n == 0 || prev.q_pred.size() != n + 1) {
    throw std::invalid_argument("warm start shift needs a full-horizon solution");
  }
  WarmStart ws;
  ws.u.assign(prev.u_seq.begin() + 1, prev.u_seq.end());
  ws.u.push_back(prev.u_seq.back());
  ws.q.assign(prev.q_pred.begin() + 1, prev.q_pred.end());
  ws.q.push_back(problem.step(prev.q_pred.back(), prev.u_seq.back()));
  if (prev.slack.size() == n + 1) {
    ws.slack.assign(prev.slack.begin() + 1, prev.slack.end());
    ws.slack.push_back(prev.slack.back());
  } else {
    ws.slack.assign(n + 1, 0.0);
  }
  return ws;
}

Eigen::VectorXd initial_iterate(const NmpcProblem& problem,
                                const std::optional<WarmStart>& warm_start) {
  const int n = problem.horizon();
  if (!warm_start || static_cast<int>(warm_start->u.size()) != n ||
      static_cast<int>(warm_start->q.size()) != n + 1) {
    return problem.cold_start();
  }
  Iterate it;
  it.q = warm_start->q;
  it.u = warm_start->u;
  it.s = warm_start->slack.size() == static_cast<std::size_t>(n + 1) ? warm_start->slack
                                                                    : std::vector<double>(n + 1, 0.0);
  // Move the headings onto the branch of the measured headings.
  const JointState& q_k = problem.initial_state();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int idx : {2, 8}) {
    const double turns = std::round((it.q[0](idx) - q_k(idx)) / two_pi);
    for (JointState& q : it.q) {
      q(idx) -= turns * two_pi;
    }
  }
  it.q[0] = q_k;
  const double d_min = problem.config().d_min;
  for (int h = 0; h <= n; ++h) {
    const double dist = (it.q[h].segment<2>(0) - it.q[h].segment<2>(6)).norm();
    it.s[h] = std::max({it.s[h], 0.0, d_min - dist});
  }
  return pack(problem, it);
}

MpcSolution NmpcSolver::solve(const NmpcProblem& problem,
                              const std::optional<WarmStart>& warm_start) const {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const MpcConfig& c = problem.config();
  const Scaling sc(c);

  Iterate it = unpack(problem, initial_iterate(problem, warm_start));
  // Iterates are kept dynamics-feasible by re-simulating the inputs, so the
  // merit function only has to weigh the inequality rows.
  it.q = rollout(problem, it.u);
  QpSolver qp_solver;
  double rho = 1.0;

  MpcSolution out;
  out.status = SolveStatus::MaxIter;
  bool converged = false;
  // Multipliers of the last full step, used to measure the KKT residual at
  // the iterate it produced.
  std::optional<qp::OcpQpSolution<kQpNx, kQpNu>> previous;
  std::optional<Multipliers> multipliers;
  double hessian_shift = 0.0;
  int iter = 0;
  for (; iter < c.max_iterations; ++iter) {
    Qp qp = build_qp(problem, sc, it, multipliers ? &*multipliers : nullptr);
    if (multipliers) {
      convexify(qp, hessian_shift);
    }
    if (previous) {
      const KktMeasure kkt = kkt_at_iterate(qp, *previous);
      out.kkt_residual = kkt.total();
      if (kkt.total() <= c.tolerance) {
        converged = true;
        break;
      }
    }
    qp::OcpQpSolution<kQpNx, kQpNu> step;
    try {
      step = qp_solver.solve(qp);
    } catch (const std::runtime_error&) {
      out.status = SolveStatus::Infeasible;
      break;
    }
    out.qp_iterations += step.iterations;
    const KktMeasure kkt = kkt_at_iterate(qp, step);
    if (!previous || kkt.total() < out.kkt_residual) {
      out.kkt_residual = kkt.total();
    }
    if (kkt.total() <= c.tolerance) {
      converged = true;
      break;
    }
    if (c.time_budget_s > 0.0 &&
        std::chrono::duration<double>(Clock::now() - start).count() > c.time_budget_s) {
      break;
    }

    rho = std::max(rho, 1.5 * max_abs_inequality_multiplier(step) + 1.0);
    const Eigen::VectorXd z = pack(problem, it);
    const double v0 = infeasibility(problem, sc, it);
    const double merit0 = problem.objective(z) + rho * v0;
    const double slope = directional_gradient(qp, step) - rho * v0;
    // The interior-point QP stops with a small duality gap, so its step can
    // raise the objective by up to that gap near a solution.
    const double slack_allowance =
        10.0 * duality_gap(step) + 1e-12 * std::max(1.0, std::abs(merit0));

    double alpha = 1.0;
    bool accepted = false;
    Iterate trial;
    auto acceptable = [&](const Iterate& cand, double a) {
      const double merit = problem.objective(pack(problem, cand)) + rho * infeasibility(problem, sc, cand);
      return std::isfinite(merit) &&
             merit <= merit0 + 1e-4 * a * std::min(slope, 0.0) + slack_allowance;
    };
    for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
      trial = take_step(it, step, sc, alpha);
      trial.q = rollout(problem, trial.u);
      if (acceptable(trial, alpha)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      break;
    }
    if (!multipliers) {
      multipliers = Multipliers{step.pi, step.lambda};
    } else {
      for (std::size_t k = 0; k < step.pi.size(); ++k) {
        multipliers->pi[k] += alpha * (step.pi[k] - multipliers->pi[k]);
      }
      for (std::size_t k = 0; k < step.lambda.size(); ++k) {
        multipliers->lambda[k] += alpha * (step.lambda[k] - multipliers->lambda[k]);
      }
    }
    if (alpha == 1.0) {
      previous = std::move(step);
    } else {
      previous.reset();
    }
    it = std::move(trial);
  }
  out.iterations = iter;

  out.u_seq = it.u;
  out.q_pred = rollout(problem, out.u_seq);
  out.slack = it.s;
  for (int h = 0; h <= problem.horizon(); ++h) {
    const double dist = (out.q_pred[h].segment<2>(0) - out.q_pred[h].segment<2>(6)).norm();
    out.slack[h] = std::max({0.0, out.slack[h], c.d_min - dist});
  }
  Iterate final_it{out.q_pred, out.u_seq, out.slack};
  out.cost = problem.objective(pack(problem, final_it));
  out.max_slack = *std::max_element(out.slack.begin(), out.slack.end());
  out.max_constraint_violation = constraint_residuals(out, problem).max();

  if (converged) {
    if (out.max_slack > 1e-6) {
      out.status = SolveStatus::Relaxed;
    } else if (out.max_constraint_violation <= c.tolerance) {
      out.status = SolveStatus::Optimal;
    } else {
      out.status = SolveStatus::MaxIter;
    }
  }
  out.solve_time = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

}  // namespace coopdock
