#pragma once

// Primal-dual interior-point solver for optimal-control structured QPs.
//
//   min   sum_k 1/2 [u;x]' [R S; S' Q] [u;x] + r'u + q'x
//   s.t.  x_{k+1} = A_k x_k + B_k u_k + b_k      k = 0..N-1
//         Cx_k x_k + Cu_k u_k >= lower_k         k = 0..N
//         x_0 given
//
// Every stage, including the last one, carries an input block. The last
// stage has no dynamics. Newton systems are solved with a Riccati recursion,
// so one iteration costs O(N (nx + nu)^3).

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace coopdock::qp {

template <int NX, int NU>
struct OcpQpStage {
  using MatXX = Eigen::Matrix<double, NX, NX>;
  using MatUX = Eigen::Matrix<double, NU, NX>;
  using MatUU = Eigen::Matrix<double, NU, NU>;
  using MatXU = Eigen::Matrix<double, NX, NU>;
  using VecX = Eigen::Matrix<double, NX, 1>;
  using VecU = Eigen::Matrix<double, NU, 1>;

  MatXX Q = MatXX::Zero();
  MatUX S = MatUX::Zero();
  MatUU R = MatUU::Zero();
  VecX q = VecX::Zero();
  VecU r = VecU::Zero();

  MatXX A = MatXX::Zero();
  MatXU B = MatXU::Zero();
  VecX b = VecX::Zero();

  Eigen::Matrix<double, Eigen::Dynamic, NX> Cx;
  Eigen::Matrix<double, Eigen::Dynamic, NU> Cu;
  Eigen::VectorXd lower;

  int num_constraints() const { return static_cast<int>(lower.size()); }

  // Appends a row cx'x + cu'u >= lo.
  void add_constraint(const VecX& cx, const VecU& cu, double lo) {
    const Eigen::Index m = lower.size();
    Cx.conservativeResize(m + 1, Eigen::NoChange);
    Cu.conservativeResize(m + 1, Eigen::NoChange);
    lower.conservativeResize(m + 1);
    Cx.row(m) = cx.transpose();
    Cu.row(m) = cu.transpose();
    lower(m) = lo;
  }
};

template <int NX, int NU>
struct OcpQp {
  Eigen::Matrix<double, NX, 1> x0 = Eigen::Matrix<double, NX, 1>::Zero();
  std::vector<OcpQpStage<NX, NU>> stages;  // N + 1 entries

  int horizon() const { return static_cast<int>(stages.size()) - 1; }
};

struct IpmOptions {
  int max_iterations = 80;
  double tol_stationarity = 1e-9;  // relative to the gradient scale
  double tol_feasibility = 1e-9;
  double tol_complementarity = 1e-10;
  double step_fraction = 0.995;
  double initial_regularization = 1e-8;
};

template <int NX, int NU>
struct OcpQpSolution {
  std::vector<Eigen::Matrix<double, NX, 1>> x;   // x[0] = x0
  std::vector<Eigen::Matrix<double, NU, 1>> u;
  std::vector<Eigen::Matrix<double, NX, 1>> pi;  // dynamics multipliers, size N
  std::vector<Eigen::VectorXd> lambda;           // inequality multipliers (>= 0)
  std::vector<Eigen::VectorXd> slack;            // Cx x + Cu u - lower
  int iterations = 0;
  bool converged = false;
  double mu = 0.0;
  double stationarity = 0.0;
  double feasibility = 0.0;
  double regularization = 0.0;  // largest Hessian shift applied by the factorisation
};

template <int NX, int NU>
class OcpQpSolver {
 public:
  using Stage = OcpQpStage<NX, NU>;
  using Qp = OcpQp<NX, NU>;
  using Solution = OcpQpSolution<NX, NU>;
  using VecX = typename Stage::VecX;
  using VecU = typename Stage::VecU;
  using MatXX = typename Stage::MatXX;
  using MatUX = typename Stage::MatUX;
  using MatUU = typename Stage::MatUU;

  explicit OcpQpSolver(IpmOptions options = {}) : options_(options) {}

  Solution solve(const Qp& qp) {
    const int n = qp.horizon();
    if (n < 1) {
      throw std::invalid_argument("structured QP needs at least one dynamics stage");
    }
    resize(n);
    for (int k = 0; k <= n; ++k) {
      compress(qp.stages[k], rows_[k]);
    }

    Solution sol;
    sol.x.assign(n + 1, VecX::Zero());
    sol.u.assign(n + 1, VecU::Zero());
    sol.pi.assign(n, VecX::Zero());
    sol.lambda.resize(n + 1);
    sol.slack.resize(n + 1);
    sol.x[0] = qp.x0;
    for (int k = 0; k < n; ++k) {
      sol.x[k + 1] = qp.stages[k].A * sol.x[k] + qp.stages[k].B * sol.u[k] + qp.stages[k].b;
    }

    int m_total = 0;
    for (int k = 0; k <= n; ++k) {
      const Stage& st = qp.stages[k];
      const Eigen::VectorXd g = sparse_value(rows_[k], st, sol.x[k], sol.u[k]);
      sol.slack[k] = g.cwiseMax(1.0);
      sol.lambda[k] = Eigen::VectorXd::Ones(st.num_constraints());
      m_total += st.num_constraints();
    }

    double grad_scale = 1.0;
    for (const Stage& st : qp.stages) {
      grad_scale = std::max({grad_scale, st.q.cwiseAbs().maxCoeff(), st.r.cwiseAbs().maxCoeff()});
    }

    for (int iter = 0; iter <= options_.max_iterations; ++iter) {
      compute_residuals(qp, sol);
      sol.mu = m_total > 0 ? complementarity(sol) / m_total : 0.0;
      sol.iterations = iter;
      if (sol.stationarity <= options_.tol_stationarity * grad_scale &&
          sol.feasibility <= options_.tol_feasibility && sol.mu <= options_.tol_complementarity) {
        sol.converged = true;
        break;
      }
      if (iter == options_.max_iterations) {
        break;
      }

      factorize(qp, sol, sol.regularization);

      // Predictor.
      for (int k = 0; k <= n; ++k) {
        rc_[k] = sol.lambda[k].cwiseProduct(sol.slack[k]);
      }
      newton_direction(qp, sol);
      double alpha = max_step(sol, 1.0);
      double mu_aff = 0.0;
      for (int k = 0; k <= n; ++k) {
        mu_aff += (sol.slack[k] + alpha * dt_[k]).dot(sol.lambda[k] + alpha * dl_[k]);
      }
      const double mu = sol.mu;
      const double sigma = m_total > 0 && mu > 0.0 ? std::pow(mu_aff / m_total / mu, 3) : 0.0;

      // Corrector. The centring target never drops far below the
      // complementarity tolerance: pushing slacks towards zero beyond it only
      // ruins the conditioning of the barrier Hessian.
      const double target = std::max(std::min(sigma, 1.0) * mu, 0.1 * options_.tol_complementarity);
      for (int k = 0; k <= n; ++k) {
        rc_[k] = sol.lambda[k].cwiseProduct(sol.slack[k]) + dt_[k].cwiseProduct(dl_[k]) -
                 Eigen::VectorXd::Constant(dt_[k].size(), target);
      }
      newton_direction(qp, sol);
      alpha = max_step(sol, options_.step_fraction);

      for (int k = 0; k <= n; ++k) {
        sol.x[k] += alpha * dx_[k];
        sol.u[k] += alpha * du_[k];
        sol.slack[k] += alpha * dt_[k];
        sol.lambda[k] += alpha * dl_[k];
        if (k < n) {
          sol.pi[k] += alpha * (pi_new_[k] - sol.pi[k]);
        }
      }
    }
    return sol;
  }

  // Stationarity residual of the QP Lagrangian at (x, u, pi, lambda); infinity norm.
  static double stationarity_residual(const Qp& qp, const std::vector<VecX>& x,
                                      const std::vector<VecU>& u, const std::vector<VecX>& pi,
                                      const std::vector<Eigen::VectorXd>& lambda) {
    const int n = qp.horizon();
    double res = 0.0;
    for (int k = 0; k <= n; ++k) {
      const Stage& st = qp.stages[k];
      VecU ru = st.R * u[k] + st.S * x[k] + st.r;
      VecX rx = st.Q * x[k] + st.S.transpose() * u[k] + st.q;
      if (st.num_constraints() > 0) {
        ru -= st.Cu.transpose() * lambda[k];
        rx -= st.Cx.transpose() * lambda[k];
      }
      if (k < n) {
        ru += st.B.transpose() * pi[k];
        rx += st.A.transpose() * pi[k];
      }
      if (k > 0) {
        rx -= pi[k - 1];
        res = std::max(res, rx.cwiseAbs().maxCoeff());
      }
      res = std::max(res, ru.cwiseAbs().maxCoeff());
    }
    return res;
  }

  // True when the Hessian restricted to the dynamics (inequalities ignored)
  // is positive definite, checked by an unconstrained Riccati sweep.
  static bool reduced_hessian_positive_definite(const Qp& qp) {
    const int n = qp.horizon();
    MatXX p = qp.stages[n].Q;
    {
      Eigen::LLT<MatUU> llt(qp.stages[n].R);
      if (llt.info() != Eigen::Success) {
        return false;
      }
      p -= qp.stages[n].S.transpose() * llt.solve(qp.stages[n].S);
    }
    for (int k = n - 1; k >= 0; --k) {
      const Stage& st = qp.stages[k];
      const MatUU r_bar = st.R + st.B.transpose() * p * st.B;
      const MatUX s_bar = st.S + st.B.transpose() * p * st.A;
      Eigen::LLT<MatUU> llt(r_bar);
      if (llt.info() != Eigen::Success) {
        return false;
      }
      p = st.Q + st.A.transpose() * p * st.A - s_bar.transpose() * llt.solve(s_bar);
      p = 0.5 * (p + p.transpose()).eval();
    }
    return true;
  }

  static Eigen::VectorXd constraint_value(const Stage& st, const VecX& x, const VecU& u) {
    if (st.num_constraints() == 0) {
      return Eigen::VectorXd();
    }
    return st.Cx * x + st.Cu * u - st.lower;
  }

 private:
  // Nonzeros of [Cx Cu] row by row; column j < NX refers to x, otherwise to u.
  struct SparseRows {
    std::vector<int> start;
    std::vector<int> col;
    std::vector<double> val;
  };

  static void compress(const Stage& st, SparseRows& rows) {
    rows.start.assign(1, 0);
    rows.col.clear();
    rows.val.clear();
    for (int i = 0; i < st.num_constraints(); ++i) {
      for (int j = 0; j < NX; ++j) {
        if (st.Cx(i, j) != 0.0) {
          rows.col.push_back(j);
          rows.val.push_back(st.Cx(i, j));
        }
      }
      for (int j = 0; j < NU; ++j) {
        if (st.Cu(i, j) != 0.0) {
          rows.col.push_back(NX + j);
          rows.val.push_back(st.Cu(i, j));
        }
      }
      rows.start.push_back(static_cast<int>(rows.col.size()));
    }
  }

  // Cx x + Cu u - lower.
  static Eigen::VectorXd sparse_value(const SparseRows& rows, const Stage& st, const VecX& x,
                                      const VecU& u) {
    Eigen::VectorXd g = -st.lower;
    sparse_product(rows, x, u, g);
    return g;
  }

  // g += Cx x + Cu u.
  static void sparse_product(const SparseRows& rows, const VecX& x, const VecU& u,
                             Eigen::VectorXd& g) {
    for (std::size_t i = 0; i + 1 < rows.start.size(); ++i) {
      double acc = 0.0;
      for (int p = rows.start[i]; p < rows.start[i + 1]; ++p) {
        const int j = rows.col[p];
        acc += rows.val[p] * (j < NX ? x(j) : u(j - NX));
      }
      g(i) += acc;
    }
  }

  // vx += Cx' y, vu += Cu' y.
  static void sparse_transpose_product(const SparseRows& rows, const Eigen::VectorXd& y, VecX& vx,
                                       VecU& vu) {
    for (std::size_t i = 0; i + 1 < rows.start.size(); ++i) {
      for (int p = rows.start[i]; p < rows.start[i + 1]; ++p) {
        const int j = rows.col[p];
        if (j < NX) {
          vx(j) += rows.val[p] * y(i);
        } else {
          vu(j - NX) += rows.val[p] * y(i);
        }
      }
    }
  }

  // [Q S'; S R] += C' diag(w) C restricted to the blocks.
  static void sparse_gram(const SparseRows& rows, const Eigen::VectorXd& w, MatXX& q, MatUX& s,
                          MatUU& r) {
    for (std::size_t i = 0; i + 1 < rows.start.size(); ++i) {
      for (int a = rows.start[i]; a < rows.start[i + 1]; ++a) {
        const int ja = rows.col[a];
        const double wa = w(i) * rows.val[a];
        for (int b = rows.start[i]; b < rows.start[i + 1]; ++b) {
          const int jb = rows.col[b];
          const double v = wa * rows.val[b];
          if (ja < NX && jb < NX) {
            q(ja, jb) += v;
          } else if (ja >= NX && jb < NX) {
            s(ja - NX, jb) += v;
          } else if (ja >= NX && jb >= NX) {
            r(ja - NX, jb - NX) += v;
          }
        }
      }
    }
  }

  void resize(int n) {
    rows_.resize(n + 1);
    p_.resize(n + 1);
    pvec_.resize(n + 1);
    k_gain_.resize(n + 1);
    k_ff_.resize(n + 1);
    s_bar_.resize(n + 1);
    chol_.resize(n + 1);
    dx_.assign(n + 1, VecX::Zero());
    du_.assign(n + 1, VecU::Zero());
    pi_new_.assign(n, VecX::Zero());
    dt_.resize(n + 1);
    dl_.resize(n + 1);
    rc_.resize(n + 1);
    rg_.resize(n + 1);
    rdyn_.resize(n);
  }

  void compute_residuals(const Qp& qp, Solution& sol) {
    const int n = qp.horizon();
    double feas = 0.0;
    for (int k = 0; k < n; ++k) {
      const Stage& st = qp.stages[k];
      rdyn_[k] = st.A * sol.x[k] + st.B * sol.u[k] + st.b - sol.x[k + 1];
      feas = std::max(feas, rdyn_[k].cwiseAbs().maxCoeff());
    }
    for (int k = 0; k <= n; ++k) {
      rg_[k] = sparse_value(rows_[k], qp.stages[k], sol.x[k], sol.u[k]) - sol.slack[k];
      if (rg_[k].size() > 0) {
        feas = std::max(feas, rg_[k].cwiseAbs().maxCoeff());
      }
    }
    sol.feasibility = feas;
    double res = 0.0;
    for (int k = 0; k <= n; ++k) {
      const Stage& st = qp.stages[k];
      VecU ru = st.R * sol.u[k] + st.S * sol.x[k] + st.r;
      VecX rx = st.Q * sol.x[k] + st.S.transpose() * sol.u[k] + st.q;
      if (st.num_constraints() > 0) {
        sparse_transpose_product(rows_[k], -sol.lambda[k], rx, ru);
      }
      if (k < n) {
        ru.noalias() += st.B.transpose() * sol.pi[k];
        rx.noalias() += st.A.transpose() * sol.pi[k];
      }
      if (k > 0) {
        rx -= sol.pi[k - 1];
        res = std::max(res, rx.cwiseAbs().maxCoeff());
      }
      res = std::max(res, ru.cwiseAbs().maxCoeff());
    }
    sol.stationarity = res;
  }

  static double complementarity(const Solution& sol) {
    double c = 0.0;
    for (std::size_t k = 0; k < sol.slack.size(); ++k) {
      c += sol.slack[k].dot(sol.lambda[k]);
    }
    return c;
  }

  // Backward Riccati factorisation of the barrier-augmented Hessian.
  void factorize(const Qp& qp, const Solution& sol, double& reg_used) {
    const int n = qp.horizon();
    for (int k = n; k >= 0; --k) {
      const Stage& st = qp.stages[k];
      MatXX q_bar = st.Q;
      MatUX s_bar = st.S;
      MatUU r_bar = st.R;
      if (st.num_constraints() > 0) {
        const Eigen::VectorXd w = sol.lambda[k].cwiseQuotient(sol.slack[k]);
        sparse_gram(rows_[k], w, q_bar, s_bar, r_bar);
      }
      if (k < n) {
        const auto pb = (p_[k + 1] * st.B).eval();
        const auto pa = (p_[k + 1] * st.A).eval();
        r_bar.noalias() += st.B.transpose() * pb;
        s_bar.noalias() += st.B.transpose() * pa;
        q_bar.noalias() += st.A.transpose() * pa;
      }
      chol_[k].compute(r_bar);
      double reg = options_.initial_regularization;
      while (chol_[k].info() != Eigen::Success) {
        if (reg > 1e12) {
          throw std::runtime_error("structured QP: Hessian factorisation failed");
        }
        chol_[k].compute(r_bar + reg * MatUU::Identity());
        reg_used = std::max(reg_used, reg);
        reg *= 2.0;
      }
      s_bar_[k] = s_bar;
      k_gain_[k] = -chol_[k].solve(s_bar);
      p_[k] = q_bar + s_bar.transpose() * k_gain_[k];
      p_[k] = 0.5 * (p_[k] + p_[k].transpose()).eval();
    }
  }

  // Solves the reduced Newton system for the current right-hand side rc_.
  void newton_direction(const Qp& qp, const Solution& sol) {
    const int n = qp.horizon();
    for (int k = n; k >= 0; --k) {
      const Stage& st = qp.stages[k];
      // Linear term of the reduced step problem.
      VecU r_lin = st.R * sol.u[k] + st.S * sol.x[k] + st.r;
      VecX q_lin = st.Q * sol.x[k] + st.S.transpose() * sol.u[k] + st.q;
      if (st.num_constraints() > 0) {
        const Eigen::VectorXd y =
            (sol.lambda[k].cwiseProduct(rg_[k]) + rc_[k]).cwiseQuotient(sol.slack[k]) - sol.lambda[k];
        sparse_transpose_product(rows_[k], y, q_lin, r_lin);
      }
      if (k < n) {
        const VecX v = p_[k + 1] * rdyn_[k] + pvec_[k + 1];
        r_lin.noalias() += st.B.transpose() * v;
        q_lin.noalias() += st.A.transpose() * v;
      }
      k_ff_[k] = -chol_[k].solve(r_lin);
      pvec_[k] = q_lin + s_bar_[k].transpose() * k_ff_[k];
    }

    dx_[0].setZero();
    for (int k = 0; k <= n; ++k) {
      const Stage& st = qp.stages[k];
      du_[k] = k_gain_[k] * dx_[k] + k_ff_[k];
      if (k < n) {
        dx_[k + 1] = st.A * dx_[k] + st.B * du_[k] + rdyn_[k];
        pi_new_[k] = p_[k + 1] * dx_[k + 1] + pvec_[k + 1];
      }
      if (st.num_constraints() > 0) {
        dt_[k] = rg_[k];
        sparse_product(rows_[k], dx_[k], du_[k], dt_[k]);
        dl_[k] = -(rc_[k] + sol.lambda[k].cwiseProduct(dt_[k])).cwiseQuotient(sol.slack[k]);
      } else {
        dt_[k].resize(0);
        dl_[k].resize(0);
      }
    }
  }

  double max_step(const Solution& sol, double fraction) const {
    double alpha = 1.0;
    for (std::size_t k = 0; k < sol.slack.size(); ++k) {
      for (Eigen::Index i = 0; i < sol.slack[k].size(); ++i) {
        if (dt_[k](i) < 0.0) {
          alpha = std::min(alpha, -fraction * sol.slack[k](i) / dt_[k](i));
        }
        if (dl_[k](i) < 0.0) {
          alpha = std::min(alpha, -fraction * sol.lambda[k](i) / dl_[k](i));
        }
      }
    }
    return alpha;
  }

  IpmOptions options_;
  std::vector<SparseRows> rows_;
  std::vector<MatXX> p_;
  std::vector<VecX> pvec_;
  std::vector<MatUX> k_gain_;
  std::vector<VecU> k_ff_;
  std::vector<MatUX> s_bar_;
  std::vector<Eigen::LLT<MatUU>> chol_;
  std::vector<VecX> dx_;
  std::vector<VecU> du_;
  std::vector<VecX> pi_new_;
  std::vector<Eigen::VectorXd> dt_;
  std::vector<Eigen::VectorXd> dl_;
  std::vector<Eigen::VectorXd> rc_;
  std::vector<Eigen::VectorXd> rg_;
  std::vector<VecX> rdyn_;
};

}  // namespace coopdock::qp
