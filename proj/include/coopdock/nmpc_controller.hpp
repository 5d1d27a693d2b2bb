#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "coopdock/nmpc_problem.hpp"

namespace coopdock {

enum class SolveStatus {
  Optimal,     // KKT and feasibility within tolerance, collision slack inactive
  Relaxed,     // converged, but only with a positive collision slack
  MaxIter,     // iteration cap or time budget reached; last iterate returned
  Infeasible,  // the relaxed problem could not be solved
  NotSolved    // no solve attempted (bookkeeping rows of a run log)
};

std::string_view to_string(SolveStatus status);
std::optional<SolveStatus> solve_status_from_string(std::string_view text);

struct MpcSolution {
  std::vector<Vec8> u_seq;         // N inputs
  std::vector<JointState> q_pred;  // N + 1 states, q_pred[0] = q_k
  std::vector<double> slack;       // N + 1 collision slacks
  double cost = 0.0;
  SolveStatus status = SolveStatus::NotSolved;
  double kkt_residual = 0.0;
  double max_constraint_violation = 0.0;
  double max_slack = 0.0;
  double solve_time = 0.0;  // s, wall clock
  int iterations = 0;
  int qp_iterations = 0;

  Vec8 first_input() const { return u_seq.front(); }
};

struct WarmStart {
  std::vector<JointState> q;
  std::vector<Vec8> u;
  std::vector<double> slack;
};

// Per-family maximum violation, all >= 0. Collision is measured on the
// physical distance, ignoring slacks.
struct ResidualReport {
  double initial_condition = 0.0;
  double dynamics = 0.0;
  double input_box = 0.0;
  double rate = 0.0;
  double collision = 0.0;
  double speed = 0.0;

  double max() const;
};

ResidualReport constraint_residuals(const MpcSolution& sol, const NmpcProblem& problem);

// One-step receding-horizon shift of a solution of `problem`.
WarmStart shift_warm_start(const MpcSolution& prev, const NmpcProblem& problem);

// Sequential quadratic programming on the multiple-shooting problem. The QP
// Hessian is the Lagrangian Hessian projected stage by stage onto the PSD
// cone; trial inputs are re-simulated so the L1 merit line search only sees
// inequality violations. QP subproblems go to a structured interior-point
// solver.
class NmpcSolver {
 public:
  MpcSolution solve(const NmpcProblem& problem,
                    const std::optional<WarmStart>& warm_start = std::nullopt) const;
};

// Decision vector of the problem filled from a warm start (or cold start when
// absent); q(0) is pinned to the problem's initial state.
Eigen::VectorXd initial_iterate(const NmpcProblem& problem,
                                const std::optional<WarmStart>& warm_start);

// Forward simulation of an input sequence from q_k under the prediction model.
std::vector<JointState> rollout(const NmpcProblem& problem, const std::vector<Vec8>& u_seq);

}  // namespace coopdock
