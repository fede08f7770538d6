#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace t3cbf::qp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// minimise  sum_j w_u[j] (u_j - u_ref_j)^2 + sum_k w_delta[k] delta_k^2
/// subject to  a_k . u - delta_k >= lb_k   (delta_k == 0 for rows with w_delta[k] == 0)
///             lo <= u <= hi
struct QpProblem {
    VectorXd u_ref;
    VectorXd w_u;
    MatrixXd a;  ///< one row per constraint
    VectorXd lb;
    VectorXd w_delta;  ///< 0 marks a hard row
    VectorXd lo;
    VectorXd hi;

    int variables() const { return static_cast<int>(u_ref.size()); }
    int rows() const { return static_cast<int>(lb.size()); }

    /// Empty problem over n variables with unit weights and infinite bounds.
    static QpProblem unconstrained(const VectorXd& u_ref);
    void add_row(const Eigen::Ref<const VectorXd>& coeffs, double lower, double slack_weight);

    /// Throws std::invalid_argument on size mismatch, non-positive weights,
    /// non-finite data or lo > hi.
    void validate() const;
};

enum class QpStatus : std::uint8_t { Optimal, IterationLimit, Infeasible };

struct QpSolution {
    VectorXd u;
    VectorXd delta;
    /// Multipliers for rows, then lower bounds, then upper bounds.
    VectorXd multipliers;
    QpStatus status = QpStatus::Optimal;
    double kkt_residual = 0.0;
    double objective = 0.0;
    int iterations = 0;
    /// Working-set indices (same numbering as `multipliers`) for warm starts.
    std::vector<int> active;
};

struct QpOptions {
    int max_iterations = 500;
};

/// Dense dual active-set method (Goldfarb-Idnani) starting from the
/// unconstrained minimiser. A previous solution's working set may be passed
/// as a warm start; the optimum does not depend on it beyond round-off.
QpSolution solve_qp(const QpProblem& problem, const QpSolution* warm = nullptr, const QpOptions& options = {});

struct KktReport {
    double stationarity = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double complementarity = 0.0;
    double max() const;
};

/// KKT residuals of (u, delta, multipliers), each scaled by the problem's
/// magnitude so the numbers are comparable across problems.
KktReport kkt_residuals(const QpProblem& problem, const VectorXd& u, const VectorXd& delta,
                        const VectorXd& multipliers);

double objective(const QpProblem& problem, const VectorXd& u, const VectorXd& delta);

}  // namespace t3cbf::qp
