#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "t3cbf/model.hpp"
#include "t3cbf/qp.hpp"

namespace t3cbf::safety {

using model::InputVector;
using model::RobotInput;
using model::RobotState;
using model::StateVector;

enum class ConstraintKind : std::uint8_t { JointLimit, BodySSAT, ToeSuperellipsoid, Foothold, FootHeight, Stability };
inline constexpr int kConstraintKinds = 6;
std::string_view kind_name(ConstraintKind kind);

/// K = [lambda^2, 2 lambda]: both poles of the h dynamics at -lambda.
Eigen::Vector2d pole_placement_gains(double lambda);

inline constexpr int kMaxLocal = 8;
using LocalVector = Eigen::Matrix<double, kMaxLocal, 1>;
using LocalMatrix = Eigen::Matrix<double, kMaxLocal, kMaxLocal>;

/// h with its gradient and Hessian over the few position states it touches.
struct LocalDerivative {
    double h = 0.0;
    int count = 0;
    std::array<int, kMaxLocal> index{};
    LocalVector grad = LocalVector::Zero();
    LocalMatrix hess = LocalMatrix::Zero();

    StateVector dense_gradient() const;
    model::StateMatrix dense_hessian() const;
    bool finite() const;
};

struct EcbfRow {
    InputVector a = InputVector::Zero();  ///< L_g L_f h
    double lb = 0.0;                      ///< -L_f^2 h - K . [h, L_f h]
    double h = 0.0;
    double hdot = 0.0;
    ConstraintKind kind = ConstraintKind::JointLimit;
    std::int16_t leg = -1;
    std::int32_t item = -1;
    bool vacuous = false;
};

/// Row for a relative-degree-2 h of the whole-body model: a . u >= lb.
EcbfRow ecbf_row(const LocalDerivative& d, const RobotState& x, const Eigen::Vector2d& gains);

/// Same row from dense derivatives with respect to the full 36-state.
EcbfRow ecbf_row(double h, const StateVector& grad, const model::StateMatrix& hess, const RobotState& x,
                 const Eigen::Vector2d& gains);

struct GenericRow {
    Eigen::VectorXd a;
    double lb = 0.0;
    double hdot = 0.0;
    double lf2 = 0.0;
};

/// ECBF row for an arbitrary control-affine system x' = f(x) + g(x) u with
/// constant g and drift Jacobian `dfdx`.
GenericRow ecbf_row_generic(double h, const Eigen::VectorXd& grad, const Eigen::MatrixXd& hess,
                            const Eigen::VectorXd& f, const Eigen::MatrixXd& dfdx, const Eigen::MatrixXd& g,
                            const Eigen::Vector2d& gains);

struct InputLimits {
    InputVector lo;
    InputVector hi;
    static InputLimits defaults();
};

struct FilterConfig {
    InputVector w_u = InputVector::Ones();
    double w_delta = 1e4;
    /// Rows with h below this get a slack variable; the rest stay hard.
    double slack_threshold = 0.5;
    /// Kinds that never get a slack on the first solve. They only soften in
    /// the all-soft retry after an infeasible solve.
    std::array<bool, kConstraintKinds> hard{true, true, false, false, false, false};
    InputLimits limits = InputLimits::defaults();
    qp::QpOptions qp;
};

struct FilterResult {
    RobotInput u;
    qp::QpStatus status = qp::QpStatus::Optimal;
    double kkt_residual = 0.0;
    int iterations = 0;
    int rows = 0;
    int soft_rows = 0;
    /// All rows were made soft after the first solve came back infeasible.
    bool relaxed = false;
    /// No usable solution; u is the zero input clipped to the limits.
    bool fallback = false;
    Eigen::VectorXd delta;
};

qp::QpProblem build_problem(const std::vector<EcbfRow>& rows, const RobotInput& u_ref, const FilterConfig& config,
                            bool all_soft = false);

/// Stateful only through the warm start kept from the previous solve.
class SafetyFilter {
public:
    explicit SafetyFilter(FilterConfig config = {}) : config_(std::move(config)) {}

    FilterResult solve(const std::vector<EcbfRow>& rows, const RobotInput& u_ref);
    void reset() { have_last_ = false; }
    const FilterConfig& config() const { return config_; }

private:
    FilterConfig config_;
    qp::QpSolution last_;
    int last_rows_ = 0;
    bool have_last_ = false;
};

}  // namespace t3cbf::safety
