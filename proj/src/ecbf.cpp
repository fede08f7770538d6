#include "t3cbf/ecbf.hpp"

#include <cmath>
#include <stdexcept>

namespace t3cbf::safety {

namespace idx = model::idx;

std::string_view kind_name(ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::JointLimit: return "joint_limit";
        case ConstraintKind::BodySSAT: return "body_ssat";
        case ConstraintKind::ToeSuperellipsoid: return "toe_collision";
        case ConstraintKind::Foothold: return "foothold";
        case ConstraintKind::FootHeight: return "foot_height";
        case ConstraintKind::Stability: return "stability";
    }
    return "?";
}

Eigen::Vector2d pole_placement_gains(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("pole placement needs lambda > 0");
    return {lambda * lambda, 2.0 * lambda};
}

StateVector LocalDerivative::dense_gradient() const {
    StateVector g = StateVector::Zero();
    for (int i = 0; i < count; ++i) g[index[static_cast<std::size_t>(i)]] += grad[i];
    return g;
}

model::StateMatrix LocalDerivative::dense_hessian() const {
    model::StateMatrix m = model::StateMatrix::Zero();
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < count; ++j) m(index[static_cast<std::size_t>(i)], index[static_cast<std::size_t>(j)]) += hess(i, j);
    return m;
}

bool LocalDerivative::finite() const {
    return std::isfinite(h) && grad.head(count).allFinite() && hess.topLeftCorner(count, count).allFinite();
}

EcbfRow ecbf_row(const LocalDerivative& d, const RobotState& x, const Eigen::Vector2d& gains) {
    const double c = std::cos(x.yaw()), s = std::sin(x.yaw());
    const double v = x.speed(), w = x.yaw_rate();

    // Per local index: drift f_i, (df/dx f)_i and the single input column
    // feeding (df/dx g)_i with its coefficient.
    LocalVector f = LocalVector::Zero(), ff = LocalVector::Zero();
    EcbfRow row;
    row.h = d.h;
    for (int i = 0; i < d.count; ++i) {
        const int k = d.index[static_cast<std::size_t>(i)];
        int input = -1;
        double coeff = 1.0;
        switch (k) {
            case idx::kPx:
                f[i] = c * v;
                ff[i] = -s * v * w;
                input = idx::kAccel;
                coeff = c;
                break;
            case idx::kPy:
                f[i] = s * v;
                ff[i] = c * v * w;
                input = idx::kAccel;
                coeff = s;
                break;
            case idx::kPz: break;
            case idx::kYaw:
                f[i] = w;
                input = idx::kYawAccel;
                break;
            case idx::kBodyX:
                f[i] = x[idx::kBodyVx];
                input = idx::kBodyAx;
                break;
            case idx::kBodyZ:
                f[i] = x[idx::kBodyVz];
                input = idx::kBodyAz;
                break;
            case idx::kPitch:
                f[i] = x[idx::kPitchRate];
                input = idx::kPitchAccel;
                break;
            default: {
                const int foot = (k - idx::foot_x(0)) / 4;
                const int slot = (k - idx::foot_x(0)) % 4;
                if (k < idx::foot_x(0) || k >= model::kStateDim || slot > 1)
                    throw std::invalid_argument("ecbf_row: local index must be a position state");
                f[i] = x[k + 2];
                input = slot == 0 ? idx::foot_ax(foot) : idx::foot_az(foot);
            }
        }
        if (input >= 0) row.a[input] += d.grad[i] * coeff;
    }
    const auto n = d.count;
    row.hdot = d.grad.head(n).dot(f.head(n));
    const double lf2 = f.head(n).dot(d.hess.topLeftCorner(n, n) * f.head(n)) + d.grad.head(n).dot(ff.head(n));
    row.lb = -lf2 - gains[0] * row.h - gains[1] * row.hdot;
    row.vacuous = row.a.isZero(0.0);
    return row;
}

GenericRow ecbf_row_generic(double h, const Eigen::VectorXd& grad, const Eigen::MatrixXd& hess,
                            const Eigen::VectorXd& f, const Eigen::MatrixXd& dfdx, const Eigen::MatrixXd& g,
                            const Eigen::Vector2d& gains) {
    GenericRow r;
    r.hdot = grad.dot(f);
    r.lf2 = f.dot(hess * f) + grad.dot(dfdx * f);
    r.a = (g.transpose() * (hess * f)) + (dfdx * g).transpose() * grad;
    r.lb = -r.lf2 - gains[0] * h - gains[1] * r.hdot;
    return r;
}

EcbfRow ecbf_row(double h, const StateVector& grad, const model::StateMatrix& hess, const RobotState& x,
                 const Eigen::Vector2d& gains) {
    const GenericRow g = ecbf_row_generic(h, grad, hess, model::drift(x), model::drift_jacobian(x),
                                          model::input_matrix(), gains);
    EcbfRow row;
    row.a = g.a;
    row.lb = g.lb;
    row.h = h;
    row.hdot = g.hdot;
    row.vacuous = row.a.isZero(0.0);
    return row;
}

InputLimits InputLimits::defaults() {
    InputLimits l;
    l.hi = InputVector::Constant(20.0);
    l.hi[idx::kAccel] = 3.0;
    l.hi[idx::kYawAccel] = 6.0;
    l.hi[idx::kBodyAx] = 6.0;
    l.hi[idx::kBodyAz] = 6.0;
    l.hi[idx::kPitchAccel] = 6.0;
    l.lo = -l.hi;
    return l;
}

qp::QpProblem build_problem(const std::vector<EcbfRow>& rows, const RobotInput& u_ref, const FilterConfig& config,
                            bool all_soft) {
    qp::QpProblem p;
    const int m = static_cast<int>(rows.size());
    p.u_ref = u_ref.vec.cwiseMax(config.limits.lo).cwiseMin(config.limits.hi);
    p.w_u = config.w_u;
    p.lo = config.limits.lo;
    p.hi = config.limits.hi;
    p.a.resize(m, model::kInputDim);
    p.lb.resize(m);
    p.w_delta.resize(m);
    for (int k = 0; k < m; ++k) {
        const EcbfRow& r = rows[static_cast<std::size_t>(k)];
        p.a.row(k) = r.a.transpose();
        p.lb[k] = r.lb;
        const bool soft = all_soft || (r.h < config.slack_threshold && !config.hard[static_cast<std::size_t>(r.kind)]);
        p.w_delta[k] = soft ? config.w_delta : 0.0;
    }
    return p;
}

FilterResult SafetyFilter::solve(const std::vector<EcbfRow>& rows, const RobotInput& u_ref) {
    // Vacuous rows constrain nothing the QP can change; drop them.
    std::vector<EcbfRow> live;
    live.reserve(rows.size());
    for (const EcbfRow& r : rows)
        if (!r.vacuous && r.a.allFinite() && std::isfinite(r.lb)) live.push_back(r);

    FilterResult out;
    out.rows = static_cast<int>(live.size());
    const int m = out.rows;

    qp::QpSolution warm;
    const qp::QpSolution* warm_ptr = nullptr;
    if (have_last_) {
        warm.u = last_.u;
        for (int k : last_.active) {
            if (k < last_rows_) {
                if (k < m) warm.active.push_back(k);
            } else {
                warm.active.push_back(k - last_rows_ + m);
            }
        }
        warm_ptr = &warm;
    }

    qp::QpProblem problem = build_problem(live, u_ref, config_);
    qp::QpSolution sol = qp::solve_qp(problem, warm_ptr, config_.qp);
    if (sol.status == qp::QpStatus::Infeasible) {
        problem = build_problem(live, u_ref, config_, true);
        sol = qp::solve_qp(problem, nullptr, config_.qp);
        out.relaxed = true;
    }
    out.soft_rows = static_cast<int>((problem.w_delta.array() > 0.0).count());
    out.status = sol.status;
    out.kkt_residual = sol.kkt_residual;
    out.iterations = sol.iterations;

    if (sol.status == qp::QpStatus::Optimal && sol.u.allFinite()) {
        out.u.vec = sol.u;
        out.delta = sol.delta;
        last_ = std::move(sol);
        last_rows_ = m;
        have_last_ = true;
    } else {
        out.fallback = true;
        out.u.vec = InputVector::Zero().cwiseMax(config_.limits.lo).cwiseMin(config_.limits.hi);
        out.delta = Eigen::VectorXd::Zero(m);
        have_last_ = false;
    }
    return out;
}

}  // namespace t3cbf::safety
