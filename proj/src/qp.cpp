#include "t3cbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace t3cbf::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Working data in z = [u; delta_soft] coordinates with constraints c_k . z >= d_k.
// Indices: rows [0, m), lower bounds [m, m + n), upper bounds [m + n, m + 2n).
struct Solver {
    const QpProblem& prob;
    int n, m, s;
    std::vector<int> slack;  // slack column (offset from n) per row or -1
    VectorXd w;              // diagonal weights over z
    VectorXd hinv;           // 1 / (2 w)
    VectorXd zref;

    Solver(const QpProblem& p, const VectorXd& w_delta)
        : prob(p), n(p.variables()), m(p.rows()), s(0), slack(static_cast<std::size_t>(m), -1) {
        for (int k = 0; k < m; ++k)
            if (w_delta[k] > 0.0) slack[static_cast<std::size_t>(k)] = s++;
        w.resize(n + s);
        w.head(n) = p.w_u;
        for (int k = 0; k < m; ++k)
            if (slack_of(k) >= 0) w[n + slack_of(k)] = w_delta[k];
        hinv = (2.0 * w).cwiseInverse();
        zref = VectorXd::Zero(n + s);
        zref.head(n) = p.u_ref;
    }

    int slack_of(int k) const { return slack[static_cast<std::size_t>(k)]; }
    int total() const { return m + 2 * n; }

    bool present(int k) const {
        if (k < m) return true;
        if (k < m + n) return std::isfinite(prob.lo[k - m]);
        return std::isfinite(prob.hi[k - m - n]);
    }

    double value(int k, const VectorXd& z) const {
        if (k < m) {
            double v = prob.a.row(k).dot(z.head(n)) - prob.lb[k];
            if (slack_of(k) >= 0) v -= z[n + slack_of(k)];
            return v;
        }
        if (k < m + n) return z[k - m] - prob.lo[k - m];
        return prob.hi[k - m - n] - z[k - m - n];
    }

    double dot(int k, const VectorXd& p) const {
        if (k < m) {
            double v = prob.a.row(k).dot(p.head(n));
            if (slack_of(k) >= 0) v -= p[n + slack_of(k)];
            return v;
        }
        if (k < m + n) return p[k - m];
        return -p[k - m - n];
    }

    void add_scaled(int k, double c, VectorXd& out) const {
        if (k < m) {
            out.head(n) += c * prob.a.row(k).transpose();
            if (slack_of(k) >= 0) out[n + slack_of(k)] -= c;
        } else if (k < m + n) {
            out[k - m] += c;
        } else {
            out[k - m - n] -= c;
        }
    }

    // c_k^T H^{-1} c_l
    double schur(int k, int l) const {
        if (k > l) std::swap(k, l);
        if (k < m && l < m) {
            double v = (prob.a.row(k).transpose().cwiseProduct(hinv.head(n))).dot(prob.a.row(l).transpose());
            if (k == l && slack_of(k) >= 0) v += hinv[n + slack_of(k)];
            return v;
        }
        const auto bound = [&](int b, int& j) {
            if (b < m + n) {
                j = b - m;
                return 1.0;
            }
            j = b - m - n;
            return -1.0;
        };
        int j = 0;
        const double sl = bound(l, j);
        if (k < m) return sl * prob.a(k, j) * hinv[j];
        int i = 0;
        const double sk = bound(k, i);
        return i == j ? sk * sl * hinv[j] : 0.0;
    }
};

}  // namespace

QpProblem QpProblem::unconstrained(const VectorXd& u_ref) {
    QpProblem p;
    const auto n = u_ref.size();
    p.u_ref = u_ref;
    p.w_u = VectorXd::Ones(n);
    p.a.resize(0, n);
    p.lb.resize(0);
    p.w_delta.resize(0);
    p.lo = VectorXd::Constant(n, -kInf);
    p.hi = VectorXd::Constant(n, kInf);
    return p;
}

void QpProblem::add_row(const Eigen::Ref<const VectorXd>& coeffs, double lower, double slack_weight) {
    const auto m = a.rows();
    a.conservativeResize(m + 1, u_ref.size());
    a.row(m) = coeffs.transpose();
    lb.conservativeResize(m + 1);
    lb[m] = lower;
    w_delta.conservativeResize(m + 1);
    w_delta[m] = slack_weight;
}

void QpProblem::validate() const {
    const auto n = u_ref.size();
    if (w_u.size() != n || lo.size() != n || hi.size() != n) throw std::invalid_argument("qp: variable size mismatch");
    if (a.cols() != n || a.rows() != lb.size() || w_delta.size() != lb.size())
        throw std::invalid_argument("qp: row size mismatch");
    if (!u_ref.allFinite() || !a.allFinite() || !lb.allFinite() || !w_delta.allFinite())
        throw std::invalid_argument("qp: non-finite data");
    if (!(w_u.array() > 0.0).all() || !w_u.allFinite()) throw std::invalid_argument("qp: weights must be positive");
    if ((w_delta.array() < 0.0).any()) throw std::invalid_argument("qp: slack weights must be non-negative");
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isnan(lo[j]) || std::isnan(hi[j]) || lo[j] > hi[j] || lo[j] == kInf || hi[j] == -kInf)
            throw std::invalid_argument("qp: invalid bounds");
    }
}

double KktReport::max() const { return std::max({stationarity, primal, dual, complementarity}); }

double objective(const QpProblem& p, const VectorXd& u, const VectorXd& delta) {
    return p.w_u.dot((u - p.u_ref).cwiseAbs2()) + p.w_delta.dot(delta.cwiseAbs2());
}

KktReport kkt_residuals(const QpProblem& p, const VectorXd& u, const VectorXd& delta, const VectorXd& mu) {
    const int n = p.variables(), m = p.rows();
    KktReport r;
    const double mu_scale = 1.0 + (mu.size() ? mu.cwiseAbs().maxCoeff() : 0.0);
    const double a_scale = 1.0 + (m ? p.a.cwiseAbs().maxCoeff() : 0.0);
    const double g_scale = 1.0 + (2.0 * p.w_u.cwiseProduct(p.u_ref)).cwiseAbs().maxCoeff() + mu_scale * a_scale;

    VectorXd grad = 2.0 * p.w_u.cwiseProduct(u - p.u_ref);
    for (int k = 0; k < m; ++k) grad -= mu[k] * p.a.row(k).transpose();
    for (int j = 0; j < n; ++j) grad[j] += -mu[m + j] + mu[m + n + j];
    r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() / g_scale : 0.0;
    for (int k = 0; k < m; ++k) {
        if (p.w_delta[k] > 0.0)
            r.stationarity = std::max(r.stationarity, std::abs(2.0 * p.w_delta[k] * delta[k] + mu[k]) / g_scale);
        else if (delta[k] != 0.0)
            r.primal = kInf;
    }

    const double lb_scale = 1.0 + (m ? p.lb.cwiseAbs().maxCoeff() : 0.0) + u.cwiseAbs().maxCoeff() * a_scale;
    const auto check = [&](double slack_value, double multiplier) {
        r.primal = std::max(r.primal, std::max(0.0, -slack_value) / lb_scale);
        r.dual = std::max(r.dual, std::max(0.0, -multiplier) / mu_scale);
        r.complementarity = std::max(r.complementarity, std::abs(slack_value * multiplier) / (lb_scale * mu_scale));
    };
    for (int k = 0; k < m; ++k) check(p.a.row(k).dot(u) - delta[k] - p.lb[k], mu[k]);
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(p.lo[j])) check(u[j] - p.lo[j], mu[m + j]);
        else if (mu[m + j] != 0.0) r.dual = kInf;
        if (std::isfinite(p.hi[j])) check(p.hi[j] - u[j], mu[m + n + j]);
        else if (mu[m + n + j] != 0.0) r.dual = kInf;
    }
    return r;
}

QpSolution solve_qp(const QpProblem& problem, const QpSolution* warm, const QpOptions& options) {
    problem.validate();
    const int n = problem.variables(), m = problem.rows();
    const Solver sv(problem, problem.w_delta);
    const int nz = n + sv.s;
    const int total = sv.total();

    std::vector<int> work;
    std::vector<char> in_work(static_cast<std::size_t>(total), 0);
    VectorXd lambda(0);
    VectorXd z = sv.zref;
    Eigen::MatrixXd S;
    Eigen::LDLT<Eigen::MatrixXd> ldlt;

    const auto at = [&](int a) { return work[static_cast<std::size_t>(a)]; };
    const auto q_size = [&] { return static_cast<int>(work.size()); };
    const auto factor = [&]() -> bool {
        const int q = q_size();
        S.resize(q, q);
        for (int a = 0; a < q; ++a)
            for (int b = 0; b <= a; ++b) S(a, b) = S(b, a) = sv.schur(at(a), at(b));
        ldlt.compute(S);
        if (ldlt.info() != Eigen::Success) return false;
        const VectorXd d = ldlt.vectorD();
        return d.minCoeff() > 1e-14 * std::max(1.0, d.cwiseAbs().maxCoeff());
    };
    const auto hinv_n = [&](const VectorXd& y) {
        VectorXd out = VectorXd::Zero(nz);
        for (int a = 0; a < q_size(); ++a) sv.add_scaled(at(a), y[a], out);
        return VectorXd(sv.hinv.cwiseProduct(out));
    };
    const auto drop_at = [&](int a) {
        in_work[static_cast<std::size_t>(at(a))] = 0;
        work.erase(work.begin() + a);
        const int q = q_size();
        if (a < q) lambda.segment(a, q - a) = lambda.segment(a + 1, q - a).eval();
        lambda.conservativeResize(q);
    };
    const auto clear = [&] {
        for (int k : work) in_work[static_cast<std::size_t>(k)] = 0;
        work.clear();
        lambda.resize(0);
        z = sv.zref;
    };

    if (warm) {
        for (int k : warm->active) {
            if (k < 0 || k >= total || !sv.present(k) || in_work[static_cast<std::size_t>(k)]) continue;
            work.push_back(k);
            in_work[static_cast<std::size_t>(k)] = 1;
        }
        bool ok = false;
        for (int attempt = 0; attempt < 4 && !work.empty(); ++attempt) {
            if (!factor()) break;
            VectorXd rhs(q_size());
            for (int a = 0; a < q_size(); ++a) rhs[a] = -sv.value(at(a), sv.zref);
            lambda = ldlt.solve(rhs);
            if ((lambda.array() >= 0.0).all()) {
                z = sv.zref + hinv_n(lambda);
                ok = true;
                break;
            }
            for (int a = q_size() - 1; a >= 0; --a)
                if (lambda[a] < 0.0) drop_at(a);
        }
        if (!ok) clear();
    }

    QpSolution sol;
    sol.status = QpStatus::IterationLimit;
    int it = 0;
    bool done = false;
    while (!done && it < options.max_iterations) {
        int q = -1;
        double worst = 0.0;
        for (int k = 0; k < total; ++k) {
            if (in_work[static_cast<std::size_t>(k)] || !sv.present(k)) continue;
            const double v = sv.value(k, z);
            const double ref = k < m ? problem.lb[k] : (k < m + n ? problem.lo[k - m] : problem.hi[k - m - n]);
            if (v < -1e-12 * (1.0 + std::abs(ref)) && v < worst) {
                worst = v;
                q = k;
            }
        }
        if (q < 0) {
            sol.status = QpStatus::Optimal;
            break;
        }

        VectorXd hc = VectorXd::Zero(nz);
        sv.add_scaled(q, 1.0, hc);
        hc = sv.hinv.cwiseProduct(hc);
        const double cq_norm = sv.schur(q, q);
        double lam_q = 0.0;
        while (true) {
            if (++it > options.max_iterations) {
                done = true;
                break;
            }
            VectorXd r(q_size());
            if (q_size() > 0) {
                factor();
                for (int a = 0; a < q_size(); ++a) r[a] = sv.dot(at(a), hc);
                r = ldlt.solve(r).eval();
            }
            const VectorXd dz = hc - hinv_n(r);
            const double cdz = sv.dot(q, dz);
            const bool primal = cdz > 1e-12 * cq_norm;
            const double t1 = primal ? -sv.value(q, z) / cdz : kInf;
            double t2 = kInf;
            int blocking = -1;
            for (int a = 0; a < q_size(); ++a) {
                if (r[a] <= 0.0) continue;
                const double t = lambda[a] / r[a];
                if (t < t2) {
                    t2 = t;
                    blocking = a;
                }
            }
            if (!primal && blocking < 0) {
                sol.status = QpStatus::Infeasible;
                done = true;
                break;
            }
            const double t = std::min(t1, t2);
            if (primal) z += t * dz;
            if (q_size() > 0) lambda = (lambda - t * r).cwiseMax(0.0);
            lam_q += t;
            if (primal && t1 <= t2) {
                work.push_back(q);
                in_work[static_cast<std::size_t>(q)] = 1;
                lambda.conservativeResize(q_size());
                lambda[q_size() - 1] = lam_q;
                break;
            }
            drop_at(blocking);
        }
    }
    sol.iterations = it;

    sol.u = z.head(n);
    sol.delta = VectorXd::Zero(m);
    for (int k = 0; k < m; ++k)
        if (sv.slack_of(k) >= 0) sol.delta[k] = z[n + sv.slack_of(k)];
    sol.multipliers = VectorXd::Zero(total);
    for (int a = 0; a < q_size(); ++a) sol.multipliers[at(a)] = lambda[a];
    sol.active = work;
    std::sort(sol.active.begin(), sol.active.end());
    sol.objective = objective(problem, sol.u, sol.delta);
    sol.kkt_residual = kkt_residuals(problem, sol.u, sol.delta, sol.multipliers).max();
    return sol;
}

}  // namespace t3cbf::qp
