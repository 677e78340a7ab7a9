#include "loadid/optimize.hpp"

#include <algorithm>
#include <cmath>

#include "loadid/error.hpp"

namespace loadid::opt {

bool fd_jacobian(const ResidualFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& r0,
                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, double rel_step, Eigen::MatrixXd& jac,
                 int& evaluations) {
    const Eigen::Index n = x.size();
    jac.resize(r0.size(), n);
    Eigen::VectorXd r;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = rel_step * std::max(std::abs(x[i]), 1.0);
        bool ok = false;
        for (double sign : {1.0, -1.0}) {
            Eigen::VectorXd xp = x;
            xp[i] += sign * h;
            if (xp[i] > upper[i] || xp[i] < lower[i]) continue;
            ++evaluations;
            if (f(xp, r) && r.size() == r0.size() && r.allFinite()) {
                jac.col(i) = (r - r0) / (sign * h);
                ok = true;
                break;
            }
        }
        if (!ok) return false;
    }
    return true;
}

LmResult minimize_bounded_lm(const ResidualFn& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const LmOptions& opt) {
    LmResult res;
    Eigen::VectorXd x = x0.cwiseMax(lower).cwiseMin(upper);
    Eigen::VectorXd r;
    ++res.evaluations;
    if (!f(x, r) || !r.allFinite()) throw IdentificationError("objective cannot be evaluated at the start point");
    double cost = r.squaredNorm();
    res.initial_cost = cost;
    double lambda = opt.lambda0;
    double nu = 2.0;
    Eigen::MatrixXd jac;
    bool need_jac = true;
    Eigen::MatrixXd jtj;
    Eigen::VectorXd g;
    res.status = "max-iterations";
    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it + 1;
        if (need_jac) {
            if (!fd_jacobian(f, x, r, lower, upper, opt.rel_step, jac, res.evaluations)) {
                res.status = "jacobian-failed";
                break;
            }
            jtj = jac.transpose() * jac;
            g = jac.transpose() * r;
            need_jac = false;
        }
        // Projected gradient: zero components pushing into an active bound.
        Eigen::VectorXd pg = g;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if ((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)) pg[i] = 0.0;
        }
        if (pg.lpNorm<Eigen::Infinity>() <= opt.gtol * std::max(cost, 1e-300)) {
            res.converged = true;
            res.status = "gradient";
            res.trace.push_back(cost);
            break;
        }
        const Eigen::VectorXd dg = jtj.diagonal().cwiseMax(1e-12 * std::max(jtj.diagonal().maxCoeff(), 1e-300));
        Eigen::MatrixXd lhs = jtj;
        lhs.diagonal() += lambda * dg;
        const Eigen::VectorXd step = lhs.ldlt().solve(-g);
        const Eigen::VectorXd xn = (x + step).cwiseMax(lower).cwiseMin(upper);
        const Eigen::VectorXd dx = xn - x;
        Eigen::VectorXd rn;
        ++res.evaluations;
        const bool ok = step.allFinite() && f(xn, rn) && rn.allFinite();
        const double cost_n = ok ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
        // Gain ratio against the linear model along the projected step.
        const double predicted = cost - (r + jac * dx).squaredNorm();
        const double rho = (predicted > 0.0) ? (cost - cost_n) / predicted : -1.0;
        if (ok && cost_n < cost && rho > 1e-4) {
            const double rel_drop = (cost - cost_n) / std::max(cost, 1e-300);
            const double rel_step = dx.norm() / (x.norm() + 1e-12);
            x = xn;
            r = rn;
            cost = cost_n;
            need_jac = true;
            lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
            nu = 2.0;
            res.trace.push_back(cost);
            if (rel_drop < opt.ftol || rel_step < opt.xtol) {
                res.converged = true;
                res.status = rel_drop < opt.ftol ? "cost-stalled" : "step-small";
                break;
            }
        } else {
            lambda *= nu;
            nu *= 2.0;
            res.trace.push_back(cost);
            if (lambda > 1e16 || dx.norm() < opt.xtol * (x.norm() + 1e-12)) {
                res.converged = true;
                res.status = "trust-region-collapsed";
                break;
            }
        }
    }
    res.x = x;
    res.cost = cost;
    return res;
}

}  // namespace loadid::opt
