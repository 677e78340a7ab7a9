#include "loadid/identify.hpp"

#include <cmath>
#include <random>

#include "loadid/error.hpp"
#include "loadid/optimize.hpp"

namespace loadid::pem {

ParameterBounds ParameterBounds::around(const LoadParameters& init, double scale) {
    if (!(scale > 1.0)) throw ValidationError("bounds scale must exceed 1");
    ParameterBounds b{init, init};
    for (int i = 0; i < LoadParameters::kCount; ++i) {
        const double v = init.get(i);
        double lo = 0.0;
        double hi = 0.0;
        if (v > 0.0) {
            lo = v / scale;
            hi = v * scale;
        } else if (v < 0.0) {
            lo = v * scale;
            hi = v / scale;
        } else {
            lo = -1.0;
            hi = 1.0;
        }
        b.lower.set(i, lo);
        b.upper.set(i, hi);
    }
    b.lower.s0 = 1e-4;
    b.upper.s0 = 0.5;
    return b;
}

IdentData IdentData::from_series(const sim::MeasurementSeries& s) {
    if (!s.detrended) throw ValidationError("identification needs a detrended series");
    if (s.rows() == 0) throw ValidationError("identification needs a non-empty series");
    IdentData d;
    d.u = s.inputs();
    d.y = s.outputs();
    d.v0 = s.means[sim::MeasurementSeries::V];
    d.ts = s.ts;
    return d;
}

LoadParameters with_operating_point(LoadParameters p, const IdentData& d) {
    p.V0 = d.v0;
    p.theta0 = 0.0;
    return p;
}

Prediction evaluate_predictor(const LoadParameters& p, const NoiseConfig& noise, const IdentData& d,
                              bool output_error) {
    const GreyBoxDiscrete disc = discretize_zoh(assemble_continuous(with_operating_point(p, d), noise), d.ts);
    if (output_error) {
        const InnovationPredictor pred = open_loop_predictor(disc);
        if (!(pred.spectral_radius < 1.0)) throw ConvergenceError("model is unstable; output-error simulation diverges");
        return predict(pred, disc, d.u, d.y);
    }
    return predict(solve_dare(disc, noise), disc, d.u, d.y);
}

Eigen::MatrixXd simulate_model(const LoadParameters& p, const IdentData& d) {
    const GreyBoxDiscrete disc = discretize_zoh(assemble_continuous(with_operating_point(p, d), NoiseConfig{}), d.ts);
    return predict(open_loop_predictor(disc), disc, d.u, d.y).yhat;
}

Eigen::Vector2d fit_percent(const Eigen::MatrixXd& y, const Eigen::MatrixXd& yhat, int burn_in) {
    if (y.rows() != yhat.rows() || y.cols() != 2 || yhat.cols() != 2) throw ValidationError("fit shape mismatch");
    const Eigen::Index n = y.rows() - burn_in;
    if (n <= 0) throw ValidationError("fit needs samples after the burn-in");
    Eigen::Vector2d out;
    for (int c = 0; c < 2; ++c) {
        const Eigen::VectorXd yc = y.col(c).tail(n);
        const Eigen::VectorXd ec = yc - yhat.col(c).tail(n);
        const double den = (yc.array() - yc.mean()).matrix().norm();
        out[c] = den > 0.0 ? 100.0 * (1.0 - ec.norm() / den) : (ec.norm() == 0.0 ? 100.0 : -INFINITY);
    }
    return out;
}

namespace {

IdentResult run(const IdentData& data, const LoadParameters& init, const ParameterBounds& bounds,
                const NoiseConfig& noise, const IdentOptions& opt, bool output_error) {
    if (data.u.rows() != data.y.rows() || data.u.cols() != 2 || data.y.cols() != 2) {
        throw ValidationError("identification data must be N x 2 inputs and outputs");
    }
    if (data.u.rows() <= opt.burn_in) throw ValidationError("record shorter than the burn-in");
    if (!output_error) noise.validate();
    std::vector<int> idx;
    for (const auto& name : opt.free) idx.push_back(LoadParameters::index_of(name));
    if (idx.empty()) throw ValidationError("no free parameters");
    const int n = static_cast<int>(idx.size());

    Eigen::VectorXd scale(n), z0(n), lo(n), hi(n);
    for (int k = 0; k < n; ++k) {
        const double v = init.get(idx[k]);
        scale[k] = v != 0.0 ? std::abs(v) : 1.0;
        z0[k] = v / scale[k];
        lo[k] = bounds.lower.get(idx[k]) / scale[k];
        hi[k] = bounds.upper.get(idx[k]) / scale[k];
        if (!(lo[k] < hi[k])) throw ValidationError(std::string("empty bounds for ") + LoadParameters::kNames[idx[k]]);
        if (z0[k] < lo[k] || z0[k] > hi[k]) {
            throw ValidationError(std::string("initial value outside bounds for ") + LoadParameters::kNames[idx[k]]);
        }
    }
    auto to_params = [&](const Eigen::VectorXd& z) {
        LoadParameters p = init;
        for (int k = 0; k < n; ++k) p.set(idx[k], z[k] * scale[k]);
        return p;
    };
    const double norm = 1.0 / std::sqrt(static_cast<double>(data.u.rows() - opt.burn_in));
    opt::ResidualFn fn = [&](const Eigen::VectorXd& z, Eigen::VectorXd& r) {
        try {
            const Prediction pr = evaluate_predictor(to_params(z), noise, data, output_error);
            const Eigen::MatrixXd e = pr.eps.bottomRows(pr.eps.rows() - opt.burn_in);
            r.resize(e.size());
            Eigen::Map<Eigen::MatrixXd>(r.data(), e.rows(), e.cols()) = e * norm;
            return r.allFinite();
        } catch (const Error&) {
            return false;
        }
    };

    IdentResult res;
    res.label = opt.label;
    res.method = output_error ? "output-error" : "pem";
    res.channel = noise.channel;
    res.initial = with_operating_point(init, data);
    {
        Eigen::VectorXd r;
        res.initial_loss = fn(z0, r) ? r.squaredNorm() : std::numeric_limits<double>::infinity();
    }

    opt::LmOptions lm;
    lm.max_iterations = opt.max_iterations;
    lm.rel_step = opt.rel_step;
    std::mt19937_64 rng(opt.restart_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    bool done = false;
    for (int start = 0; start <= opt.restarts && !done; ++start) {
        Eigen::VectorXd zs = z0;
        if (start > 0) {
            // Log-uniform magnitude within the bounds, sign from the bounds.
            for (int k = 0; k < n; ++k) {
                const double a = lo[k] * scale[k];
                const double b = hi[k] * scale[k];
                const double w = unit(rng);
                double v = 0.0;
                if (a > 0.0) {
                    v = std::exp(std::log(a) + w * (std::log(b) - std::log(a)));
                } else if (b < 0.0) {
                    v = -std::exp(std::log(-b) + w * (std::log(-a) - std::log(-b)));
                } else {
                    v = a + w * (b - a);
                }
                zs[k] = v / scale[k];
            }
        }
        try {
            const opt::LmResult r = opt::minimize_bounded_lm(fn, zs, lo, hi, lm);
            res.estimate = with_operating_point(to_params(r.x), data);
            res.loss = r.cost;
            res.trace = r.trace;
            res.trace.insert(res.trace.begin(), r.initial_cost);
            res.converged = r.converged;
            res.status = r.status;
            res.start_index = start;
            res.evaluations += r.evaluations;
            res.restart_log.push_back("start " + std::to_string(start) + ": " + r.status + ", loss " +
                                      std::to_string(r.cost));
            for (int k = 0; k < n; ++k) {
                const double tol = 1e-9 * (1.0 + std::abs(r.x[k]));
                if (r.x[k] - lo[k] <= tol || hi[k] - r.x[k] <= tol) {
                    res.at_bound.emplace_back(LoadParameters::kNames[idx[k]]);
                }
            }
            done = true;
        } catch (const IdentificationError& e) {
            res.restart_log.push_back("start " + std::to_string(start) + ": failed (" + e.what() + ")");
        }
    }
    if (!done) {
        std::string log;
        for (const auto& l : res.restart_log) log += "\n  " + l;
        throw IdentificationError("all starts failed (Riccati/stability):" + log);
    }
    const Prediction pr = evaluate_predictor(res.estimate, noise, data, output_error);
    res.fit = fit_percent(data.y, pr.yhat, opt.burn_in);
    return res;
}

}  // namespace

IdentResult identify(const IdentData& data, const LoadParameters& init, const ParameterBounds& bounds,
                     const NoiseConfig& noise, const IdentOptions& opt) {
    return run(data, init, bounds, noise, opt, false);
}

IdentResult identify_output_error(const IdentData& data, const LoadParameters& init, const ParameterBounds& bounds,
                                  const IdentOptions& opt) {
    return run(data, init, bounds, NoiseConfig{}, opt, true);
}

}  // namespace loadid::pem
