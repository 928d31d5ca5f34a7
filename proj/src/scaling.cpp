#include "spectron/scaling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace spectron {

RunPoint RunPoint::from_nd(double n_params, double tokens, double loss) {
    if (!(n_params > 0.0) || !(tokens > 0.0) || !(loss > 0.0))
        throw std::invalid_argument("run point: n_params, tokens, loss must be positive");
    RunPoint p;
    p.n_params = n_params;
    p.tokens = tokens;
    p.flops = 6.0 * n_params * tokens;
    p.loss = loss;
    return p;
}

IsoflopCurve isoflop_fit(double budget,
                         const std::vector<std::pair<double, double>>& samples) {
    std::vector<double> distinct;
    for (const auto& [n, loss] : samples) {
        if (!(n > 0.0) || !std::isfinite(loss))
            throw std::runtime_error("isoflop fit at budget " + std::to_string(budget) +
                                     ": samples must have positive N and finite loss");
        distinct.push_back(n);
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3)
        throw std::runtime_error("isoflop fit at budget " + std::to_string(budget) + ": needs >= 3 distinct model sizes, got " +
                                 std::to_string(distinct.size()));

    // Normal equations for loss ~ qa*x^2 + qb*x + qc, x = ln N.
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    double t0 = 0, t1 = 0, t2 = 0;
    for (const auto& [n, loss] : samples) {
        const double x = std::log(n);
        const double x2 = x * x;
        s0 += 1.0;
        s1 += x;
        s2 += x2;
        s3 += x2 * x;
        s4 += x2 * x2;
        t0 += loss;
        t1 += loss * x;
        t2 += loss * x2;
    }
    // Solve [s4 s3 s2; s3 s2 s1; s2 s1 s0] * [qa qb qc]^T = [t2 t1 t0]^T.
    const double det = s4 * (s2 * s0 - s1 * s1) - s3 * (s3 * s0 - s1 * s2) +
                       s2 * (s3 * s1 - s2 * s2);
    if (!(std::fabs(det) > 0.0) || !std::isfinite(det))
        throw std::runtime_error("isoflop fit at budget " + std::to_string(budget) +
                                 ": singular quadratic system");
    const double qa = (t2 * (s2 * s0 - s1 * s1) - s3 * (t1 * s0 - t0 * s1) +
                       s2 * (t1 * s1 - t0 * s2)) /
                      det;
    const double qb = (s4 * (t1 * s0 - t0 * s1) - t2 * (s3 * s0 - s1 * s2) +
                       s2 * (s3 * t0 - s2 * t1)) /
                      det;
    const double qc = (s4 * (s2 * t0 - t1 * s1) - s3 * (s3 * t0 - t1 * s2) +
                       t2 * (s3 * s1 - s2 * s2)) /
                      det;
    if (!(qa > 0.0))
        throw std::runtime_error("isoflop fit at budget " + std::to_string(budget) +
                                 ": concave quadratic (leading coefficient " +
                                 std::to_string(qa) + "), no interior optimum");

    IsoflopCurve curve;
    curve.budget = budget;
    curve.samples = samples;
    curve.qa = qa;
    curve.qb = qb;
    curve.qc = qc;
    const double x_opt = -qb / (2.0 * qa);
    curve.n_opt = std::exp(x_opt);
    curve.loss_min = qc - qb * qb / (4.0 * qa);
    return curve;
}

PowerLaw powerlaw_fit(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 2)
        throw std::invalid_argument("powerlaw fit: needs >= 2 pairs, got " +
                                    std::to_string(pairs.size()));
    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& [c, v] : pairs) {
        if (!(c > 0.0) || !(v > 0.0))
            throw std::invalid_argument("powerlaw fit: inputs must be positive");
        mean_x += std::log(c);
        mean_y += std::log(v);
    }
    mean_x /= static_cast<double>(pairs.size());
    mean_y /= static_cast<double>(pairs.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [c, v] : pairs) {
        const double dx = std::log(c) - mean_x;
        sxx += dx * dx;
        sxy += dx * (std::log(v) - mean_y);
    }
    if (!(sxx > 0.0))
        throw std::invalid_argument("powerlaw fit: all abscissae identical");
    PowerLaw law;
    law.exponent = sxy / sxx;
    law.prefactor = std::exp(mean_y - law.exponent * mean_x);
    return law;
}

double ScalingFit::predict(double n_params, double tokens) const {
    return irreducible + coefA / std::pow(n_params, alpha) + coefB / std::pow(tokens, beta);
}

namespace {

using Theta = std::array<double, 5>; // ln coefA, ln coefB, ln irreducible, alpha, beta

constexpr double kLnCoefLo = -4.605170185988091;  // ln 1e-2
constexpr double kLnCoefHi = 13.815510557964274;  // ln 1e6
constexpr double kExpLo = 1e-3;
constexpr double kExpHi = 2.5;

Theta clamp_box(Theta t) {
    for (int j = 0; j < 3; ++j) t[j] = std::clamp(t[j], kLnCoefLo, kLnCoefHi);
    for (int j = 3; j < 5; ++j) t[j] = std::clamp(t[j], kExpLo, kExpHi);
    return t;
}

double log_sum_exp3(double a, double b, double c) {
    const double hi = std::max(a, std::max(b, c));
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi) + std::exp(c - hi));
}

double huber(double r, double delta) {
    const double a = std::fabs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

struct FitProblem {
    std::vector<double> log_n, log_d, log_l;
    double delta = 1e-3;

    double objective(const Theta& t) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < log_n.size(); ++i) {
            const double pred =
                log_sum_exp3(t[0] - t[3] * log_n[i], t[1] - t[4] * log_d[i], t[2]);
            sum += huber(pred - log_l[i], delta);
        }
        return sum;
    }

    Theta gradient(const Theta& t) const {
        Theta g{};
        for (int j = 0; j < 5; ++j) {
            const double h = 1e-7 * std::max(1.0, std::fabs(t[j]));
            Theta lo = t, hi = t;
            lo[j] -= h;
            hi[j] += h;
            g[j] = (objective(hi) - objective(lo)) / (2.0 * h);
        }
        return g;
    }
};

struct StartResult {
    Theta theta{};
    double objective = 0.0;
    bool converged = false;
    std::vector<double> trace;
};

StartResult run_start(const FitProblem& problem, Theta theta) {
    theta = clamp_box(theta);
    StartResult res;
    double f = problem.objective(theta);
    res.trace.push_back(f);

    // BFGS on the inverse Hessian with backtracking line search; the box is
    // enforced by clamping candidates and resetting curvature on contact.
    std::array<std::array<double, 5>, 5> h_inv{};
    auto reset_h = [&] {
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) h_inv[i][j] = i == j ? 1.0 : 0.0;
    };
    reset_h();

    Theta g = problem.gradient(theta);
    for (int iter = 0; iter < 300; ++iter) {
        double g_norm = 0.0;
        for (double v : g) g_norm = std::max(g_norm, std::fabs(v));
        if (g_norm < 1e-10 * std::max(1.0, std::fabs(f))) {
            res.converged = true;
            break;
        }

        Theta dir{};
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) dir[i] -= h_inv[i][j] * g[j];
        double slope = 0.0;
        for (int i = 0; i < 5; ++i) slope += dir[i] * g[i];
        if (!(slope < 0.0)) { // not a descent direction: restart steepest
            reset_h();
            for (int i = 0; i < 5; ++i) dir[i] = -g[i];
            slope = 0.0;
            for (int i = 0; i < 5; ++i) slope += dir[i] * g[i];
        }

        double t_step = 1.0;
        bool accepted = false;
        Theta next{};
        double f_next = 0.0;
        for (int ls = 0; ls < 50; ++ls) {
            Theta cand = theta;
            for (int i = 0; i < 5; ++i) cand[i] += t_step * dir[i];
            cand = clamp_box(cand);
            const double f_cand = problem.objective(cand);
            const bool armijo = f_cand <= f + 1e-4 * t_step * slope;
            if (armijo || f_cand < f - 1e-18) {
                next = cand;
                f_next = f_cand;
                accepted = true;
                break;
            }
            t_step *= 0.5;
        }
        if (!accepted) {
            // No improving step along the model direction: local stationarity.
            res.converged = g_norm < 1e-5 * std::max(1.0, std::fabs(f));
            break;
        }

        Theta g_next = problem.gradient(next);
        Theta s{}, y{};
        double sy = 0.0, step_size = 0.0;
        for (int i = 0; i < 5; ++i) {
            s[i] = next[i] - theta[i];
            y[i] = g_next[i] - g[i];
            sy += s[i] * y[i];
            step_size = std::max(step_size, std::fabs(s[i]));
        }
        const double f_drop = f - f_next;
        theta = next;
        f = f_next;
        g = g_next;
        res.trace.push_back(f);

        if (sy > 1e-12) {
            // Standard BFGS inverse update.
            std::array<double, 5> hy{};
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) hy[i] += h_inv[i][j] * y[j];
            double yhy = 0.0;
            for (int i = 0; i < 5; ++i) yhy += y[i] * hy[i];
            const double c1 = (sy + yhy) / (sy * sy);
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j)
                    h_inv[i][j] += c1 * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
        } else {
            reset_h();
        }

        if (step_size < 1e-13 || f_drop < 1e-15 * (1.0 + std::fabs(f))) {
            res.converged = true;
            break;
        }
    }
    res.theta = theta;
    res.objective = f;
    return res;
}

} // namespace

ScalingFit parametric_fit(const std::vector<RunPoint>& points, std::vector<FitTrace>* traces) {
    if (points.size() < 6)
        throw std::invalid_argument("parametric fit: needs >= 6 points, got " +
                                    std::to_string(points.size()));
    for (const RunPoint& p : points)
        if (!(p.n_params > 0.0) || !(p.tokens > 0.0) || !(p.loss > 0.0) || !(p.flops > 0.0))
            throw std::invalid_argument("parametric fit: points must be positive");

    std::vector<double> budgets;
    for (const RunPoint& p : points) budgets.push_back(p.flops);
    std::sort(budgets.begin(), budgets.end());
    std::size_t distinct_budgets = 1;
    for (std::size_t i = 1; i < budgets.size(); ++i)
        if (budgets[i] > budgets[i - 1] * (1.0 + 1e-6)) ++distinct_budgets;
    if (distinct_budgets < 2)
        throw std::invalid_argument("parametric fit: needs points from >= 2 compute budgets");

    // Canonical order, so permuting the input cannot change the result.
    std::vector<RunPoint> sorted = points;
    std::sort(sorted.begin(), sorted.end(), [](const RunPoint& x, const RunPoint& y) {
        if (x.n_params != y.n_params) return x.n_params < y.n_params;
        if (x.tokens != y.tokens) return x.tokens < y.tokens;
        return x.loss < y.loss;
    });

    FitProblem problem;
    for (const RunPoint& p : sorted) {
        problem.log_n.push_back(std::log(p.n_params));
        problem.log_d.push_back(std::log(p.tokens));
        problem.log_l.push_back(std::log(p.loss));
    }

    const double exp_grid[] = {0.1, 0.3, 0.5, 0.8};
    const double ln_e_grid[] = {0.0, 0.5, 1.0};
    const double ln_coef_grid[] = {2.0, 5.0, 8.0};

    bool have_best = false;
    StartResult best;
    double best_residual_any = 0.0;
    std::size_t start_index = 0;
    for (double a : exp_grid)
        for (double b : exp_grid)
            for (double ln_e : ln_e_grid)
                for (double ln_c : ln_coef_grid) {
                    StartResult res = run_start(problem, Theta{ln_c, ln_c, ln_e, a, b});
                    if (traces != nullptr)
                        traces->push_back(FitTrace{start_index, res.trace});
                    if (start_index == 0 || res.objective < best_residual_any)
                        best_residual_any = res.objective;
                    // Strict < keeps the earliest start on objective ties.
                    if (res.converged && (!have_best || res.objective < best.objective)) {
                        best = res;
                        have_best = true;
                    }
                    ++start_index;
                }

    if (!have_best)
        throw std::runtime_error(
            "parametric fit: no start converged; best residual objective " +
            std::to_string(best_residual_any));

    ScalingFit fit;
    fit.coefA = std::exp(best.theta[0]);
    fit.coefB = std::exp(best.theta[1]);
    fit.irreducible = std::exp(best.theta[2]);
    fit.alpha = best.theta[3];
    fit.beta = best.theta[4];
    fit.huber_delta = problem.delta;
    fit.objective = best.objective;
    fit.on_boundary = best.theta[0] == kLnCoefLo || best.theta[0] == kLnCoefHi ||
                      best.theta[1] == kLnCoefLo || best.theta[1] == kLnCoefHi ||
                      best.theta[2] == kLnCoefLo || best.theta[2] == kLnCoefHi ||
                      best.theta[3] == kExpLo || best.theta[3] == kExpHi ||
                      best.theta[4] == kExpLo || best.theta[4] == kExpHi;
    return fit;
}

OptimalAllocation compute_optimal(double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw std::invalid_argument("compute_optimal: alpha and beta must be positive");
    OptimalAllocation alloc;
    alloc.a_n = beta / (alpha + beta);
    alloc.a_d = 1.0 - alloc.a_n;
    return alloc;
}

double inference_savings(double flops) {
    if (!(flops >= 1.0))
        throw std::invalid_argument("inference_savings: flops must be >= 1");
    return (1.0 - std::pow(flops, -0.011)) * 100.0;
}

} // namespace spectron
