#ifndef SPECTRON_SCALING_HPP
#define SPECTRON_SCALING_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace spectron {

/// One training run in the scaling sweep: model size N, token count D,
/// compute C = 6*N*D, final loss L.
struct RunPoint {
    double n_params = 0.0;
    double tokens = 0.0;
    double flops = 0.0;
    double loss = 0.0;

    /// Builds the point with flops derived as 6*N*D. Throws on non-positive
    /// inputs.
    static RunPoint from_nd(double n_params, double tokens, double loss);
};

/// Quadratic-in-ln(N) fit of loss against model size at one compute budget.
struct IsoflopCurve {
    double budget = 0.0;
    std::vector<std::pair<double, double>> samples; ///< (N, loss) as fitted
    double qa = 0.0, qb = 0.0, qc = 0.0;            ///< loss = qa*x^2 + qb*x + qc, x = ln N
    double n_opt = 0.0;   ///< exp(-qb / (2*qa)), the vertex
    double loss_min = 0.0; ///< quadratic value at the vertex
};

/// Least-squares parabola over (ln N, loss). Requires at least 3 distinct N
/// values and a convex fit; otherwise throws std::runtime_error naming the
/// defect and the budget.
IsoflopCurve isoflop_fit(double budget, const std::vector<std::pair<double, double>>& samples);

/// value = prefactor * C^exponent, fitted by ordinary least squares in
/// (ln C, ln value).
struct PowerLaw {
    double exponent = 0.0;
    double prefactor = 0.0;
};

/// Throws std::invalid_argument on fewer than 2 pairs, non-positive
/// entries, or a single distinct abscissa.
PowerLaw powerlaw_fit(const std::vector<std::pair<double, double>>& pairs);

/// Saturating-risk surface L(N, D) = irreducible + coefA/N^alpha + coefB/D^beta.
struct ScalingFit {
    double coefA = 0.0;
    double coefB = 0.0;
    double irreducible = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double huber_delta = 1e-3;
    double objective = 0.0;   ///< final Huber objective of the winning start
    bool on_boundary = false; ///< a coefficient landed on the fit box edge

    double predict(double n_params, double tokens) const;
};

/// Objective values of one local-optimization start, in accepted-iteration
/// order (monotone non-increasing by construction).
struct FitTrace {
    std::size_t start_index = 0;
    std::vector<double> objectives;
};

/// Fits the surface by minimizing sum_i Huber_delta(ln L_pred(N_i, D_i) -
/// ln L_i), the predicted log-loss evaluated through a log-sum-exp of the
/// three terms. Runs a fixed grid of quasi-Newton starts (alpha, beta in
/// {0.1, 0.3, 0.5, 0.8}; ln irreducible in {0, 0.5, 1}; ln coefA = ln coefB
/// in {2, 5, 8}) and returns the best final objective, ties broken by the
/// lower start index. Coefficients live in the box [1e-2, 1e6]; a fit on
/// the box edge sets on_boundary. Point order does not affect the result.
///
/// Requires >= 6 points spanning >= 2 distinct compute budgets. Throws
/// std::invalid_argument on bad input and std::runtime_error (listing the
/// best residual) when no start converges.
ScalingFit parametric_fit(const std::vector<RunPoint>& points,
                          std::vector<FitTrace>* traces = nullptr);

/// Compute-optimal allocation exponents: N_opt ~ C^a_n, D_opt ~ C^a_d.
struct OptimalAllocation {
    double a_n = 0.0;
    double a_d = 0.0;
};

/// a_n = beta/(alpha+beta), a_d = alpha/(alpha+beta); the pair sums to 1
/// exactly (a_d is computed as 1 - a_n). Throws on non-positive inputs.
OptimalAllocation compute_optimal(double alpha, double beta);

/// Estimated inference cost reduction from serving the compute-optimal
/// factorized model: (1 - flops^-0.011) * 100 percent, the exponent being
/// the gap between the two fitted model-size scaling exponents
/// (0.490 - 0.479). Throws when flops < 1.
double inference_savings(double flops);

} // namespace spectron

#endif // SPECTRON_SCALING_HPP
