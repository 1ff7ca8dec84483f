#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace covw {

// ---------------------------------------------------------------------------
// Standard normal distribution
// ---------------------------------------------------------------------------

double norm_cdf(double x);
// Upper tail 1 - Phi(x), computed without cancellation for large x.
double norm_sf(double x);
double norm_pdf(double x);
double log_norm_cdf(double x);
double norm_quantile(double p);
// Inverse of the upper tail: returns z with norm_sf(z) = q.
double norm_sf_inverse(double q);

namespace testing {
// Fault injection for the validation suite: while enabled, norm_cdf returns a
// deliberately biased value. Never enable outside tests.
void set_cdf_fault(bool enabled);
bool cdf_fault_enabled();
} // namespace testing

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

struct SolverConfig {
    int max_iterations = 100;
    double abs_tolerance = 1e-12;
    double step_tolerance = 1e-12;

    void validate() const;
};

struct RootResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
};

using ScalarFn = std::function<double(double)>;

// Plain Newton iteration. Throws SingularDerivativeError when |f'| < 1e-300
// and NonConvergenceError when the iteration cap is reached.
RootResult newton_raphson(const ScalarFn& f, const ScalarFn& fprime, double x0,
                          const SolverConfig& cfg = {});

// Newton with a maintained sign-change bracket; a step that leaves the bracket
// (or a tiny derivative) is replaced by bisection. Requires f(lo)*f(hi) <= 0.
RootResult safeguarded_newton(const ScalarFn& f, const ScalarFn& fprime, double lo,
                              double hi, double x0, const SolverConfig& cfg = {});

// Grid point minimizing |f|; the smallest point wins ties.
double grid_search_root(const ScalarFn& f, std::span<const double> grid);

// Uniform grid helper: lo + step, lo + 2 step, ... strictly below hi.
std::vector<double> open_grid(double lo, double hi, double step);

RootResult brent_root(const ScalarFn& f, double lo, double hi, const SolverConfig& cfg = {});

// ---------------------------------------------------------------------------
// Cubic smoothing spline
// ---------------------------------------------------------------------------

class SplineFit {
public:
    SplineFit() = default;
    SplineFit(std::vector<double> knots, std::vector<double> values,
              std::vector<double> second_derivs, double penalty, double df);

    double operator()(double x) const;
    double derivative(double x) const;
    double second_derivative(double x) const;

    std::span<const double> knots() const { return knots_; }
    // Fitted values at the knots.
    std::span<const double> fitted() const { return values_; }
    std::span<const double> second_derivatives() const { return gamma_; }
    double penalty() const { return penalty_; }
    double effective_df() const { return df_; }

    // Polynomial coefficients of segment i in powers of (x - knot_i):
    // {c0, c1, c2, c3}.
    std::array<double, 4> segment_coefficients(std::size_t i) const;

private:
    std::size_t segment(double x) const;

    std::vector<double> knots_;
    std::vector<double> values_;
    std::vector<double> gamma_;
    double penalty_ = 0.0;
    double df_ = 0.0;
};

// Natural cubic smoothing spline minimizing sum (y - g)^2 + penalty * int g''^2
// with penalty chosen so that trace(S) equals effective_df.
SplineFit fit_smoothing_spline(std::span<const double> x, std::span<const double> y,
                               double effective_df);

// Same with an explicit penalty (penalty = 0 interpolates).
SplineFit fit_smoothing_spline_penalty(std::span<const double> x,
                                       std::span<const double> y, double penalty);

// trace of the smoother matrix at a given penalty.
double smoother_trace(std::span<const double> x, double penalty);

// ---------------------------------------------------------------------------
// Box-Cox
// ---------------------------------------------------------------------------

struct BoxCoxResult {
    std::vector<double> transformed;
    double lambda = 1.0;
};

double box_cox_transform(double y, double lambda);

// Profile likelihood over lambda in [-2, 2] step 0.01 of an intercept-only
// Gaussian model.
BoxCoxResult box_cox(std::span<const double> y);

// Same with a linear predictor: residual variance of the transformed response
// regressed on `regressor`.
BoxCoxResult box_cox(std::span<const double> y, std::span<const double> regressor);

} // namespace covw
