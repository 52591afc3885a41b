#pragma once

#include <utility>
#include <vector>

namespace exitwise {

// Accuracy/decision-cost sample point.
using CurvePoint = std::pair<double, double>;  // (A, C_D)

// C_D = a * exp(b * A).
struct ExpFit {
    double a = 0, b = 0;
    double residual = 0;   // sum of squared errors
    bool near_zero_b = false;
    int iterations = 0;

    double operator()(double accuracy) const;
};

// C_D = a * (A - 0.1) / (1 - b * A); the 0.1 offset is the 10-class chance
// accuracy and is fixed, not fitted.
struct RatFit {
    double a = 0, b = 0;
    double residual = 0;
    int iterations = 0;

    double operator()(double accuracy) const;
};

// Least squares via log-linear (exp) or linearized (rational) warm start
// refined by damped Gauss-Newton to gradient norm <= 1e-10. Throws FitError
// with diagnostics after 1000 iterations without convergence; the rational
// fit throws PoleError when 1 - b*A vanishes inside the data range.
ExpFit fit_exponential(const std::vector<CurvePoint>& points);
RatFit fit_rational(const std::vector<CurvePoint>& points);

}  // namespace exitwise
