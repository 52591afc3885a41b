#include "exitwise/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "exitwise/errors.hpp"

namespace exitwise {

namespace {

constexpr int kMaxIterations = 1000;
constexpr double kGradTolerance = 1e-10;
constexpr double kDamping = 0.5;
constexpr int kMaxHalvings = 40;

void check_points(const std::vector<CurvePoint>& points) {
    if (points.size() < 2)
        throw ParameterError("curve fit needs at least two points");
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            if (points[i].first == points[j].first)
                throw ParameterError("curve fit needs distinct accuracy values");
}

// Solves the 2x2 normal equations J^T J step = -J^T r.
bool solve2(double a11, double a12, double a22, double g1, double g2, double& s1,
            double& s2) {
    const double det = a11 * a22 - a12 * a12;
    if (std::abs(det) < 1e-300) return false;
    s1 = (-g1 * a22 + g2 * a12) / det;
    s2 = (-g2 * a11 + g1 * a12) / det;
    return true;
}

template <typename Model, typename Jacobian>
std::pair<int, double> gauss_newton(double& a, double& b, Model model, Jacobian jac,
                                    const std::vector<CurvePoint>& points,
                                    const char* label) {
    auto sse = [&](double pa, double pb) {
        double s = 0;
        for (const auto& [x, y] : points) {
            const double r = model(pa, pb, x) - y;
            s += r * r;
        }
        return s;
    };
    double current = sse(a, b);
    for (int it = 1; it <= kMaxIterations; ++it) {
        double a11 = 0, a12 = 0, a22 = 0, g1 = 0, g2 = 0;
        for (const auto& [x, y] : points) {
            const double r = model(a, b, x) - y;
            const auto [ja, jb] = jac(a, b, x);
            a11 += ja * ja;
            a12 += ja * jb;
            a22 += jb * jb;
            g1 += ja * r;
            g2 += jb * r;
        }
        const double grad_norm = std::hypot(g1, g2);
        if (grad_norm <= kGradTolerance) return {it, current};

        double s1, s2;
        if (!solve2(a11, a12, a22, g1, g2, s1, s2)) {
            // Singular normal equations with a flat gradient direction:
            // fall back to steepest descent.
            const double scale = 1.0 / std::max(grad_norm, 1e-12);
            s1 = -g1 * scale;
            s2 = -g2 * scale;
        }
        double step = 1.0;
        bool improved = false;
        for (int h = 0; h < kMaxHalvings; ++h) {
            const double na = a + step * s1;
            const double nb = b + step * s2;
            const double trial = sse(na, nb);
            if (std::isfinite(trial) && trial <= current + 1e-18) {
                a = na;
                b = nb;
                // Accept equal-cost steps only briefly; they stall.
                improved = true;
                if (trial == current && grad_norm <= 1e-8) return {it, current};
                current = trial;
                break;
            }
            step *= kDamping;
        }
        if (!improved) {
            if (grad_norm <= 1e-6) return {it, current};  // numerical floor
            std::ostringstream msg;
            msg << label << " fit: no descent step found at iteration " << it
                << " (a=" << a << ", b=" << b << ", sse=" << current
                << ", grad=" << grad_norm << ")";
            throw FitError(msg.str());
        }
    }
    std::ostringstream msg;
    msg << label << " fit: no convergence after " << kMaxIterations
        << " iterations (a=" << a << ", b=" << b << ", sse=" << current << ")";
    throw FitError(msg.str());
}

}  // namespace

double ExpFit::operator()(double accuracy) const { return a * std::exp(b * accuracy); }

double RatFit::operator()(double accuracy) const {
    return a * (accuracy - 0.1) / (1.0 - b * accuracy);
}

ExpFit fit_exponential(const std::vector<CurvePoint>& points) {
    check_points(points);

    // Log-linear warm start: ln C = ln a + b A, when all costs are positive.
    double a0 = 0, b0 = 0;
    bool positive = std::all_of(points.begin(), points.end(),
                                [](const CurvePoint& p) { return p.second > 0; });
    if (positive) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(points.size());
        for (const auto& [x, y] : points) {
            const double ly = std::log(y);
            sx += x;
            sy += ly;
            sxx += x * x;
            sxy += x * ly;
        }
        const double denom = n * sxx - sx * sx;
        b0 = (n * sxy - sx * sy) / denom;
        a0 = std::exp((sy - b0 * sx) / n);
    } else {
        double mean = 0;
        for (const auto& p : points) mean += p.second;
        a0 = mean / static_cast<double>(points.size());
        b0 = 0;
    }

    ExpFit fit;
    fit.a = a0;
    fit.b = b0;
    auto model = [](double a, double b, double x) { return a * std::exp(b * x); };
    auto jac = [](double a, double b, double x) {
        const double e = std::exp(b * x);
        return std::pair<double, double>{e, a * x * e};
    };
    auto [iters, sse] = gauss_newton(fit.a, fit.b, model, jac, points, "exponential");
    fit.iterations = iters;
    fit.residual = sse;
    fit.near_zero_b = std::abs(fit.b) < 1e-6;
    return fit;
}

RatFit fit_rational(const std::vector<CurvePoint>& points) {
    check_points(points);

    // Linearized warm start: C = a (A - 0.1) + b (C A), linear in (a, b).
    double m11 = 0, m12 = 0, m22 = 0, v1 = 0, v2 = 0;
    for (const auto& [x, y] : points) {
        const double u = x - 0.1;
        const double w = y * x;
        m11 += u * u;
        m12 += u * w;
        m22 += w * w;
        v1 += u * y;
        v2 += w * y;
    }
    double a0, b0;
    if (!solve2(m11, m12, m22, -v1, -v2, a0, b0)) {
        a0 = 1.0;
        b0 = 0.0;
    }

    auto check_pole = [&points](double b) {
        for (const auto& [x, y] : points) {
            (void)y;
            if (std::abs(1.0 - b * x) < 1e-9) {
                std::ostringstream msg;
                msg << "rational fit: pole 1/b = " << 1.0 / b
                    << " coincides with data point A = " << x;
                throw PoleError(msg.str());
            }
        }
    };
    check_pole(b0);

    RatFit fit;
    fit.a = a0;
    fit.b = b0;
    auto model = [](double a, double b, double x) {
        return a * (x - 0.1) / (1.0 - b * x);
    };
    auto jac = [](double a, double b, double x) {
        const double d = 1.0 - b * x;
        return std::pair<double, double>{(x - 0.1) / d, a * (x - 0.1) * x / (d * d)};
    };
    auto [iters, sse] = gauss_newton(fit.a, fit.b, model, jac, points, "rational");
    fit.iterations = iters;
    fit.residual = sse;
    check_pole(fit.b);

    // The fitted curve must be finite over the whole data range, not just at
    // the sample points.
    double lo = points.front().first, hi = points.front().first;
    for (const auto& p : points) {
        lo = std::min(lo, p.first);
        hi = std::max(hi, p.first);
    }
    if (fit.b != 0.0) {
        const double pole = 1.0 / fit.b;
        if (pole >= lo - 1e-12 && pole <= hi + 1e-12) {
            std::ostringstream msg;
            msg << "rational fit: pole 1/b = " << pole
                << " lies inside the fitted accuracy range [" << lo << ", " << hi
                << "]";
            throw PoleError(msg.str());
        }
    }
    return fit;
}

}  // namespace exitwise
