#include "exitwise/optimal.hpp"

#include <cmath>
#include <limits>

#include "exitwise/errors.hpp"
#include "exitwise/threads.hpp"

namespace exitwise {

namespace {

OptimalAccuracy clamp_to(double value, const AccuracyRange& range) {
    if (value < range.min) return {range.min, ClampStatus::clamped_low};
    if (value > range.max) return {range.max, ClampStatus::clamped_high};
    return {value, ClampStatus::interior};
}

void check_fit(const ExpFit& fit) {
    if (fit.a <= 0 || fit.b <= 0)
        throw ParameterError("closed-form optimum requires a > 0 and b > 0");
}

}  // namespace

OptimalAccuracy optimal_accuracy_alpha(const ExpFit& fit, double alpha,
                                       const AccuracyRange& range) {
    if (alpha < 0.0 || alpha > 1.0)
        throw ParameterError("alpha must lie in [0, 1], got " + std::to_string(alpha));
    check_fit(fit);
    if (alpha == 0.0) return {range.max, ClampStatus::clamped_high};
    if (alpha == 1.0) return {range.min, ClampStatus::clamped_low};
    const double argument = (1.0 - alpha) / (alpha * fit.a * fit.b);
    return clamp_to(std::log(argument) / fit.b, range);
}

double alpha_from_binary(double gamma, double e_x, double e_d_max) {
    if (gamma < 1.0) throw ParameterError("gamma must be >= 1");
    if (e_x < 0.0) throw ParameterError("e_x must be >= 0");
    if (e_d_max <= 0.0) throw ParameterError("e_d_max must be positive");
    return 1.0 / (1.0 + (gamma - 1.0) * e_x / e_d_max);
}

OptimalAccuracy optimal_accuracy_binary(const ExpFit& fit, double gamma, double e_x,
                                        double e_d_max, const AccuracyRange& range) {
    if (gamma < 1.0) throw ParameterError("gamma must be >= 1");
    if (e_x < 0.0) throw ParameterError("e_x must be >= 0");
    if (e_d_max <= 0.0) throw ParameterError("e_d_max must be positive");
    check_fit(fit);
    if (gamma == 1.0 || e_x == 0.0) return {range.min, ClampStatus::clamped_low};
    const double argument = (gamma - 1.0) * e_x / (e_d_max * fit.a * fit.b);
    return clamp_to(std::log(argument) / fit.b, range);
}

AccuracyRange achievable_range(const AchievableSet& achievable) {
    if (achievable.empty()) throw ParameterError("achievable set is empty");
    AccuracyRange r{achievable.front().accuracy, achievable.front().accuracy};
    for (const AchievablePoint& p : achievable) {
        r.min = std::min(r.min, p.accuracy);
        r.max = std::max(r.max, p.accuracy);
    }
    return r;
}

const AchievablePoint& nearest_achievable(double a_star,
                                          const AchievableSet& achievable) {
    if (achievable.empty()) throw ParameterError("achievable set is empty");
    const AchievablePoint* best = nullptr;
    double best_dist = std::numeric_limits<double>::infinity();
    int best_depth = 0;
    for (const AchievablePoint& p : achievable) {
        const double dist = std::abs(p.accuracy - a_star);
        if (dist < best_dist || (dist == best_dist && p.depth < best_depth)) {
            best = &p;
            best_dist = dist;
            best_depth = p.depth;
        }
    }
    return *best;
}

RegionMap region_map(const ExpFit& fit, const AchievableSet& achievable,
                     const std::vector<double>& gamma_grid,
                     const std::vector<double>& ratio_grid) {
    if (gamma_grid.empty() || ratio_grid.empty())
        throw ParameterError("region map grids must be non-empty");
    const AccuracyRange range = achievable_range(achievable);

    RegionMap map;
    map.gamma_grid = gamma_grid;
    map.ratio_grid = ratio_grid;
    map.depths.assign(gamma_grid.size() * ratio_grid.size(), 0);
    parallel_for(gamma_grid.size(), [&](std::size_t gi) {
        for (std::size_t ri = 0; ri < ratio_grid.size(); ++ri) {
            const OptimalAccuracy a_star = optimal_accuracy_binary(
                fit, gamma_grid[gi], ratio_grid[ri], 1.0, range);
            map.depths[gi * ratio_grid.size() + ri] =
                nearest_achievable(a_star.value, achievable).depth;
        }
    });
    return map;
}

}  // namespace exitwise
