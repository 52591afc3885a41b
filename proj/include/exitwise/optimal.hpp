#pragma once

#include <vector>

#include "exitwise/fit.hpp"

namespace exitwise {

// Accuracy interval a result may be clamped to; defaults to the full unit
// interval, callers with an achievable set pass its envelope.
struct AccuracyRange {
    double min = 0.0;
    double max = 1.0;
};

enum class ClampStatus { interior, clamped_low, clamped_high };

struct OptimalAccuracy {
    double value = 0;
    ClampStatus clamp = ClampStatus::interior;

    bool clamped() const { return clamp != ClampStatus::interior; }
};

// Argmin of C(A) = alpha * a * exp(b A) + (1 - alpha)(1 - A):
// A* = (1/b) ln((1 - alpha) / (alpha a b)), clamped to the range.
// alpha = 0 makes the optimum unbounded above (clamped high, flagged);
// alpha = 1 drives it to the range minimum.
OptimalAccuracy optimal_accuracy_alpha(const ExpFit& fit, double alpha,
                                       const AccuracyRange& range = {});

// alpha = (1 + (gamma - 1) E_X / E_Dmax)^-1.
double alpha_from_binary(double gamma, double e_x, double e_d_max);

// Argmin of the expected binary-decision energy:
// A* = (1/b) ln((gamma - 1) E_X / (E_Dmax a b)), same clamping.
OptimalAccuracy optimal_accuracy_binary(const ExpFit& fit, double gamma, double e_x,
                                        double e_d_max,
                                        const AccuracyRange& range = {});

// One operating point a trained network can realize.
struct AchievablePoint {
    int depth = 0;
    double accuracy = 0;
    double decision_cost = 0;
};

using AchievableSet = std::vector<AchievablePoint>;

AccuracyRange achievable_range(const AchievableSet& achievable);

// Entry minimizing |accuracy - a_star|; ties resolve to the smaller depth.
const AchievablePoint& nearest_achievable(double a_star,
                                          const AchievableSet& achievable);

// Optimal depth per (gamma, ratio) grid cell; row-major [gamma][ratio].
struct RegionMap {
    std::vector<double> gamma_grid;
    std::vector<double> ratio_grid;  // E_X / E_Dmax
    std::vector<int> depths;         // gamma-major

    int depth_at(std::size_t gi, std::size_t ri) const {
        return depths[gi * ratio_grid.size() + ri];
    }
};

RegionMap region_map(const ExpFit& fit, const AchievableSet& achievable,
                     const std::vector<double>& gamma_grid,
                     const std::vector<double>& ratio_grid);

}  // namespace exitwise
