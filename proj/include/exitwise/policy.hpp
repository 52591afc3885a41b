#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "exitwise/dataset.hpp"
#include "exitwise/model.hpp"

namespace exitwise {

// Dynamic exit rule parameters: exit at the shallowest layer l whose scaled
// calibration accuracy (beta_acc * A_train_l) or scaled confidence clears
// the desired accuracy, else use the final layer.
struct ExitPolicyParams {
    double desired_accuracy = 0.5;
    double beta_acc = 1.0;   // scales the mean-accuracy disjunct
    double beta_conf = 1.0;  // scales the confidence threshold
    std::vector<double> per_layer_train_acc;

    void validate(std::size_t exit_count) const;
};

// Largest softmax probability; lies in [1/K, 1].
double confidence(const TensorF& probs);

enum class ExitReason {
    accuracy,    // beta_acc * A_train_l cleared the target
    confidence,  // the computed confidence cleared the scaled target
    fallback,    // nothing qualified; the final layer classifies
};

struct SelectOutcome {
    int exit_layer = 0;
    int confidence_checks = 0;  // checks that actually computed a head
    ExitReason reason = ExitReason::fallback;
};

// Pure selection rule over an abstract confidence source; conf(l) is called
// only when that exit's confidence must be inspected. Confidence checks
// whose threshold exceeds 1 are skipped outright: no probability can
// satisfy them, so evaluating the head would spend energy on a test with a
// known outcome.
SelectOutcome select_exit(int depth_exits, const ExitPolicyParams& params,
                          const std::function<double(int)>& conf);

// Per-sample result of the dynamic policy.
struct PolicyOutcome {
    int exit_layer = 0;
    int predicted = -1;
    std::int64_t macs = 0;
    int confidence_checks = 0;
    int heads_evaluated = 0;
    ExitReason reason = ExitReason::fallback;
};

// Runs the exit rule on one sample with lazy trunk/head evaluation and MAC
// accounting: trunk convs up to the selected exit plus every head that was
// actually computed along the way.
PolicyOutcome run_policy_sample(const ModelF& model, const TensorF& image,
                                const ExitPolicyParams& params);

// Fixed-depth reference: per-exit test accuracy and the MACs of running
// only that exit (trunk through its convs plus its own head).
struct FixedDepthBaseline {
    std::vector<double> accuracy;
    std::vector<std::int64_t> macs;
    std::int64_t max_macs = 0;

    // Cheapest fixed exit reaching the given accuracy; falls back to the
    // most accurate exit when none does.
    std::int64_t macs_at_accuracy(double accuracy_target) const;
};

FixedDepthBaseline fixed_depth_baseline(const ModelF& model, const Dataset& data);

struct PolicyReport {
    ExitPolicyParams params;
    double test_accuracy = 0;
    double mean_macs = 0;
    std::vector<std::int64_t> usage_histogram;  // per exit, sums to sample count
    std::vector<double> baseline_accuracy;
    std::vector<std::int64_t> baseline_macs;
    std::int64_t max_macs = 0;
    double matched_baseline_macs = 0;
    double savings = 0;  // (matched baseline - policy) / max
    std::int64_t total_confidence_checks = 0;
    std::int64_t total_heads_evaluated = 0;
};

PolicyReport evaluate_policy(const ModelF& model, const Dataset& data,
                             const ExitPolicyParams& params,
                             const FixedDepthBaseline* baseline = nullptr);

// Accuracy among samples predicted with at least the given confidence, per
// exit and threshold; accuracy is absent when no sample qualifies.
struct ConfidenceRow {
    double threshold = 0;
    std::optional<double> accuracy;
    double fraction = 0;  // share of samples at or above the threshold
};

struct ConfidenceTable {
    std::vector<int> exit_layers;
    std::vector<std::vector<ConfidenceRow>> per_exit;
};

std::vector<double> default_confidence_thresholds();  // 0.00..1.00 step 0.01

ConfidenceTable build_confidence_table(const ModelF& model, const Dataset& data,
                                       const std::vector<double>& thresholds);

// Measured accuracy per desired-accuracy grid point for one beta pair.
struct DesiredAccuracyPoint {
    double desired = 0;
    double accuracy = 0;
};

std::vector<DesiredAccuracyPoint> accuracy_vs_desired_sweep(
    const ModelF& model, const Dataset& data, const std::vector<double>& desired_grid,
    double beta_acc, double beta_conf);

// Policy energy-accuracy curve with savings against the fixed-depth
// baseline, normalized to the maximum (deepest fixed exit) energy.
struct PolicyCurvePoint {
    double desired = 0;
    double accuracy = 0;
    double mean_macs = 0;
    double norm_energy = 0;
    double baseline_norm_energy = 0;
    double savings = 0;
};

std::vector<PolicyCurvePoint> energy_accuracy_with_policy(
    const ModelF& model, const Dataset& data, const std::vector<double>& desired_grid,
    double beta_acc, double beta_conf, const FixedDepthBaseline* baseline = nullptr);

}  // namespace exitwise
