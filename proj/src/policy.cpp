#include "exitwise/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "exitwise/energy.hpp"
#include "exitwise/errors.hpp"
#include "exitwise/threads.hpp"
#include "exitwise/training.hpp"

namespace exitwise {

void ExitPolicyParams::validate(std::size_t exit_count) const {
    if (desired_accuracy < 0.0 || desired_accuracy > 1.0)
        throw ParameterError("desired accuracy must lie in [0, 1]");
    if (beta_acc <= 0.0 || beta_conf <= 0.0)
        throw ParameterError("beta coefficients must be positive");
    if (per_layer_train_acc.size() != exit_count)
        throw StateError("policy needs one calibration accuracy per exit (" +
                         std::to_string(exit_count) + " exits, " +
                         std::to_string(per_layer_train_acc.size()) +
                         " calibration values)");
    for (double a : per_layer_train_acc)
        if (a < 0.0 || a > 1.0)
            throw ParameterError("calibration accuracies must lie in [0, 1]");
}

double confidence(const TensorF& probs) {
    if (probs.empty()) throw ParameterError("confidence of an empty vector");
    return static_cast<double>(
        *std::max_element(probs.raw().begin(), probs.raw().end()));
}

SelectOutcome select_exit(int depth_exits, const ExitPolicyParams& params,
                          const std::function<double(int)>& conf) {
    params.validate(static_cast<std::size_t>(depth_exits));
    const double threshold = params.beta_conf * params.desired_accuracy;
    const bool confidence_satisfiable = threshold <= 1.0;
    SelectOutcome out;
    for (int l = 1; l <= depth_exits; ++l) {
        if (params.beta_acc * params.per_layer_train_acc[l - 1] >=
            params.desired_accuracy) {
            out.exit_layer = l;
            out.reason = ExitReason::accuracy;
            return out;
        }
        if (confidence_satisfiable) {
            ++out.confidence_checks;
            if (conf(l) >= threshold) {
                out.exit_layer = l;
                out.reason = ExitReason::confidence;
                return out;
            }
        }
    }
    out.exit_layer = depth_exits;  // no exit satisfied the rule
    out.reason = ExitReason::fallback;
    return out;
}

PolicyOutcome run_policy_sample(const ModelF& model, const TensorF& image,
                                const ExitPolicyParams& params) {
    const Arch& arch = model.arch;
    if (static_cast<int>(arch.exits.size()) != arch.depth || arch.exits.front() != 1)
        throw ParameterError("dynamic exit policy needs a full multi-exit model");

    LazyExitEvaluator<float> lazy(model, image);
    const SelectOutcome sel =
        select_exit(arch.depth, params,
                    [&](int l) { return confidence(lazy.exit_probs(l)); });

    // The selected head classifies; compute it if the accuracy disjunct
    // decided without looking at it.
    const TensorF& probs = lazy.exit_probs(sel.exit_layer);
    const auto arg = std::max_element(probs.raw().begin(), probs.raw().end());

    const std::vector<std::int64_t> conv_macs = trunk_conv_macs(arch);
    const std::vector<std::int64_t> head_macs = exit_head_macs(arch);

    PolicyOutcome out;
    out.exit_layer = sel.exit_layer;
    out.predicted = static_cast<int>(arg - probs.raw().begin());
    out.confidence_checks = sel.confidence_checks;
    out.heads_evaluated = static_cast<int>(lazy.heads_evaluated().size());
    out.reason = sel.reason;
    for (int c = 0; c < lazy.convs_computed(); ++c) out.macs += conv_macs[c];
    for (int e : lazy.heads_evaluated()) out.macs += head_macs[arch.head_index(e)];
    return out;
}

std::int64_t FixedDepthBaseline::macs_at_accuracy(double accuracy_target) const {
    std::int64_t best = -1;
    for (std::size_t i = 0; i < accuracy.size(); ++i) {
        if (accuracy[i] >= accuracy_target && (best < 0 || macs[i] < best))
            best = macs[i];
    }
    if (best >= 0) return best;
    // No fixed exit reaches the target: match against the most accurate one.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < accuracy.size(); ++i)
        if (accuracy[i] > accuracy[arg]) arg = i;
    return macs[arg];
}

FixedDepthBaseline fixed_depth_baseline(const ModelF& model, const Dataset& data) {
    FixedDepthBaseline base;
    base.accuracy =
        evaluate_exits(model, data, model.arch.exits).per_exit_accuracy;
    const MacBreakdown mb = mac_network(model.arch);
    base.macs = mb.per_exit_cumulative;
    base.max_macs = mb.total;
    return base;
}

PolicyReport evaluate_policy(const ModelF& model, const Dataset& data,
                             const ExitPolicyParams& params,
                             const FixedDepthBaseline* baseline) {
    params.validate(model.arch.exits.size());
    if (data.images.empty()) throw ParameterError("policy evaluation needs data");

    std::vector<PolicyOutcome> outcomes(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
        outcomes[i] = run_policy_sample(model, data.images[i].pixels, params);
    });

    PolicyReport report;
    report.params = params;
    report.usage_histogram.assign(model.arch.exits.size(), 0);
    std::int64_t correct = 0;
    std::int64_t total_macs = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const PolicyOutcome& oc = outcomes[i];
        correct += oc.predicted == data.images[i].label;
        total_macs += oc.macs;
        report.usage_histogram[model.arch.head_index(oc.exit_layer)] += 1;
        report.total_confidence_checks += oc.confidence_checks;
        report.total_heads_evaluated += oc.heads_evaluated;
    }
    report.test_accuracy = static_cast<double>(correct) /
                           static_cast<double>(data.size());
    report.mean_macs = static_cast<double>(total_macs) /
                       static_cast<double>(data.size());

    FixedDepthBaseline local;
    if (!baseline) {
        local = fixed_depth_baseline(model, data);
        baseline = &local;
    }
    report.baseline_accuracy = baseline->accuracy;
    report.baseline_macs = baseline->macs;
    report.max_macs = baseline->max_macs;
    report.matched_baseline_macs =
        static_cast<double>(baseline->macs_at_accuracy(report.test_accuracy));
    report.savings = (report.matched_baseline_macs - report.mean_macs) /
                     static_cast<double>(report.max_macs);
    return report;
}

std::vector<double> default_confidence_thresholds() {
    std::vector<double> t;
    for (int i = 0; i <= 100; ++i) t.push_back(static_cast<double>(i) / 100.0);
    return t;
}

ConfidenceTable build_confidence_table(const ModelF& model, const Dataset& data,
                                       const std::vector<double>& thresholds) {
    if (data.images.empty()) throw ParameterError("confidence table needs data");
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (thresholds[i] <= thresholds[i - 1])
            throw ParameterError("confidence thresholds must be ascending");

    const std::size_t exits = model.arch.exits.size();
    struct SampleConf {
        std::vector<float> conf;
        std::vector<char> correct;
    };
    std::vector<SampleConf> stats(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
        const auto probs = forward_all_exits(model, data.images[i].pixels);
        SampleConf sc;
        sc.conf.resize(exits);
        sc.correct.resize(exits);
        for (std::size_t e = 0; e < exits; ++e) {
            sc.conf[e] = static_cast<float>(confidence(probs[e]));
            const auto arg =
                std::max_element(probs[e].raw().begin(), probs[e].raw().end());
            sc.correct[e] = static_cast<int>(arg - probs[e].raw().begin()) ==
                            data.images[i].label;
        }
        stats[i] = std::move(sc);
    });

    ConfidenceTable table;
    table.exit_layers = model.arch.exits;
    table.per_exit.resize(exits);
    for (std::size_t e = 0; e < exits; ++e) {
        for (double t : thresholds) {
            std::int64_t kept = 0, correct = 0;
            for (const SampleConf& sc : stats) {
                if (sc.conf[e] >= t) {
                    ++kept;
                    correct += sc.correct[e];
                }
            }
            ConfidenceRow row;
            row.threshold = t;
            row.fraction = static_cast<double>(kept) /
                           static_cast<double>(data.size());
            if (kept > 0)
                row.accuracy = static_cast<double>(correct) /
                               static_cast<double>(kept);
            table.per_exit[e].push_back(row);
        }
    }
    return table;
}

std::vector<DesiredAccuracyPoint> accuracy_vs_desired_sweep(
    const ModelF& model, const Dataset& data, const std::vector<double>& desired_grid,
    double beta_acc, double beta_conf) {
    if (!model.has_calibration())
        throw StateError("model has no calibration; run calibrate() after training");
    std::vector<DesiredAccuracyPoint> points;
    for (double desired : desired_grid) {
        ExitPolicyParams params{desired, beta_acc, beta_conf, model.calibration};
        const PolicyReport report = evaluate_policy(model, data, params);
        points.push_back({desired, report.test_accuracy});
    }
    return points;
}

std::vector<PolicyCurvePoint> energy_accuracy_with_policy(
    const ModelF& model, const Dataset& data, const std::vector<double>& desired_grid,
    double beta_acc, double beta_conf, const FixedDepthBaseline* baseline) {
    if (!model.has_calibration())
        throw StateError("model has no calibration; run calibrate() after training");
    FixedDepthBaseline local;
    if (!baseline) {
        local = fixed_depth_baseline(model, data);
        baseline = &local;
    }
    std::vector<PolicyCurvePoint> curve;
    for (double desired : desired_grid) {
        ExitPolicyParams params{desired, beta_acc, beta_conf, model.calibration};
        const PolicyReport report = evaluate_policy(model, data, params, baseline);
        PolicyCurvePoint pt;
        pt.desired = desired;
        pt.accuracy = report.test_accuracy;
        pt.mean_macs = report.mean_macs;
        pt.norm_energy = report.mean_macs / static_cast<double>(report.max_macs);
        pt.baseline_norm_energy = report.matched_baseline_macs /
                                  static_cast<double>(report.max_macs);
        pt.savings = report.savings;
        curve.push_back(pt);
    }
    return curve;
}

}  // namespace exitwise
