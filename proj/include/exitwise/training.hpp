#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exitwise/dataset.hpp"
#include "exitwise/model.hpp"

namespace exitwise {

struct TrainConfig {
    double lr = 1e-3;
    double beta_m = 0.9;
    double beta_v = 0.999;
    double eps = 1e-8;
    int batch_size = 128;
    int max_epochs = 100;
    int patience = 10;
    double l2_lambda = 1e-3;
    // Keep-probability of the inverted dropout on every head input. When
    // dropout_is_drop_prob is set the same value is read as a drop
    // probability instead.
    double dropout_keep = 0.8;
    bool dropout_is_drop_prob = false;
    std::uint64_t seed = 0;

    double effective_keep() const {
        return dropout_is_drop_prob ? 1.0 - dropout_keep : dropout_keep;
    }
    void validate() const;
};

struct EpochStats {
    int epoch = 0;  // 1-based within its phase
    int phase = 1;
    double train_loss = 0, train_acc = 0;
    double val_loss = 0, val_acc = 0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;  // index into epochs of the restored optimum
    bool stopped_early = false;
};

// Accuracy/loss of the given exit layers in inference mode (no dropout).
struct EvalResult {
    std::vector<int> exit_layers;
    std::vector<double> per_exit_accuracy;
    double mean_loss = 0;      // summed active-exit cross entropy, per sample
    double mean_accuracy = 0;  // mean of per-exit accuracies
};

EvalResult evaluate_exits(const ModelF& model, const Dataset& data,
                          const std::vector<int>& exit_layers);

// Trains the sole head (plus trunk) of a single-exit model with early
// stopping; the best-validation weights are restored on return.
TrainHistory train_single(ModelF& model, const Dataset& train, const Dataset& val,
                          const TrainConfig& cfg);

// Joint optimization of trunk and all heads with the summed cross-entropy
// loss; validation accuracy is the mean over exits.
TrainHistory train_combined(ModelF& model, const Dataset& train, const Dataset& val,
                            const TrainConfig& cfg);

// Phase 1 trains trunk plus the final head; phase 2 freezes the trunk and
// trains the remaining heads.
TrainHistory train_individual(ModelF& model, const Dataset& train, const Dataset& val,
                              const TrainConfig& cfg);

// Per-exit accuracy on the full training set, stored into the model for the
// dynamic exit policy.
std::vector<double> calibrate(ModelF& model, const Dataset& full_train);

struct SweepPoint {
    int param = 0;  // depth or width
    std::int64_t macs = 0;
    double train_acc = 0, test_acc = 0;
    std::string error;  // non-empty when this point failed

    bool ok() const { return error.empty(); }
};

std::vector<SweepPoint> sweep_depth(const std::vector<int>& depths, int width,
                                    const Dataset& train, const Dataset& val,
                                    const Dataset& test, const TrainConfig& cfg);

std::vector<SweepPoint> sweep_width(int depth, const std::vector<int>& widths,
                                    const Dataset& train, const Dataset& val,
                                    const Dataset& test, const TrainConfig& cfg);

// Per-exit test-accuracy change when the bank of independent single-exit
// networks (depths 1..depth) is folded into one multi-exit network, for both
// the two-phase and the combined training procedure.
struct DeltaAccuracyResult {
    std::vector<double> baseline_acc;    // bank member of matching depth
    std::vector<double> individual_acc;  // multi-exit, two-phase training
    std::vector<double> combined_acc;    // multi-exit, summed-loss training
    double mean_delta_individual = 0;
    double mean_delta_combined = 0;
};

DeltaAccuracyResult experiment_delta_accuracy(int depth, int width,
                                              const Dataset& train, const Dataset& val,
                                              const Dataset& test,
                                              const TrainConfig& cfg);

}  // namespace exitwise
