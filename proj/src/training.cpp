#include "exitwise/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "exitwise/adam.hpp"
#include "exitwise/energy.hpp"
#include "exitwise/errors.hpp"
#include "exitwise/grad.hpp"
#include "exitwise/rng.hpp"
#include "exitwise/threads.hpp"

namespace exitwise {

void TrainConfig::validate() const {
    if (patience < 1) throw ParameterError("patience must be >= 1");
    if (l2_lambda < 0) throw ParameterError("l2_lambda must be >= 0");
    const double keep = effective_keep();
    if (keep <= 0.0 || keep > 1.0)
        throw ParameterError("dropout keep probability must be in (0, 1], got " +
                             std::to_string(keep));
    if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
    if (max_epochs < 0) throw ParameterError("max_epochs must be >= 0");
    if (lr <= 0) throw ParameterError("learning rate must be positive");
}

namespace {

void check_dataset_model(const ModelF& model, const Dataset& data, const char* what) {
    if (data.images.empty())
        throw ParameterError(std::string(what) + " dataset is empty");
    if (data.image_h() != model.arch.in_h || data.image_w() != model.arch.in_w ||
        data.image_c() != model.arch.in_c) {
        throw DimensionError(std::string(what) + " dataset images do not match the "
                                                 "architecture input shape");
    }
}

std::vector<TensorF> snapshot_params(const ModelF& model) {
    std::vector<TensorF> snap;
    for (const auto& bank : model.trunk) {
        snap.push_back(bank.filters);
        snap.push_back(bank.bias);
    }
    for (const auto& head : model.heads) {
        snap.push_back(head.weights);
        snap.push_back(head.bias);
    }
    return snap;
}

void restore_params(ModelF& model, const std::vector<TensorF>& snap) {
    std::size_t i = 0;
    for (auto& bank : model.trunk) {
        bank.filters = snap[i++];
        bank.bias = snap[i++];
    }
    for (auto& head : model.heads) {
        head.weights = snap[i++];
        head.bias = snap[i++];
    }
}

struct PhaseSpec {
    std::vector<int> active_exits;  // ascending exit layers contributing loss
    bool train_trunk = true;
    int phase_number = 1;
    std::uint64_t stream_salt = 0;  // keeps phase-1 RNG identical to train_single
};

// Number of fixed accumulation chunks per batch. Chunk boundaries depend
// only on the batch size, so gradients are bit-identical for any worker
// count.
constexpr std::size_t kGradChunks = 8;

TrainHistory train_phase(ModelF& model, const Dataset& train, const Dataset& val,
                         const TrainConfig& cfg, const PhaseSpec& spec) {
    cfg.validate();
    check_dataset_model(model, train, "training");
    check_dataset_model(model, val, "validation");

    TrainableSet trainable;
    trainable.trunk = spec.train_trunk;
    for (int e : spec.active_exits)
        trainable.head_indices.push_back(model.arch.head_index(e));

    // Parameter slots in deterministic order: trunk ascending then heads
    // ascending, weights before bias.
    struct Slot {
        TensorF* param;
        TensorF* grad;
        AdamState<float> state;
        bool trainable;
    };
    ModelGrads<float> batch_grads = ModelGrads<float>::zero_like(model);
    std::vector<Slot> slots;
    for (std::size_t t = 0; t < model.trunk.size(); ++t) {
        slots.push_back({&model.trunk[t].filters, &batch_grads.trunk[t].d_filters,
                         {}, spec.train_trunk});
        slots.push_back({&model.trunk[t].bias, &batch_grads.trunk[t].d_bias,
                         {}, spec.train_trunk});
    }
    for (std::size_t h = 0; h < model.heads.size(); ++h) {
        const bool on = std::find(trainable.head_indices.begin(),
                                  trainable.head_indices.end(),
                                  static_cast<int>(h)) != trainable.head_indices.end();
        slots.push_back({&model.heads[h].weights, &batch_grads.heads[h].d_weights,
                         {}, on});
        slots.push_back({&model.heads[h].bias, &batch_grads.heads[h].d_bias, {}, on});
    }
    for (Slot& s : slots)
        if (s.trainable) s.state = AdamState<float>::zero_like(*s.param);

    const AdamHyperParams adam{cfg.lr, cfg.beta_m, cfg.beta_v, cfg.eps};
    const double keep = cfg.effective_keep();
    const bool use_dropout = keep < 1.0;
    const std::uint64_t stream = mix_seed(cfg.seed, seed_salt::kPhase,
                                          spec.stream_salt);

    TrainHistory history;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<TensorF> best_params;
    int epochs_since_best = 0;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<ModelGrads<float>> chunk_grads;
    for (std::size_t k = 0; k < kGradChunks; ++k)
        chunk_grads.push_back(ModelGrads<float>::zero_like(model));

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(stream, seed_salt::kShuffle,
                                 static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        std::vector<std::int64_t> correct(spec.active_exits.size(), 0);

        for (std::size_t batch_start = 0; batch_start < order.size();
             batch_start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t batch_end = std::min(
                order.size(), batch_start + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t bsz = batch_end - batch_start;

            batch_grads.zero();
            for (auto& g : chunk_grads) g.zero();
            std::vector<double> chunk_loss(kGradChunks, 0.0);
            std::vector<std::vector<std::int64_t>> chunk_correct(
                kGradChunks, std::vector<std::int64_t>(spec.active_exits.size(), 0));

            const std::size_t per_chunk = (bsz + kGradChunks - 1) / kGradChunks;
            parallel_for(kGradChunks, [&](std::size_t chunk) {
                const std::size_t lo = batch_start + chunk * per_chunk;
                const std::size_t hi =
                    std::min(batch_end, lo + per_chunk);
                for (std::size_t s = lo; s < hi && s < batch_end; ++s) {
                    const LabeledImage& sample = train.images[order[s]];
                    std::vector<std::optional<TensorF>> masks(model.heads.size());
                    if (use_dropout) {
                        for (int e : spec.active_exits) {
                            const int head = model.arch.head_index(e);
                            Rng mask_rng(mix_seed(
                                stream,
                                seed_salt::kDropout + static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(s),
                                static_cast<std::uint64_t>(e)));
                            masks[head] = dropout_mask<float>(
                                {static_cast<std::size_t>(
                                    model.arch.flatten_size(e))},
                                keep, mask_rng);
                        }
                    }
                    ForwardCache<float> cache = forward_cached(
                        model, sample.pixels, spec.active_exits,
                        use_dropout ? &masks : nullptr);
                    chunk_loss[chunk] += sample_loss(model, cache, sample.label);
                    for (std::size_t ei = 0; ei < spec.active_exits.size(); ++ei) {
                        const int head =
                            model.arch.head_index(spec.active_exits[ei]);
                        const TensorF& probs = *cache.head_probs[head];
                        const auto arg = std::max_element(probs.raw().begin(),
                                                          probs.raw().end());
                        if (static_cast<int>(arg - probs.raw().begin()) ==
                            sample.label)
                            ++chunk_correct[chunk][ei];
                    }
                    ModelGrads<float> g =
                        backward_pass(model, cache, sample.label, spec.train_trunk);
                    chunk_grads[chunk].accumulate(g);
                }
            });
            for (std::size_t k = 0; k < kGradChunks; ++k) {
                batch_grads.accumulate(chunk_grads[k]);
                epoch_loss += chunk_loss[k];
                for (std::size_t ei = 0; ei < correct.size(); ++ei)
                    correct[ei] += chunk_correct[k][ei];
            }
            batch_grads.scale(static_cast<float>(1.0 / static_cast<double>(bsz)));
            add_l2_gradient(model, trainable, cfg.l2_lambda, batch_grads);
            epoch_loss += l2_penalty(model, trainable, cfg.l2_lambda) *
                          static_cast<double>(bsz);

            for (Slot& slot : slots)
                if (slot.trainable) adam_step(*slot.param, *slot.grad, slot.state, adam);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.phase = spec.phase_number;
        stats.train_loss = epoch_loss / static_cast<double>(train.size());
        double acc_sum = 0.0;
        for (std::size_t ei = 0; ei < correct.size(); ++ei)
            acc_sum += static_cast<double>(correct[ei]) /
                       static_cast<double>(train.size());
        stats.train_acc = acc_sum / static_cast<double>(correct.size());

        const EvalResult ev = evaluate_exits(model, val, spec.active_exits);
        stats.val_loss = ev.mean_loss;
        stats.val_acc = ev.mean_accuracy;
        history.epochs.push_back(stats);

        if (stats.val_loss < best_val_loss) {
            best_val_loss = stats.val_loss;
            best_params = snapshot_params(model);
            history.best_epoch = static_cast<int>(history.epochs.size()) - 1;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= cfg.patience) {
                history.stopped_early = true;
                break;
            }
        }
    }
    if (!best_params.empty()) restore_params(model, best_params);
    return history;
}

}  // namespace

EvalResult evaluate_exits(const ModelF& model, const Dataset& data,
                          const std::vector<int>& exit_layers) {
    check_dataset_model(model, data, "evaluation");
    EvalResult result;
    result.exit_layers = exit_layers;

    struct SampleEval {
        double loss = 0;
        std::vector<char> correct;
    };
    std::vector<SampleEval> per_sample(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
        const LabeledImage& sample = data.images[i];
        ForwardCache<float> cache =
            forward_cached<float>(model, sample.pixels, exit_layers);
        SampleEval ev;
        ev.correct.resize(exit_layers.size(), 0);
        for (std::size_t ei = 0; ei < exit_layers.size(); ++ei) {
            const int head = model.arch.head_index(exit_layers[ei]);
            const TensorF& probs = *cache.head_probs[head];
            ev.loss += cross_entropy_loss(probs, sample.label);
            const auto arg = std::max_element(probs.raw().begin(), probs.raw().end());
            ev.correct[ei] =
                static_cast<int>(arg - probs.raw().begin()) == sample.label;
        }
        per_sample[i] = std::move(ev);
    });

    result.per_exit_accuracy.assign(exit_layers.size(), 0.0);
    double loss = 0.0;
    for (const SampleEval& ev : per_sample) {
        loss += ev.loss;
        for (std::size_t ei = 0; ei < exit_layers.size(); ++ei)
            result.per_exit_accuracy[ei] += ev.correct[ei];
    }
    result.mean_loss = loss / static_cast<double>(data.size());
    double acc_sum = 0.0;
    for (double& a : result.per_exit_accuracy) {
        a /= static_cast<double>(data.size());
        acc_sum += a;
    }
    result.mean_accuracy = acc_sum / static_cast<double>(exit_layers.size());
    return result;
}

TrainHistory train_single(ModelF& model, const Dataset& train, const Dataset& val,
                          const TrainConfig& cfg) {
    if (!model.arch.is_single_exit())
        throw ParameterError("train_single requires a single-exit model");
    PhaseSpec spec;
    spec.active_exits = model.arch.exits;
    spec.train_trunk = true;
    spec.stream_salt = 0;
    return train_phase(model, train, val, cfg, spec);
}

TrainHistory train_combined(ModelF& model, const Dataset& train, const Dataset& val,
                            const TrainConfig& cfg) {
    PhaseSpec spec;
    spec.active_exits = model.arch.exits;
    spec.train_trunk = true;
    spec.stream_salt = 0;
    return train_phase(model, train, val, cfg, spec);
}

TrainHistory train_individual(ModelF& model, const Dataset& train, const Dataset& val,
                              const TrainConfig& cfg) {
    const int final_exit = model.arch.exits.back();
    if (final_exit != model.arch.depth)
        throw ParameterError("train_individual expects an exit at the final layer");

    PhaseSpec phase1;
    phase1.active_exits = {final_exit};
    phase1.train_trunk = true;
    phase1.phase_number = 1;
    phase1.stream_salt = 0;
    TrainHistory history = train_phase(model, train, val, cfg, phase1);

    std::vector<int> rest;
    for (int e : model.arch.exits)
        if (e != final_exit) rest.push_back(e);
    if (!rest.empty()) {
        PhaseSpec phase2;
        phase2.active_exits = rest;
        phase2.train_trunk = false;
        phase2.phase_number = 2;
        phase2.stream_salt = 1;
        TrainHistory h2 = train_phase(model, train, val, cfg, phase2);
        const int offset = static_cast<int>(history.epochs.size());
        for (const EpochStats& e : h2.epochs) history.epochs.push_back(e);
        history.best_epoch = h2.best_epoch >= 0 ? offset + h2.best_epoch
                                                : history.best_epoch;
        history.stopped_early = h2.stopped_early;
    }
    return history;
}

std::vector<double> calibrate(ModelF& model, const Dataset& full_train) {
    const EvalResult ev = evaluate_exits(model, full_train, model.arch.exits);
    model.calibration = ev.per_exit_accuracy;
    return model.calibration;
}

namespace {

std::vector<SweepPoint> run_sweep(const std::vector<int>& params, bool depth_axis,
                                  int fixed, const Dataset& train, const Dataset& val,
                                  const Dataset& test, const TrainConfig& cfg) {
    if (params.empty()) throw ParameterError("sweep needs at least one point");
    std::vector<SweepPoint> points(params.size());
    parallel_for(params.size(), [&](std::size_t i) {
        SweepPoint& pt = points[i];
        pt.param = params[i];
        const int depth = depth_axis ? params[i] : fixed;
        const int width = depth_axis ? fixed : params[i];
        try {
            const Arch arch = Arch::single(depth, width, train.image_h(),
                                           train.image_w(), train.image_c(),
                                           train.class_count);
            pt.macs = mac_network(arch).total;
            TrainConfig point_cfg = cfg;
            point_cfg.seed = mix_seed(cfg.seed, seed_salt::kSweepPoint,
                                      static_cast<std::uint64_t>(params[i]));
            ModelF model = build_model<float>(arch, point_cfg.seed);
            train_single(model, train, val, point_cfg);
            pt.train_acc =
                evaluate_exits(model, train, arch.exits).mean_accuracy;
            pt.test_acc = evaluate_exits(model, test, arch.exits).mean_accuracy;
        } catch (const Error& e) {
            pt.error = e.what();
        }
    });
    return points;
}

}  // namespace

std::vector<SweepPoint> sweep_depth(const std::vector<int>& depths, int width,
                                    const Dataset& train, const Dataset& val,
                                    const Dataset& test, const TrainConfig& cfg) {
    return run_sweep(depths, true, width, train, val, test, cfg);
}

std::vector<SweepPoint> sweep_width(int depth, const std::vector<int>& widths,
                                    const Dataset& train, const Dataset& val,
                                    const Dataset& test, const TrainConfig& cfg) {
    return run_sweep(widths, false, depth, train, val, test, cfg);
}

DeltaAccuracyResult experiment_delta_accuracy(int depth, int width,
                                              const Dataset& train, const Dataset& val,
                                              const Dataset& test,
                                              const TrainConfig& cfg) {
    DeltaAccuracyResult result;
    result.baseline_acc.resize(static_cast<std::size_t>(depth));

    // Multiplexed baseline: an independent single-exit network per depth.
    parallel_for(static_cast<std::size_t>(depth), [&](std::size_t i) {
        const int l = static_cast<int>(i) + 1;
        TrainConfig point_cfg = cfg;
        point_cfg.seed = mix_seed(cfg.seed, seed_salt::kBankMember,
                                  static_cast<std::uint64_t>(l));
        ModelF member = build_single<float>(l, width, train.image_h(), train.image_w(),
                                            train.image_c(), train.class_count,
                                            point_cfg.seed);
        train_single(member, train, val, point_cfg);
        result.baseline_acc[i] =
            evaluate_exits(member, test, member.arch.exits).per_exit_accuracy[0];
    });

    // The multi-exit variants share the deepest bank member's seed: the
    // trunk and final head start from identical weights, and at depth 1 all
    // three procedures coincide exactly.
    const std::uint64_t multi_seed = mix_seed(cfg.seed, seed_salt::kBankMember,
                                              static_cast<std::uint64_t>(depth));
    const Arch arch = Arch::multi_exit(depth, width, train.image_h(), train.image_w(),
                                       train.image_c(), train.class_count);
    TrainConfig multi_cfg = cfg;
    multi_cfg.seed = multi_seed;

    ModelF individual = build_model<float>(arch, multi_seed);
    train_individual(individual, train, val, multi_cfg);
    result.individual_acc =
        evaluate_exits(individual, test, arch.exits).per_exit_accuracy;

    ModelF combined = build_model<float>(arch, multi_seed);
    train_combined(combined, train, val, multi_cfg);
    result.combined_acc = evaluate_exits(combined, test, arch.exits).per_exit_accuracy;

    double di = 0, dc = 0;
    for (int l = 0; l < depth; ++l) {
        di += result.individual_acc[l] - result.baseline_acc[l];
        dc += result.combined_acc[l] - result.baseline_acc[l];
    }
    result.mean_delta_individual = di / depth;
    result.mean_delta_combined = dc / depth;
    return result;
}

}  // namespace exitwise
