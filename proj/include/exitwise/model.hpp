#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "exitwise/arch.hpp"
#include "exitwise/nn.hpp"
#include "exitwise/rng.hpp"
#include "exitwise/tensor.hpp"

namespace exitwise {

// Shared-trunk CNN with one softmax head per exit. heads[i] serves
// arch.exits[i]. calibration, when present, holds the per-exit training-set
// accuracy used by the dynamic exit policy.
template <typename T>
struct MultiExitModel {
    Arch arch;
    std::vector<ConvFilterBank<T>> trunk;
    std::vector<FcWeights<T>> heads;
    std::vector<double> calibration;

    bool has_calibration() const {
        return calibration.size() == arch.exits.size() && !calibration.empty();
    }

    template <typename U>
    MultiExitModel<U> cast() const {
        MultiExitModel<U> out;
        out.arch = arch;
        for (const auto& bank : trunk)
            out.trunk.push_back({bank.filters.template cast<U>(),
                                 bank.bias.template cast<U>()});
        for (const auto& head : heads)
            out.heads.push_back({head.weights.template cast<U>(),
                                 head.bias.template cast<U>()});
        out.calibration = calibration;
        return out;
    }
};

using ModelF = MultiExitModel<float>;
using ModelD = MultiExitModel<double>;

namespace detail {

// Conv filters: fan-in-scaled Gaussian (std = sqrt(2/fan_in)), zero bias.
template <typename T>
ConvFilterBank<T> init_conv(int in_c, int out_c, Rng& rng) {
    const std::size_t k = kFilterSize;
    ConvFilterBank<T> bank{
        Tensor<T>({k, k, static_cast<std::size_t>(in_c), static_cast<std::size_t>(out_c)}),
        Tensor<T>({static_cast<std::size_t>(out_c)})};
    const double fan_in = static_cast<double>(k * k * in_c);
    std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / fan_in));
    for (std::size_t i = 0; i < bank.filters.size(); ++i)
        bank.filters[i] = static_cast<T>(gauss(rng));
    return bank;
}

// FC heads: uniform +-sqrt(6/(fan_in+fan_out)), zero bias.
template <typename T>
FcWeights<T> init_fc(std::int64_t inputs, int outputs, Rng& rng) {
    FcWeights<T> head{
        Tensor<T>({static_cast<std::size_t>(inputs), static_cast<std::size_t>(outputs)}),
        Tensor<T>({static_cast<std::size_t>(outputs)})};
    const double bound = std::sqrt(6.0 / (static_cast<double>(inputs) + outputs));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (std::size_t i = 0; i < head.weights.size(); ++i)
        head.weights[i] = static_cast<T>(uniform(rng));
    return head;
}

}  // namespace detail

template <typename T>
MultiExitModel<T> build_model(const Arch& arch, std::uint64_t seed) {
    arch.validate();
    MultiExitModel<T> model;
    model.arch = arch;
    for (int l = 1; l < arch.depth; ++l) {
        Rng rng(mix_seed(seed, seed_salt::kConvLayer, static_cast<std::uint64_t>(l)));
        const int in_c = l == 1 ? arch.in_c : arch.width;
        model.trunk.push_back(detail::init_conv<T>(in_c, arch.width, rng));
    }
    for (int e : arch.exits) {
        Rng rng(mix_seed(seed, seed_salt::kHead, static_cast<std::uint64_t>(e)));
        model.heads.push_back(
            detail::init_fc<T>(arch.flatten_size(e), arch.classes, rng));
    }
    return model;
}

template <typename T>
MultiExitModel<T> build_single(int depth, int width, int in_h, int in_w, int in_c,
                               int classes, std::uint64_t seed) {
    return build_model<T>(Arch::single(depth, width, in_h, in_w, in_c, classes), seed);
}

template <typename T>
MultiExitModel<T> build_multi_exit(int depth, int width, int in_h, int in_w,
                                   int in_c, int classes, std::uint64_t seed) {
    return build_model<T>(Arch::multi_exit(depth, width, in_h, in_w, in_c, classes),
                          seed);
}

// Exact parameter count from the layer plan alone.
inline std::int64_t count_params(const Arch& arch) {
    std::int64_t total = 0;
    for (int l = 1; l < arch.depth; ++l) {
        const std::int64_t in_c = l == 1 ? arch.in_c : arch.width;
        total += static_cast<std::int64_t>(kFilterSize) * kFilterSize * in_c *
                     arch.width +
                 arch.width;
    }
    for (int e : arch.exits)
        total += arch.flatten_size(e) * arch.classes + arch.classes;
    return total;
}

// Exact parameter count from the stored arrays.
template <typename T>
std::int64_t count_params(const MultiExitModel<T>& model) {
    std::int64_t total = 0;
    for (const auto& bank : model.trunk)
        total += static_cast<std::int64_t>(bank.filters.size() + bank.bias.size());
    for (const auto& head : model.heads)
        total += static_cast<std::int64_t>(head.weights.size() + head.bias.size());
    return total;
}

// Parameter count of the multiplexed bank: independent single-exit networks
// of every depth 1..max_depth sharing the deepest network's geometry.
inline std::int64_t count_params_bank(int max_depth, int width, int in_h, int in_w,
                                      int in_c, int classes) {
    std::int64_t total = 0;
    for (int depth = 1; depth <= max_depth; ++depth)
        total += count_params(Arch::single(depth, width, in_h, in_w, in_c, classes));
    return total;
}

template <typename T>
void check_image_shape(const MultiExitModel<T>& model, const Tensor<T>& image) {
    const Arch& a = model.arch;
    if (image.rank() != 3 || image.extent(0) != static_cast<std::size_t>(a.in_h) ||
        image.extent(1) != static_cast<std::size_t>(a.in_w) ||
        image.extent(2) != static_cast<std::size_t>(a.in_c)) {
        throw DimensionError("image shape " + shape_to_string(image.shape()) +
                             " does not match architecture input " +
                             std::to_string(a.in_h) + "x" + std::to_string(a.in_w) +
                             "x" + std::to_string(a.in_c));
    }
}

// Probability vectors for every exit; the trunk is computed once and shared.
template <typename T>
std::vector<Tensor<T>> forward_all_exits(const MultiExitModel<T>& model,
                                         const Tensor<T>& image) {
    check_image_shape(model, image);
    std::vector<Tensor<T>> probs;
    probs.reserve(model.heads.size());
    Tensor<T> act = image;
    int convs_done = 0;
    for (std::size_t i = 0; i < model.arch.exits.size(); ++i) {
        const int exit_layer = model.arch.exits[i];
        while (convs_done < exit_layer - 1) {
            act = relu(conv2d_forward(act, model.trunk[convs_done]));
            ++convs_done;
        }
        probs.push_back(softmax(fc_forward(act.flattened(), model.heads[i])));
    }
    // Degenerate arches may leave trailing convs unused; they feed no exit.
    return probs;
}

// Incremental evaluator for the dynamic exit policy: computes trunk layers
// and heads only when asked, and remembers what has been computed.
template <typename T>
class LazyExitEvaluator {
public:
    LazyExitEvaluator(const MultiExitModel<T>& model, const Tensor<T>& image)
        : model_(&model), act_(image) {
        check_image_shape(model, image);
        head_probs_.resize(model.heads.size());
    }

    // Probability vector of the given exit layer, computing missing trunk
    // layers and the head on first use.
    const Tensor<T>& exit_probs(int exit_layer) {
        const int head = model_->arch.head_index(exit_layer);
        if (!head_probs_[head].has_value()) {
            while (convs_done_ < exit_layer - 1) {
                act_ = relu(conv2d_forward(act_, model_->trunk[convs_done_]));
                ++convs_done_;
            }
            head_probs_[head] =
                softmax(fc_forward(act_.flattened(), model_->heads[head]));
            heads_evaluated_.push_back(exit_layer);
        }
        return *head_probs_[head];
    }

    int convs_computed() const { return convs_done_; }
    const std::vector<int>& heads_evaluated() const { return heads_evaluated_; }

private:
    const MultiExitModel<T>* model_;
    Tensor<T> act_;
    int convs_done_ = 0;
    std::vector<std::optional<Tensor<T>>> head_probs_;
    std::vector<int> heads_evaluated_;
};

}  // namespace exitwise
