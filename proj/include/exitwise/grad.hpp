#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "exitwise/errors.hpp"
#include "exitwise/model.hpp"
#include "exitwise/nn.hpp"

namespace exitwise {

// Activations recorded by a training-mode forward pass for one sample.
// head_inputs hold the (possibly dropout-masked) flattened activations that
// actually fed each active head.
template <typename T>
struct ForwardCache {
    Tensor<T> input;
    std::vector<Tensor<T>> conv_activations;          // post-ReLU, per trunk layer
    std::vector<std::optional<Tensor<T>>> head_inputs;  // per head, active only
    std::vector<std::optional<Tensor<T>>> head_masks;   // per head, empty if no dropout
    std::vector<std::optional<Tensor<T>>> head_probs;   // per head, active only
    std::vector<int> active_exits;                      // ascending exit layers
};

// Gradients mirroring the model's parameter arrays.
template <typename T>
struct ModelGrads {
    std::vector<ConvGrads<T>> trunk;  // d_input unused here
    std::vector<FcGrads<T>> heads;

    static ModelGrads zero_like(const MultiExitModel<T>& model) {
        ModelGrads g;
        for (const auto& bank : model.trunk)
            g.trunk.push_back({Tensor<T>(bank.filters.shape()),
                               Tensor<T>(bank.bias.shape()), Tensor<T>{}});
        for (const auto& head : model.heads)
            g.heads.push_back({Tensor<T>(head.weights.shape()),
                               Tensor<T>(head.bias.shape()), Tensor<T>{}});
        return g;
    }

    void accumulate(const ModelGrads& other) {
        for (std::size_t i = 0; i < trunk.size(); ++i) {
            for (std::size_t k = 0; k < trunk[i].d_filters.size(); ++k)
                trunk[i].d_filters[k] += other.trunk[i].d_filters[k];
            for (std::size_t k = 0; k < trunk[i].d_bias.size(); ++k)
                trunk[i].d_bias[k] += other.trunk[i].d_bias[k];
        }
        for (std::size_t i = 0; i < heads.size(); ++i) {
            for (std::size_t k = 0; k < heads[i].d_weights.size(); ++k)
                heads[i].d_weights[k] += other.heads[i].d_weights[k];
            for (std::size_t k = 0; k < heads[i].d_bias.size(); ++k)
                heads[i].d_bias[k] += other.heads[i].d_bias[k];
        }
    }

    void scale(T factor) {
        for (auto& t : trunk) {
            for (std::size_t k = 0; k < t.d_filters.size(); ++k)
                t.d_filters[k] *= factor;
            for (std::size_t k = 0; k < t.d_bias.size(); ++k) t.d_bias[k] *= factor;
        }
        for (auto& h : heads) {
            for (std::size_t k = 0; k < h.d_weights.size(); ++k)
                h.d_weights[k] *= factor;
            for (std::size_t k = 0; k < h.d_bias.size(); ++k) h.d_bias[k] *= factor;
        }
    }

    void zero() {
        for (auto& t : trunk) {
            t.d_filters.fill(T{0});
            t.d_bias.fill(T{0});
        }
        for (auto& h : heads) {
            h.d_weights.fill(T{0});
            h.d_bias.fill(T{0});
        }
    }
};

// Training-mode forward for one sample. Dropout masks, when given, apply to
// the flattened input of each active head (inverted dropout). masks[i], when
// present, must match head i's input length.
template <typename T>
ForwardCache<T> forward_cached(const MultiExitModel<T>& model, const Tensor<T>& image,
                               const std::vector<int>& active_exits,
                               const std::vector<std::optional<Tensor<T>>>* masks = nullptr) {
    check_image_shape(model, image);
    ForwardCache<T> cache;
    cache.input = image;
    cache.active_exits = active_exits;
    cache.head_inputs.resize(model.heads.size());
    cache.head_masks.resize(model.heads.size());
    cache.head_probs.resize(model.heads.size());

    const int max_exit = active_exits.empty()
                             ? 0
                             : *std::max_element(active_exits.begin(), active_exits.end());
    const Tensor<T>* act = &cache.input;
    for (int l = 1; l < max_exit; ++l) {
        cache.conv_activations.push_back(relu(conv2d_forward(*act, model.trunk[l - 1])));
        act = &cache.conv_activations.back();
    }
    for (int exit_layer : active_exits) {
        const int head = model.arch.head_index(exit_layer);
        const Tensor<T>& src = exit_layer == 1
                                   ? cache.input
                                   : cache.conv_activations[exit_layer - 2];
        Tensor<T> flat = src.flattened();
        if (masks && (*masks)[head].has_value()) {
            const Tensor<T>& mask = *(*masks)[head];
            if (mask.size() != flat.size())
                throw DimensionError("dropout mask length mismatch on head input");
            for (std::size_t i = 0; i < flat.size(); ++i) flat[i] *= mask[i];
            cache.head_masks[head] = mask;
        }
        cache.head_probs[head] = softmax(fc_forward(flat, model.heads[head]));
        cache.head_inputs[head] = std::move(flat);
    }
    return cache;
}

// Cross-entropy summed over the cache's active exits, plus the L2 penalty
// l2_lambda * sum(w^2) over the weight tensors listed as trainable (biases
// never regularized).
template <typename T>
double sample_loss(const MultiExitModel<T>& model, const ForwardCache<T>& cache,
                   int label) {
    double loss = 0.0;
    for (int exit_layer : cache.active_exits) {
        const int head = model.arch.head_index(exit_layer);
        if (!cache.head_probs[head].has_value())
            throw StateError("forward cache is missing probabilities for exit " +
                             std::to_string(exit_layer));
        loss += cross_entropy_loss(*cache.head_probs[head], label);
    }
    return loss;
}

// Which parameters train and carry the L2 penalty.
struct TrainableSet {
    bool trunk = true;
    std::vector<int> head_indices;  // indices into model.heads

    static TrainableSet all(std::size_t head_count) {
        TrainableSet t;
        t.head_indices.resize(head_count);
        for (std::size_t i = 0; i < head_count; ++i)
            t.head_indices[i] = static_cast<int>(i);
        return t;
    }
};

template <typename T>
double l2_penalty(const MultiExitModel<T>& model, const TrainableSet& trainable,
                  double l2_lambda) {
    if (l2_lambda == 0.0) return 0.0;
    double sum = 0.0;
    if (trainable.trunk) {
        for (const auto& bank : model.trunk)
            for (std::size_t i = 0; i < bank.filters.size(); ++i)
                sum += static_cast<double>(bank.filters[i]) * bank.filters[i];
    }
    for (int h : trainable.head_indices)
        for (std::size_t i = 0; i < model.heads[h].weights.size(); ++i)
            sum += static_cast<double>(model.heads[h].weights[i]) *
                   model.heads[h].weights[i];
    return l2_lambda * sum;
}

// Backpropagation of the summed active-exit cross entropy for one sample.
// Inactive heads receive exactly zero gradient. The L2 term is added
// separately (see add_l2_gradient) because it is per-batch, not per-sample.
template <typename T>
ModelGrads<T> backward_pass(const MultiExitModel<T>& model, const ForwardCache<T>& cache,
                            int label, bool need_trunk_grads = true) {
    ModelGrads<T> grads = ModelGrads<T>::zero_like(model);
    if (cache.active_exits.empty()) return grads;

    const int max_exit =
        *std::max_element(cache.active_exits.begin(), cache.active_exits.end());
    // d(loss)/d(activation) per trunk stage; stage 0 is the input (unused).
    std::vector<Tensor<T>> d_act(static_cast<std::size_t>(max_exit));

    for (int exit_layer : cache.active_exits) {
        const int head = model.arch.head_index(exit_layer);
        if (!cache.head_probs[head].has_value() || !cache.head_inputs[head].has_value())
            throw StateError("forward cache is missing activations for exit " +
                             std::to_string(exit_layer));
        const Tensor<T>& probs = *cache.head_probs[head];
        // d(CE)/d(logits) = probs - onehot(label)
        Tensor<T> d_logits = probs;
        if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
            throw IndexError("label out of range in backward pass");
        d_logits[label] -= T{1};

        FcGrads<T> hg = fc_backward(*cache.head_inputs[head], model.heads[head], d_logits);
        if (cache.head_masks[head].has_value()) {
            const Tensor<T>& mask = *cache.head_masks[head];
            for (std::size_t i = 0; i < hg.d_input.size(); ++i)
                hg.d_input[i] *= mask[i];
        }
        grads.heads[head].d_weights = std::move(hg.d_weights);
        grads.heads[head].d_bias = std::move(hg.d_bias);

        if (need_trunk_grads && exit_layer > 1) {
            const std::size_t stage = static_cast<std::size_t>(exit_layer - 1);
            const auto& shaped = cache.conv_activations[stage - 1];
            Tensor<T> d_shaped(shaped.shape(), std::move(hg.d_input.raw()));
            if (d_act[stage].empty()) {
                d_act[stage] = std::move(d_shaped);
            } else {
                for (std::size_t i = 0; i < d_shaped.size(); ++i)
                    d_act[stage][i] += d_shaped[i];
            }
        }
    }

    if (need_trunk_grads) {
        for (int stage = max_exit - 1; stage >= 1; --stage) {
            if (d_act[stage].empty()) continue;
            const Tensor<T>& activated = cache.conv_activations[stage - 1];
            Tensor<T> d_pre = relu_backward(activated, d_act[stage]);
            const Tensor<T>& layer_in =
                stage == 1 ? cache.input : cache.conv_activations[stage - 2];
            const bool need_input = stage > 1;
            ConvGrads<T> cg =
                conv2d_backward(layer_in, model.trunk[stage - 1], d_pre, need_input);
            grads.trunk[stage - 1].d_filters = std::move(cg.d_filters);
            grads.trunk[stage - 1].d_bias = std::move(cg.d_bias);
            if (need_input) {
                if (d_act[stage - 1].empty()) {
                    d_act[stage - 1] = std::move(cg.d_input);
                } else {
                    for (std::size_t i = 0; i < cg.d_input.size(); ++i)
                        d_act[stage - 1][i] += cg.d_input[i];
                }
            }
        }
    }
    return grads;
}

// grad += 2 * lambda * w for every trainable weight tensor (never biases).
template <typename T>
void add_l2_gradient(const MultiExitModel<T>& model, const TrainableSet& trainable,
                     double l2_lambda, ModelGrads<T>& grads) {
    if (l2_lambda == 0.0) return;
    const T two_lambda = static_cast<T>(2.0 * l2_lambda);
    if (trainable.trunk) {
        for (std::size_t t = 0; t < model.trunk.size(); ++t)
            for (std::size_t i = 0; i < model.trunk[t].filters.size(); ++i)
                grads.trunk[t].d_filters[i] += two_lambda * model.trunk[t].filters[i];
    }
    for (int h : trainable.head_indices)
        for (std::size_t i = 0; i < model.heads[h].weights.size(); ++i)
            grads.heads[h].d_weights[i] += two_lambda * model.heads[h].weights[i];
}

}  // namespace exitwise
