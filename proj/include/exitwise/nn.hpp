#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>

#include "exitwise/errors.hpp"
#include "exitwise/rng.hpp"
#include "exitwise/tensor.hpp"

namespace exitwise {

// Convolution filter bank: filters are h x w x in_channels x num_filters,
// bias has one entry per filter.
template <typename T>
struct ConvFilterBank {
    Tensor<T> filters;
    Tensor<T> bias;

    std::size_t filter_h() const { return filters.extent(0); }
    std::size_t filter_w() const { return filters.extent(1); }
    std::size_t in_channels() const { return filters.extent(2); }
    std::size_t num_filters() const { return filters.extent(3); }
};

// Fully-connected weights: inputs x outputs, bias per output.
template <typename T>
struct FcWeights {
    Tensor<T> weights;
    Tensor<T> bias;

    std::size_t inputs() const { return weights.extent(0); }
    std::size_t outputs() const { return weights.extent(1); }
};

namespace detail {

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const ConvFilterBank<T>& bank) {
    if (input.rank() != 3) {
        throw DimensionError("conv input must be rank 3 (HxWxC), got shape " +
                             shape_to_string(input.shape()));
    }
    if (bank.filters.rank() != 4) {
        throw DimensionError("filter bank must be rank 4 (hxwxCxF), got shape " +
                             shape_to_string(bank.filters.shape()));
    }
    if (bank.bias.size() != bank.num_filters()) {
        throw DimensionError("conv bias length must equal filter count");
    }
    if (bank.in_channels() != input.extent(2)) {
        std::ostringstream msg;
        msg << "conv channel mismatch: input has " << input.extent(2)
            << " channels, filters expect " << bank.in_channels();
        throw DimensionError(msg.str());
    }
    if (bank.filter_h() > input.extent(0) || bank.filter_w() > input.extent(1)) {
        std::ostringstream msg;
        msg << "filter " << bank.filter_h() << "x" << bank.filter_w()
            << " larger than input " << input.extent(0) << "x" << input.extent(1);
        throw DimensionError(msg.str());
    }
}

}  // namespace detail

// Valid convolution, stride 1, no padding:
// out(y,x,f) = bias(f) + sum_{ky,kx,c} in(y+ky, x+kx, c) * filt(ky,kx,c,f).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvFilterBank<T>& bank) {
    detail::check_conv_shapes(input, bank);
    const std::size_t ih = input.extent(0), iw = input.extent(1), ic = input.extent(2);
    const std::size_t fh = bank.filter_h(), fw = bank.filter_w(), nf = bank.num_filters();
    const std::size_t oh = ih - fh + 1, ow = iw - fw + 1;

    Tensor<T> out({oh, ow, nf});
    const T* in = input.data();
    const T* filt = bank.filters.data();
    T* o = out.data();
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            T* opix = o + (oy * ow + ox) * nf;
            for (std::size_t f = 0; f < nf; ++f) opix[f] = bank.bias[f];
            for (std::size_t ky = 0; ky < fh; ++ky) {
                const T* irow = in + ((oy + ky) * iw + ox) * ic;
                const T* frow = filt + ky * fw * ic * nf;
                for (std::size_t kx = 0; kx < fw; ++kx) {
                    for (std::size_t c = 0; c < ic; ++c) {
                        const T v = irow[kx * ic + c];
                        const T* fvec = frow + (kx * ic + c) * nf;
                        for (std::size_t f = 0; f < nf; ++f) opix[f] += v * fvec[f];
                    }
                }
            }
        }
    }
    return out;
}

// Gradients of the valid convolution. d_input accumulation can be skipped
// for the first layer where it is never consumed.
template <typename T>
struct ConvGrads {
    Tensor<T> d_filters;
    Tensor<T> d_bias;
    Tensor<T> d_input;  // empty when not requested
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvFilterBank<T>& bank,
                             const Tensor<T>& d_out, bool need_input_grad) {
    detail::check_conv_shapes(input, bank);
    const std::size_t iw = input.extent(1), ic = input.extent(2);
    const std::size_t fh = bank.filter_h(), fw = bank.filter_w(), nf = bank.num_filters();
    const std::size_t oh = d_out.extent(0), ow = d_out.extent(1);
    if (d_out.extent(2) != nf || oh != input.extent(0) - fh + 1 ||
        ow != iw - fw + 1) {
        throw DimensionError("conv backward: output gradient shape mismatch");
    }

    ConvGrads<T> g;
    g.d_filters = Tensor<T>(bank.filters.shape());
    g.d_bias = Tensor<T>(bank.bias.shape());
    if (need_input_grad) g.d_input = Tensor<T>(input.shape());

    const T* in = input.data();
    const T* filt = bank.filters.data();
    const T* dout = d_out.data();
    T* df = g.d_filters.data();
    T* db = g.d_bias.data();
    T* di = need_input_grad ? g.d_input.data() : nullptr;

    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const T* dpix = dout + (oy * ow + ox) * nf;
            for (std::size_t f = 0; f < nf; ++f) db[f] += dpix[f];
            for (std::size_t ky = 0; ky < fh; ++ky) {
                const T* irow = in + ((oy + ky) * iw + ox) * ic;
                T* dirow = di ? di + ((oy + ky) * iw + ox) * ic : nullptr;
                for (std::size_t kx = 0; kx < fw; ++kx) {
                    for (std::size_t c = 0; c < ic; ++c) {
                        const std::size_t k = (ky * fw + kx) * ic + c;
                        const T v = irow[kx * ic + c];
                        const T* fvec = filt + k * nf;
                        T* dfvec = df + k * nf;
                        T acc{0};
                        for (std::size_t f = 0; f < nf; ++f) {
                            dfvec[f] += v * dpix[f];
                            acc += fvec[f] * dpix[f];
                        }
                        if (dirow) dirow[kx * ic + c] += acc;
                    }
                }
            }
        }
    }
    return g;
}

// out = input^T * weights + bias.
template <typename T>
Tensor<T> fc_forward(const Tensor<T>& input, const FcWeights<T>& w) {
    if (input.size() != w.inputs()) {
        std::ostringstream msg;
        msg << "fc input length " << input.size() << " does not match weight rows "
            << w.inputs();
        throw DimensionError(msg.str());
    }
    const std::size_t n_in = w.inputs(), n_out = w.outputs();
    Tensor<T> out({n_out});
    T* o = out.data();
    for (std::size_t j = 0; j < n_out; ++j) o[j] = w.bias[j];
    const T* in = input.data();
    const T* wt = w.weights.data();
    for (std::size_t i = 0; i < n_in; ++i) {
        const T v = in[i];
        const T* row = wt + i * n_out;
        for (std::size_t j = 0; j < n_out; ++j) o[j] += v * row[j];
    }
    return out;
}

template <typename T>
struct FcGrads {
    Tensor<T> d_weights;
    Tensor<T> d_bias;
    Tensor<T> d_input;
};

template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& input, const FcWeights<T>& w,
                       const Tensor<T>& d_out) {
    if (input.size() != w.inputs() || d_out.size() != w.outputs()) {
        throw DimensionError("fc backward: gradient shape mismatch");
    }
    const std::size_t n_in = w.inputs(), n_out = w.outputs();
    FcGrads<T> g{Tensor<T>(w.weights.shape()), Tensor<T>(w.bias.shape()),
                 Tensor<T>({n_in})};
    const T* in = input.data();
    const T* wt = w.weights.data();
    const T* d = d_out.data();
    T* dw = g.d_weights.data();
    T* din = g.d_input.data();
    for (std::size_t j = 0; j < n_out; ++j) g.d_bias[j] = d[j];
    for (std::size_t i = 0; i < n_in; ++i) {
        const T v = in[i];
        const T* wrow = wt + i * n_out;
        T* dwrow = dw + i * n_out;
        T acc{0};
        for (std::size_t j = 0; j < n_out; ++j) {
            dwrow[j] = v * d[j];
            acc += wrow[j] * d[j];
        }
        din[i] = acc;
    }
    return g;
}

// Numerically stabilized softmax (max subtraction).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    Tensor<T> out(logits.shape());
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (std::isnan(static_cast<double>(logits[i]))) {
            throw ParameterError("softmax received NaN logit");
        }
        mx = std::max(mx, logits[i]);
    }
    T sum{0};
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sum;
    return out;
}

// -log(probs[label]) with a 1e-12 probability floor.
template <typename T>
double cross_entropy_loss(const Tensor<T>& probs, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
        throw IndexError("class label " + std::to_string(label) +
                         " out of range for " + std::to_string(probs.size()) +
                         " classes");
    }
    const double p = std::max(static_cast<double>(probs[label]), 1e-12);
    return -std::log(p);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
    Tensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i)
        out[i] = input[i] > T{0} ? input[i] : T{0};
    return out;
}

// Gradient mask uses the post-activation sign (activation > 0 iff
// pre-activation > 0 for ReLU).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& activated, const Tensor<T>& d_out) {
    if (!activated.same_shape(d_out)) {
        throw DimensionError("relu backward: shape mismatch");
    }
    Tensor<T> out(d_out.shape());
    for (std::size_t i = 0; i < d_out.size(); ++i)
        out[i] = activated[i] > T{0} ? d_out[i] : T{0};
    return out;
}

// Inverted dropout mask: elements are 0 with probability 1-keep_prob, else
// 1/keep_prob, so the mask has unit expectation and inference needs no
// rescaling.
template <typename T>
Tensor<T> dropout_mask(const std::vector<std::size_t>& shape, double keep_prob,
                       Rng& rng) {
    if (keep_prob <= 0.0 || keep_prob > 1.0) {
        throw ParameterError("dropout keep probability must be in (0, 1], got " +
                             std::to_string(keep_prob));
    }
    Tensor<T> mask(shape);
    if (keep_prob == 1.0) {
        mask.fill(T{1});
        return mask;
    }
    const T inv = static_cast<T>(1.0 / keep_prob);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = unit(rng) < keep_prob ? inv : T{0};
    return mask;
}

}  // namespace exitwise
