#pragma once

// Independent reference implementations used to validate the library. These
// deliberately avoid the library's optimized code paths: plain nested loops,
// brute-force enumeration and grid search only.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "exitwise/dataset.hpp"
#include "exitwise/model.hpp"
#include "exitwise/nn.hpp"
#include "exitwise/tensor.hpp"

namespace oracle {

// Six-nested-loop valid convolution.
template <typename T>
exitwise::Tensor<T> naive_conv2d(const exitwise::Tensor<T>& input,
                                 const exitwise::ConvFilterBank<T>& bank) {
    const std::size_t oh = input.extent(0) - bank.filter_h() + 1;
    const std::size_t ow = input.extent(1) - bank.filter_w() + 1;
    const std::size_t nf = bank.num_filters();
    exitwise::Tensor<T> out({oh, ow, nf});
    for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox)
            for (std::size_t f = 0; f < nf; ++f) {
                T acc = bank.bias[f];
                for (std::size_t ky = 0; ky < bank.filter_h(); ++ky)
                    for (std::size_t kx = 0; kx < bank.filter_w(); ++kx)
                        for (std::size_t c = 0; c < bank.in_channels(); ++c)
                            acc += input.at3(oy + ky, ox + kx, c) *
                                   bank.filters.at4(ky, kx, c, f);
                out.at3(oy, ox, f) = acc;
            }
    return out;
}

// Multiplication counter for the same loops; the MAC model must equal this.
inline std::int64_t count_conv_multiplies(int w_i, int h_i, int w_f, int h_f,
                                          int n_c, int n_f) {
    std::int64_t count = 0;
    for (int oy = 0; oy <= h_i - h_f; ++oy)
        for (int ox = 0; ox <= w_i - w_f; ++ox)
            for (int f = 0; f < n_f; ++f)
                for (int ky = 0; ky < h_f; ++ky)
                    for (int kx = 0; kx < w_f; ++kx)
                        for (int c = 0; c < n_c; ++c) ++count;
    return count;
}

// Hand-rolled dot products for the fully-connected layer.
template <typename T>
exitwise::Tensor<T> naive_fc(const exitwise::Tensor<T>& input,
                             const exitwise::FcWeights<T>& w) {
    exitwise::Tensor<T> out({w.outputs()});
    for (std::size_t j = 0; j < w.outputs(); ++j) {
        T acc = w.bias[j];
        for (std::size_t i = 0; i < w.inputs(); ++i)
            acc += input[i] * w.weights.at2(i, j);
        out[j] = acc;
    }
    return out;
}

// Central finite difference of a scalar function of one parameter.
inline double central_difference(const std::function<double()>& f, double& param,
                                 double step = 1e-5) {
    const double saved = param;
    param = saved + step;
    const double hi = f();
    param = saved - step;
    const double lo = f();
    param = saved;
    return (hi - lo) / (2.0 * step);
}

// Grid argmin of an arbitrary scalar function over [lo, hi].
inline double grid_argmin(const std::function<double(double)>& f, double lo,
                          double hi, double step) {
    double best_x = lo;
    double best = f(lo);
    for (double x = lo + step; x <= hi + step * 0.5; x += step) {
        const double v = f(std::min(x, hi));
        if (v < best) {
            best = v;
            best_x = std::min(x, hi);
        }
    }
    return best_x;
}

// Nearest-class-mean classifier accuracy: estimates templates from one
// dataset and scores another.
inline double nearest_mean_accuracy(const exitwise::Dataset& train,
                                    const exitwise::Dataset& test) {
    const std::size_t dim = train.images.front().pixels.size();
    std::vector<std::vector<double>> means(
        static_cast<std::size_t>(train.class_count), std::vector<double>(dim, 0.0));
    std::vector<std::int64_t> counts(static_cast<std::size_t>(train.class_count), 0);
    for (const auto& img : train.images) {
        auto& m = means[static_cast<std::size_t>(img.label)];
        for (std::size_t k = 0; k < dim; ++k) m[k] += img.pixels[k];
        ++counts[static_cast<std::size_t>(img.label)];
    }
    for (std::size_t c = 0; c < means.size(); ++c)
        if (counts[c])
            for (double& v : means[c]) v /= static_cast<double>(counts[c]);

    std::int64_t correct = 0;
    for (const auto& img : test.images) {
        int best = -1;
        double best_dist = 0;
        for (std::size_t c = 0; c < means.size(); ++c) {
            double d = 0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double diff = img.pixels[k] - means[c][k];
                d += diff * diff;
            }
            if (best < 0 || d < best_dist) {
                best = static_cast<int>(c);
                best_dist = d;
            }
        }
        correct += best == img.label;
    }
    return static_cast<double>(correct) / static_cast<double>(test.images.size());
}

// Brute-force parameter enumeration: total length of every stored array.
template <typename T>
std::int64_t enumerate_params(const exitwise::MultiExitModel<T>& model) {
    std::int64_t n = 0;
    for (const auto& bank : model.trunk) {
        n += static_cast<std::int64_t>(bank.filters.raw().size());
        n += static_cast<std::int64_t>(bank.bias.raw().size());
    }
    for (const auto& head : model.heads) {
        n += static_cast<std::int64_t>(head.weights.raw().size());
        n += static_cast<std::int64_t>(head.bias.raw().size());
    }
    return n;
}

}  // namespace oracle
