#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "exitwise/errors.hpp"

namespace exitwise {

constexpr int kFilterSize = 3;  // all architectures use 3x3 filters

// Spatial extents of an activation map.
struct ActivationDims {
    int h = 0, w = 0, c = 0;
    std::int64_t flat() const {
        return static_cast<std::int64_t>(h) * w * c;
    }
};

// Layer plan for a shared-trunk CNN: depth L means L-1 convolutional layers
// of equal width followed by one fully-connected softmax head per exit.
// Exit l (1-based) classifies from the activation after l-1 conv layers;
// a single-exit net has exits = {L}, a multi-exit net exits = {1..L}.
struct Arch {
    int depth = 1;
    int width = 1;
    int in_h = 0, in_w = 0, in_c = 0;
    int classes = 0;
    std::vector<int> exits;

    ActivationDims dims_after_convs(int convs) const {
        ActivationDims d;
        d.h = in_h - 2 * convs;
        d.w = in_w - 2 * convs;
        d.c = convs == 0 ? in_c : width;
        return d;
    }

    std::int64_t flatten_size(int exit_layer) const {
        return dims_after_convs(exit_layer - 1).flat();
    }

    int head_index(int exit_layer) const {
        for (std::size_t i = 0; i < exits.size(); ++i)
            if (exits[i] == exit_layer) return static_cast<int>(i);
        throw ParameterError("no exit at layer " + std::to_string(exit_layer));
    }

    bool is_single_exit() const { return exits.size() == 1; }

    void validate() const {
        if (depth < 1) throw GeometryError("depth must be >= 1");
        if (width < 1) throw GeometryError("width must be >= 1");
        if (in_h < 1 || in_w < 1 || in_c < 1)
            throw GeometryError("input shape extents must be >= 1");
        if (classes < 2) throw GeometryError("class count must be >= 2");
        for (int l = 1; l < depth; ++l) {
            const ActivationDims d = dims_after_convs(l);
            if (d.h < 1 || d.w < 1) {
                std::ostringstream msg;
                msg << "conv layer " << l << " reduces activation to " << d.h << "x"
                    << d.w << " (input " << in_h << "x" << in_w << " supports at most "
                    << (std::min(in_h, in_w) - 1) / 2 << " conv layers)";
                throw GeometryError(msg.str());
            }
        }
        if (exits.empty()) throw GeometryError("arch needs at least one exit");
        int prev = 0;
        for (int e : exits) {
            if (e < 1 || e > depth)
                throw GeometryError("exit layer " + std::to_string(e) +
                                    " outside 1.." + std::to_string(depth));
            if (e <= prev) throw GeometryError("exit layers must be ascending");
            prev = e;
        }
    }

    static Arch single(int depth, int width, int in_h, int in_w, int in_c,
                       int classes) {
        Arch a{depth, width, in_h, in_w, in_c, classes, {depth}};
        a.validate();
        return a;
    }

    static Arch multi_exit(int depth, int width, int in_h, int in_w, int in_c,
                           int classes) {
        Arch a{depth, width, in_h, in_w, in_c, classes, {}};
        a.exits.resize(depth);
        std::iota(a.exits.begin(), a.exits.end(), 1);
        a.validate();
        return a;
    }

    friend bool operator==(const Arch& a, const Arch& b) = default;
};

}  // namespace exitwise
