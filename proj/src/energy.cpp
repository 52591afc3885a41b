#include "exitwise/energy.hpp"

#include <sstream>

#include "exitwise/errors.hpp"

namespace exitwise {

std::int64_t mac_conv(int w_i, int h_i, int w_f, int h_f, int n_c, int n_f) {
    if (w_i < 1 || h_i < 1 || w_f < 1 || h_f < 1 || n_c < 1 || n_f < 1) {
        throw ParameterError("mac_conv arguments must be positive");
    }
    if (w_f > w_i || h_f > h_i) {
        std::ostringstream msg;
        msg << "filter " << w_f << "x" << h_f << " larger than input " << w_i << "x"
            << h_i;
        throw GeometryError(msg.str());
    }
    return static_cast<std::int64_t>(w_i - w_f + 1) * (h_i - h_f + 1) * n_c * w_f *
           h_f * n_f;
}

std::int64_t mac_fc(std::int64_t n_u, std::int64_t n_y) {
    if (n_u < 1 || n_y < 1) throw ParameterError("mac_fc arguments must be positive");
    return n_u * n_y;
}

MacBreakdown mac_network(const Arch& arch) {
    arch.validate();
    MacBreakdown mb;
    // Conv MACs, indexed by the layer they feed into.
    std::vector<std::int64_t> conv_macs(static_cast<std::size_t>(arch.depth), 0);
    for (int l = 1; l < arch.depth; ++l) {
        const ActivationDims in = arch.dims_after_convs(l - 1);
        conv_macs[l] = mac_conv(in.w, in.h, kFilterSize, kFilterSize, in.c, arch.width);
        mb.per_layer.emplace_back("conv" + std::to_string(l), conv_macs[l]);
    }
    // trunk_prefix[l] = conv MACs needed before exit l can classify.
    std::vector<std::int64_t> trunk_prefix(static_cast<std::size_t>(arch.depth) + 1, 0);
    for (int l = 1; l < arch.depth; ++l)
        trunk_prefix[l + 1] = trunk_prefix[l] + conv_macs[l];

    for (int e : arch.exits) {
        const std::int64_t head = mac_fc(arch.flatten_size(e), arch.classes);
        mb.per_layer.emplace_back("head" + std::to_string(e), head);
        mb.per_exit_cumulative.push_back(trunk_prefix[e] + head);
    }
    mb.total = mb.per_exit_cumulative.back();
    return mb;
}

std::vector<std::int64_t> trunk_conv_macs(const Arch& arch) {
    std::vector<std::int64_t> macs;
    for (int l = 1; l < arch.depth; ++l) {
        const ActivationDims in = arch.dims_after_convs(l - 1);
        macs.push_back(mac_conv(in.w, in.h, kFilterSize, kFilterSize, in.c, arch.width));
    }
    return macs;
}

std::vector<std::int64_t> exit_head_macs(const Arch& arch) {
    std::vector<std::int64_t> macs;
    for (int e : arch.exits) macs.push_back(mac_fc(arch.flatten_size(e), arch.classes));
    return macs;
}

double decision_cost(double e_d, double e_d_max) {
    if (e_d_max <= 0.0) throw ParameterError("e_d_max must be positive");
    return e_d / e_d_max;
}

double total_cost(double c_d, double c_x, double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw ParameterError("alpha must lie in [0, 1], got " + std::to_string(alpha));
    return alpha * c_d + (1.0 - alpha) * c_x;
}

double expected_binary_energy(double e_d, double e_x, double gamma, double accuracy) {
    if (gamma < 1.0)
        throw ParameterError("gamma must be >= 1, got " + std::to_string(gamma));
    if (accuracy < 0.0 || accuracy > 1.0)
        throw ParameterError("accuracy must lie in [0, 1]");
    return e_d + accuracy * e_x + (1.0 - accuracy) * gamma * e_x;
}

}  // namespace exitwise
