#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "exitwise/arch.hpp"

namespace exitwise {

// Multiply-accumulate counts: the library's energy proxy. per_exit_cumulative
// holds, for each exit l in arch order, the trunk MACs through conv l-1 plus
// that exit's own head; total is the final exit's cumulative count.
struct MacBreakdown {
    std::vector<std::pair<std::string, std::int64_t>> per_layer;
    std::vector<std::int64_t> per_exit_cumulative;
    std::int64_t total = 0;
};

// Cost weights: alpha trades decision cost against execution cost; e_x and
// gamma parametrize the binary-decision energy, e_d_max normalizes.
struct CostParams {
    double alpha = 0.5;
    double e_d_max = 1.0;
    double e_x = 0.0;
    double gamma = 1.0;
};

// MACs of one valid convolution layer:
// (W_i - W_f + 1)(H_i - H_f + 1) * N_c * W_f * H_f * N_f.
std::int64_t mac_conv(int w_i, int h_i, int w_f, int h_f, int n_c, int n_f);

// MACs of a fully-connected layer: inputs * outputs.
std::int64_t mac_fc(std::int64_t n_u, std::int64_t n_y);

// Per-layer and per-exit MAC counts for an architecture.
MacBreakdown mac_network(const Arch& arch);

// MACs of conv layer l at index l-1 (size depth-1).
std::vector<std::int64_t> trunk_conv_macs(const Arch& arch);

// MACs of each exit head, in arch.exits order.
std::vector<std::int64_t> exit_head_macs(const Arch& arch);

// Normalized decision cost C_D = E_D / E_Dmax.
double decision_cost(double e_d, double e_d_max);

// Total cost C = alpha * C_D + (1 - alpha) * C_X.
double total_cost(double c_d, double c_x, double alpha);

// Expected energy of a binary decision:
// E[E] = E_D + A * E_X + (1 - A) * gamma * E_X.
double expected_binary_energy(double e_d, double e_x, double gamma, double accuracy);

}  // namespace exitwise
