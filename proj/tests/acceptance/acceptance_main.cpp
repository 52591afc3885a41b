// Acceptance suite: one pass/fail line per criterion. Every tolerance is
// pinned here in code; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "exitwise/dataset.hpp"
#include "exitwise/energy.hpp"
#include "exitwise/fit.hpp"
#include "exitwise/grad.hpp"
#include "exitwise/model.hpp"
#include "exitwise/optimal.hpp"
#include "exitwise/policy.hpp"
#include "exitwise/training.hpp"
#include "oracles.hpp"

using namespace exitwise;

namespace {

struct Criterion {
    std::string name;
    std::function<void()> body;
};

#define ACCEPT(cond, msg)                                        \
    do {                                                         \
        if (!(cond)) {                                           \
            std::ostringstream oss;                              \
            oss << msg;                                          \
            throw std::runtime_error(oss.str());                 \
        }                                                        \
    } while (0)

// --- shared desk-scale setup (criteria 6 and 7) -----------------------------

struct DeskSetup {
    Dataset train, val, test, full_train;
    ModelF combined_model;
    DeltaAccuracyResult delta;
};

constexpr int kDeskClasses = 10;
constexpr int kDeskImage = 12;
constexpr int kDeskDepth = 6;
constexpr int kDeskWidth = 8;
constexpr double kDeskSeparation = 2.5;
constexpr std::uint64_t kDeskSeed = 424242;

const DeskSetup& desk_setup() {
    static const DeskSetup setup = [] {
        DeskSetup s;
        s.full_train = synthetic_blobs(60, kDeskClasses, kDeskImage, kDeskImage, 1,
                                       kDeskSeparation, kDeskSeed, 0);
        auto [train, val] = split_validation(s.full_train, 0.15, kDeskSeed);
        s.train = std::move(train);
        s.val = std::move(val);
        s.test = synthetic_blobs(40, kDeskClasses, kDeskImage, kDeskImage, 1,
                                 kDeskSeparation, kDeskSeed, 1);

        TrainConfig cfg;
        cfg.seed = kDeskSeed;
        cfg.lr = 3e-3;
        cfg.max_epochs = 150;
        cfg.patience = 30;
        cfg.batch_size = 32;

        // The combined model mirrors the one inside the delta experiment
        // (same seed derivation), so criteria 6 and 7 inspect the same
        // training procedure the comparison uses.
        const Arch arch = Arch::multi_exit(kDeskDepth, kDeskWidth, kDeskImage,
                                           kDeskImage, 1, kDeskClasses);
        TrainConfig multi_cfg = cfg;
        multi_cfg.seed = mix_seed(cfg.seed, seed_salt::kBankMember,
                                  static_cast<std::uint64_t>(kDeskDepth));
        s.combined_model = build_model<float>(arch, multi_cfg.seed);
        train_combined(s.combined_model, s.train, s.val, multi_cfg);
        calibrate(s.combined_model, s.full_train);

        s.delta = experiment_delta_accuracy(kDeskDepth, kDeskWidth, s.train, s.val,
                                            s.test, cfg);
        return s;
    }();
    return setup;
}

// --- criteria ----------------------------------------------------------------

void criterion_param_counts() {
    const std::int64_t multi = count_params(Arch::multi_exit(6, 64, 32, 32, 3, 10));
    ACCEPT(multi == 2369084, "multi-exit parameter count " << multi
                                                           << " != 2369084");
    const ModelF model = build_model<float>(Arch::multi_exit(6, 64, 32, 32, 3, 10), 1);
    ACCEPT(oracle::enumerate_params(model) == 2369084,
           "stored-array enumeration disagrees");
    const std::int64_t bank = count_params_bank(6, 64, 32, 32, 3, 10);
    ACCEPT(bank == 2597820, "bank parameter count " << bank << " != 2597820");
    const double reduction = static_cast<double>(bank - multi) /
                             static_cast<double>(bank);
    ACCEPT(std::abs(reduction - 0.088) < 0.001,
           "reduction " << reduction << " not ~8.8%");
}

void criterion_mac_oracle() {
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<int> dim(3, 24), fdim(1, 3), chan(1, 8), filt(1, 8);
    for (int trial = 0; trial < 100; ++trial) {
        const int w_i = dim(rng), h_i = dim(rng);
        const int w_f = fdim(rng), h_f = fdim(rng);
        const int n_c = chan(rng), n_f = filt(rng);
        const std::int64_t model_macs = mac_conv(w_i, h_i, w_f, h_f, n_c, n_f);
        const std::int64_t counted =
            oracle::count_conv_multiplies(w_i, h_i, w_f, h_f, n_c, n_f);
        ACCEPT(model_macs == counted, "mac_conv(" << w_i << "," << h_i << ",...) = "
                                                  << model_macs << " but oracle "
                                                  << counted);
    }
}

void criterion_closed_form() {
    std::mt19937_64 rng(5678);
    std::uniform_real_distribution<double> a_dist(0.005, 0.05), b_dist(3.0, 8.0),
        alpha_dist(0.02, 0.98), gamma_dist(1.1, 6.0), ratio_dist(0.05, 3.0);
    int accepted = 0;
    while (accepted < 100) {
        ExpFit fit;
        fit.a = a_dist(rng);
        fit.b = b_dist(rng);
        const double alpha = alpha_dist(rng);
        const OptimalAccuracy closed = optimal_accuracy_alpha(fit, alpha);
        if (closed.clamped() || closed.value < 0.05 || closed.value > 0.95) continue;

        const double gamma = gamma_dist(rng);
        const double ratio = ratio_dist(rng);
        const OptimalAccuracy binary = optimal_accuracy_binary(fit, gamma, ratio, 1.0);
        if (binary.clamped() || binary.value < 0.05 || binary.value > 0.95) continue;
        ++accepted;

        const double cost_grid = oracle::grid_argmin(
            [&](double a) { return total_cost(fit(a), 1.0 - a, alpha); }, 0.0, 1.0,
            1e-4);
        ACCEPT(std::abs(closed.value - cost_grid) <= 1e-4,
               "alpha closed form " << closed.value << " vs grid " << cost_grid);

        const double energy_grid = oracle::grid_argmin(
            [&](double a) { return expected_binary_energy(fit(a), ratio, gamma, a); },
            0.0, 1.0, 1e-4);
        ACCEPT(std::abs(binary.value - energy_grid) <= 1e-4,
               "binary closed form " << binary.value << " vs grid " << energy_grid);

        const double alpha_equiv = alpha_from_binary(gamma, ratio, 1.0);
        const OptimalAccuracy via_alpha = optimal_accuracy_alpha(fit, alpha_equiv);
        ACCEPT(std::abs(binary.value - via_alpha.value) <= 1e-12,
               "alpha-substitution identity violated by "
                   << std::abs(binary.value - via_alpha.value));
    }
}

void criterion_gradients() {
    ModelD model = build_multi_exit<double>(3, 4, 8, 8, 2, 5, 97531);
    ACCEPT(oracle::enumerate_params(model) <= 5000, "model exceeds 5k parameters");
    Rng rng(24);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Tensor<double>> images;
    std::vector<int> labels;
    for (int s = 0; s < 2; ++s) {
        Tensor<double> img({8, 8, 2});
        for (std::size_t i = 0; i < img.size(); ++i) img[i] = unit(rng);
        images.push_back(std::move(img));
        labels.push_back((2 * s + 1) % 5);
    }
    const std::vector<int> active{1, 2, 3};
    const double lambda = 0.001;
    const TrainableSet trainable = TrainableSet::all(model.heads.size());

    auto loss = [&] {
        double total = 0;
        for (std::size_t s = 0; s < images.size(); ++s) {
            ForwardCache<double> cache = forward_cached(model, images[s], active);
            total += sample_loss(model, cache, labels[s]);
        }
        return total + l2_penalty(model, trainable, lambda);
    };
    ModelGrads<double> grads = ModelGrads<double>::zero_like(model);
    for (std::size_t s = 0; s < images.size(); ++s) {
        ForwardCache<double> cache = forward_cached(model, images[s], active);
        grads.accumulate(backward_pass(model, cache, labels[s]));
    }
    add_l2_gradient(model, trainable, lambda, grads);

    std::int64_t checked = 0;
    auto check_param = [&](double& param, double analytic, const char* where) {
        const double fd = oracle::central_difference(loss, param, 1e-5);
        const double rel = std::abs(analytic - fd) /
                           std::max({1.0, std::abs(analytic), std::abs(fd)});
        ACCEPT(rel <= 1e-6, "gradient mismatch in " << where << ": analytic "
                                                    << analytic << " fd " << fd
                                                    << " rel " << rel);
        ++checked;
    };
    for (std::size_t t = 0; t < model.trunk.size(); ++t) {
        for (std::size_t i = 0; i < model.trunk[t].filters.size(); ++i)
            check_param(model.trunk[t].filters[i], grads.trunk[t].d_filters[i],
                        "conv filters");
        for (std::size_t i = 0; i < model.trunk[t].bias.size(); ++i)
            check_param(model.trunk[t].bias[i], grads.trunk[t].d_bias[i],
                        "conv bias");
    }
    for (std::size_t h = 0; h < model.heads.size(); ++h) {
        for (std::size_t i = 0; i < model.heads[h].weights.size(); ++i)
            check_param(model.heads[h].weights[i], grads.heads[h].d_weights[i],
                        "head weights");
        for (std::size_t i = 0; i < model.heads[h].bias.size(); ++i)
            check_param(model.heads[h].bias[i], grads.heads[h].d_bias[i],
                        "head bias");
    }
    ACCEPT(checked == oracle::enumerate_params(model),
           "not every parameter was checked");
}

void criterion_fit_recovery() {
    std::vector<CurvePoint> exp_pts;
    for (double a : {0.12, 0.3, 0.45, 0.6, 0.72, 0.85})
        exp_pts.emplace_back(a, 0.02 * std::exp(4.0 * a));
    const ExpFit efit = fit_exponential(exp_pts);
    ACCEPT(std::abs(efit.a - 0.02) <= 1e-6 && std::abs(efit.b - 4.0) <= 1e-6,
           "exponential recovery off: a=" << efit.a << " b=" << efit.b);

    std::vector<CurvePoint> rat_pts;
    for (double a : {0.15, 0.3, 0.45, 0.6, 0.75, 0.9})
        rat_pts.emplace_back(a, 0.05 * (a - 0.1) / (1.0 - 0.9 * a));
    const RatFit rfit = fit_rational(rat_pts);
    ACCEPT(std::abs(rfit.a - 0.05) <= 1e-6 && std::abs(rfit.b - 0.9) <= 1e-6,
           "rational recovery off: a=" << rfit.a << " b=" << rfit.b);
}

void criterion_desk_training() {
    const DeskSetup& s = desk_setup();

    // (a) every exit beats 3x chance on the test set.
    const EvalResult ev =
        evaluate_exits(s.combined_model, s.test, s.combined_model.arch.exits);
    for (std::size_t i = 0; i < ev.per_exit_accuracy.size(); ++i)
        ACCEPT(ev.per_exit_accuracy[i] >= 0.3,
               "exit " << i + 1 << " test accuracy " << ev.per_exit_accuracy[i]
                       << " below 3x chance (0.3)");

    // (b) mean exit confidence non-decreasing with depth within 0.02.
    std::vector<double> mean_conf(ev.per_exit_accuracy.size(), 0.0);
    for (const LabeledImage& img : s.test.images) {
        const auto probs = forward_all_exits(s.combined_model, img.pixels);
        for (std::size_t e = 0; e < probs.size(); ++e)
            mean_conf[e] += confidence(probs[e]);
    }
    for (double& c : mean_conf) c /= static_cast<double>(s.test.size());
    for (std::size_t e = 1; e < mean_conf.size(); ++e)
        ACCEPT(mean_conf[e] >= mean_conf[e - 1] - 0.02,
               "mean confidence drops from exit " << e << " (" << mean_conf[e - 1]
                                                  << ") to exit " << e + 1 << " ("
                                                  << mean_conf[e] << ")");

    // (c) combined training at least matches two-phase individual training.
    ACCEPT(s.delta.mean_delta_combined >= s.delta.mean_delta_individual,
           "mean delta combined " << s.delta.mean_delta_combined
                                  << " < individual "
                                  << s.delta.mean_delta_individual);
}

void criterion_policy_dominance() {
    const DeskSetup& s = desk_setup();
    const FixedDepthBaseline baseline =
        fixed_depth_baseline(s.combined_model, s.test);

    std::vector<double> grid;
    for (int i = 0; i <= 50; ++i) grid.push_back(static_cast<double>(i) / 50.0);

    bool strictly_positive = false;
    for (const auto& [b1, b2] :
         std::vector<std::pair<double, double>>{{1.0, 1.0}, {0.8, 1.1}}) {
        const auto curve = energy_accuracy_with_policy(s.combined_model, s.test,
                                                       grid, b1, b2, &baseline);
        for (const PolicyCurvePoint& pt : curve) {
            ACCEPT(pt.savings >= -1e-12,
                   "negative savings " << pt.savings << " at desired=" << pt.desired
                                       << " betas=(" << b1 << "," << b2 << ")");
            if (pt.savings > 0.0) strictly_positive = true;
        }
    }
    ACCEPT(strictly_positive, "no policy point shows strictly positive savings");

    // Exit-1 forcing: a desired accuracy below beta_acc * A_train_1 keeps
    // everything in the first exit at exactly the head-1 cost.
    ExitPolicyParams force1{0.0, 1.0, 1.0, s.combined_model.calibration};
    const PolicyReport r1 = evaluate_policy(s.combined_model, s.test, force1,
                                            &baseline);
    ACCEPT(r1.usage_histogram[0] == static_cast<std::int64_t>(s.test.size()),
           "desired accuracy 0 did not force exit 1");
    const auto head_macs = exit_head_macs(s.combined_model.arch);
    ACCEPT(r1.mean_macs == static_cast<double>(head_macs[0]),
           "forced exit-1 energy " << r1.mean_macs << " != head MACs "
                                   << head_macs[0]);

    // Fallback regime: unreachable thresholds route every sample to the
    // final layer at exactly the fixed-depth cost.
    ExitPolicyParams unreachable{1.0, 0.25, 1.2, s.combined_model.calibration};
    const PolicyReport rL = evaluate_policy(s.combined_model, s.test, unreachable,
                                            &baseline);
    ACCEPT(rL.usage_histogram.back() == static_cast<std::int64_t>(s.test.size()),
           "unreachable thresholds did not fall back to the final exit");
    ACCEPT(rL.mean_macs == static_cast<double>(baseline.max_macs),
           "fallback energy " << rL.mean_macs << " != fixed-depth "
                              << baseline.max_macs);
}

void criterion_region_map_limits() {
    ExpFit fit;
    fit.a = 0.02;
    fit.b = 4.0;
    AchievableSet achievable{{1, 0.35, 0.02}, {2, 0.52, 0.1}, {3, 0.63, 0.3},
                             {4, 0.71, 0.55}, {5, 0.76, 0.8}, {6, 0.80, 1.0}};

    std::vector<double> ratios;
    for (int i = 0; i < 20; ++i) ratios.push_back(std::pow(10.0, -3.0 + 0.3 * i));

    const RegionMap ones = region_map(fit, achievable, {1.0}, ratios);
    for (int d : ones.depths)
        ACCEPT(d == 1, "gamma=1 cell mapped to depth " << d << " != 1");

    const RegionMap extreme = region_map(fit, achievable, {1e6}, {1e6});
    ACCEPT(extreme.depths[0] == 6,
           "gamma=ratio=1e6 mapped to depth " << extreme.depths[0] << " != 6");

    std::vector<double> gammas{1.0};
    for (int i = 1; i < 16; ++i) gammas.push_back(std::pow(10.0, 0.4 * i / 3.0));
    const RegionMap map = region_map(fit, achievable, gammas, ratios);
    for (std::size_t g = 0; g < gammas.size(); ++g)
        for (std::size_t r = 1; r < ratios.size(); ++r)
            ACCEPT(map.depth_at(g, r) >= map.depth_at(g, r - 1),
                   "depth not monotone along the ratio axis");
    for (std::size_t r = 0; r < ratios.size(); ++r)
        for (std::size_t g = 1; g < gammas.size(); ++g)
            ACCEPT(map.depth_at(g, r) >= map.depth_at(g - 1, r),
                   "depth not monotone along the gamma axis");
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"1 parameter-count reproduction (2,369,084 / 2,597,820 / 8.8%)",
         criterion_param_counts},
        {"2 MAC oracle equivalence on 100 random shapes", criterion_mac_oracle},
        {"3 closed-form optima match grid search; alpha identity to 1e-12",
         criterion_closed_form},
        {"4 backprop matches finite differences (depth-3 width-4, combined loss)",
         criterion_gradients},
        {"5 fit recovery within 1e-6 on noiseless data", criterion_fit_recovery},
        {"6 desk-scale combined training (exits, confidence, delta direction)",
         criterion_desk_training},
        {"7 exit-policy dominance and trivial regimes", criterion_policy_dominance},
        {"8 region-map limits and monotonicity", criterion_region_map_limits},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        try {
            c.body();
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start)
                    .count();
            std::printf("[PASS] criterion %s (%.1fs)\n", c.name.c_str(), secs);
        } catch (const std::exception& e) {
            ++failures;
            std::printf("[FAIL] criterion %s: %s\n", c.name.c_str(), e.what());
        }
        std::fflush(stdout);
    }
    std::printf("[SKIP] criterion 9 optional extended CIFAR-10 run (hours; see "
                "README for the recipe)\n");
    if (failures) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
