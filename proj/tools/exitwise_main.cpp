// exitwise: train multi-exit CNNs, count their MACs, fit energy-accuracy
// curves, solve for optimal operating points, and evaluate the
// confidence-gated dynamic exit policy.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "exitwise/checkpoint.hpp"
#include "exitwise/csv.hpp"
#include "exitwise/dataset.hpp"
#include "exitwise/energy.hpp"
#include "exitwise/errors.hpp"
#include "exitwise/fit.hpp"
#include "exitwise/io_util.hpp"
#include "exitwise/model.hpp"
#include "exitwise/optimal.hpp"
#include "exitwise/policy.hpp"
#include "exitwise/svg.hpp"
#include "exitwise/training.hpp"

namespace fs = std::filesystem;
using namespace exitwise;

namespace {

// Exit codes: 0 ok, 1 usage, 2 I/O, 3 numerical, 4 state.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitState = 4;

struct DatasetOptions {
    std::string source;  // "cifar10" or "synthetic"
    std::string data_dir;
    int classes = 10;
    int image_size = 12;  // synthetic images are square
    int channels = 1;
    int n_per_class = 60;
    int test_per_class = 30;
    double separation = 2.5;
    double val_fraction = 0.1;
};

struct DataBundle {
    Dataset train;  // training split (validation removed)
    Dataset val;
    Dataset test;
    Dataset full_train;  // training split plus validation, for calibration
};

void add_dataset_flags(CLI::App* cmd, DatasetOptions& opt) {
    cmd->add_option("--dataset", opt.source, "Dataset source: cifar10 | synthetic")
        ->required()
        ->check(CLI::IsMember({"cifar10", "synthetic"}));
    cmd->add_option("--data-dir", opt.data_dir,
                    "Directory with the CIFAR-10 binary batches");
    cmd->add_option("--classes", opt.classes, "Synthetic: number of classes");
    cmd->add_option("--image-size", opt.image_size,
                    "Synthetic: square image edge length");
    cmd->add_option("--channels", opt.channels, "Synthetic: image channels");
    cmd->add_option("--n-per-class", opt.n_per_class,
                    "Synthetic: training images per class");
    cmd->add_option("--test-per-class", opt.test_per_class,
                    "Synthetic: test images per class");
    cmd->add_option("--separation", opt.separation,
                    "Synthetic: class separation in noise-sigma units");
    cmd->add_option("--val-fraction", opt.val_fraction,
                    "Held-out validation fraction of the training set");
}

DataBundle load_data(const DatasetOptions& opt, std::uint64_t seed) {
    DataBundle bundle;
    if (opt.source == "cifar10") {
        if (opt.data_dir.empty())
            throw ParameterError("--data-dir is required for --dataset cifar10");
        auto [train, test] = load_cifar10(opt.data_dir);
        bundle.full_train = train;
        auto [kept, val] = split_validation(train, opt.val_fraction, seed);
        bundle.train = std::move(kept);
        bundle.val = std::move(val);
        bundle.test = std::move(test);
    } else {
        const Dataset full =
            synthetic_blobs(opt.n_per_class, opt.classes, opt.image_size,
                            opt.image_size, opt.channels, opt.separation, seed, 0);
        bundle.full_train = full;
        auto [kept, val] = split_validation(full, opt.val_fraction, seed);
        bundle.train = std::move(kept);
        bundle.val = std::move(val);
        bundle.test = synthetic_blobs(opt.test_per_class, opt.classes, opt.image_size,
                                      opt.image_size, opt.channels, opt.separation,
                                      seed, 1);
    }
    return bundle;
}

void add_train_config_flags(CLI::App* cmd, TrainConfig& cfg) {
    cmd->add_option("--lr", cfg.lr, "Adam learning rate");
    cmd->add_option("--beta1", cfg.beta_m, "Adam first-moment decay");
    cmd->add_option("--beta2", cfg.beta_v, "Adam second-moment decay");
    cmd->add_option("--adam-eps", cfg.eps, "Adam epsilon");
    cmd->add_option("--batch-size", cfg.batch_size, "Mini-batch size");
    cmd->add_option("--epochs", cfg.max_epochs, "Maximum training epochs");
    cmd->add_option("--patience", cfg.patience,
                    "Epochs without validation improvement before stopping");
    cmd->add_option("--l2", cfg.l2_lambda, "L2 penalty on weights");
    cmd->add_option("--dropout-keep", cfg.dropout_keep,
                    "Keep probability of the head-input dropout");
    cmd->add_flag("--dropout-is-drop-prob", cfg.dropout_is_drop_prob,
                  "Read --dropout-keep as a drop probability instead");
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ParameterError(std::string("bad ") + what + " value '" + item + "'");
        }
    }
    if (values.empty()) throw ParameterError(std::string(what) + " list is empty");
    return values;
}

std::vector<int> parse_int_range(const std::string& text) {
    // "lo:hi" inclusive range or "a,b,c" list.
    if (text.find(':') != std::string::npos) {
        const auto colon = text.find(':');
        const int lo = std::stoi(text.substr(0, colon));
        const int hi = std::stoi(text.substr(colon + 1));
        if (hi < lo) throw ParameterError("range upper bound below lower bound");
        std::vector<int> values;
        for (int v = lo; v <= hi; ++v) values.push_back(v);
        return values;
    }
    std::vector<int> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(std::stoi(item));
    if (values.empty()) throw ParameterError("empty range");
    return values;
}

// "lo:hi:n" or "lo:hi:n:log" grids for analyze.
std::vector<double> parse_grid(const std::string& text, const char* what) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    try {
        if (parts.size() == 1) return {std::stod(parts[0])};
        if (parts.size() < 3) throw ParameterError("");
        const double lo = std::stod(parts[0]);
        const double hi = std::stod(parts[1]);
        const int n = std::stoi(parts[2]);
        const bool log_scale = parts.size() > 3 && parts[3] == "log";
        if (n < 1 || hi < lo) throw ParameterError("");
        if (log_scale && lo <= 0) throw ParameterError("");
        std::vector<double> grid;
        for (int i = 0; i < n; ++i) {
            const double t = n == 1 ? 0.0
                                    : static_cast<double>(i) /
                                          static_cast<double>(n - 1);
            grid.push_back(log_scale
                               ? lo * std::pow(hi / lo, t)
                               : lo + (hi - lo) * t);
        }
        return grid;
    } catch (const std::exception&) {
        throw ParameterError(std::string("bad ") + what + " grid '" + text +
                             "' (want value | lo:hi:n | lo:hi:n:log)");
    }
}

// "b1,b2;b1,b2" beta presets.
std::vector<std::pair<double, double>> parse_betas(const std::string& text) {
    std::vector<std::pair<double, double>> betas;
    std::stringstream ss(text);
    std::string pair_text;
    while (std::getline(ss, pair_text, ';')) {
        const auto values = parse_double_list(pair_text, "beta");
        if (values.size() != 2)
            throw ParameterError("each beta preset needs exactly two values");
        betas.emplace_back(values[0], values[1]);
    }
    if (betas.empty()) throw ParameterError("no beta presets given");
    return betas;
}

std::string alpha_column_name(double alpha) {
    std::string name = "cost_alpha" + format_float(alpha);
    return name;
}

void write_history_csv(const TrainHistory& history, const fs::path& path) {
    CsvWriter csv({"epoch", "phase", "train_loss", "train_acc", "val_loss",
                   "val_acc", "best"});
    for (std::size_t i = 0; i < history.epochs.size(); ++i) {
        const EpochStats& e = history.epochs[i];
        csv.begin_row()
            .cell(e.epoch)
            .cell(e.phase)
            .cell(e.train_loss)
            .cell(e.train_acc)
            .cell(e.val_loss)
            .cell(e.val_acc)
            .cell(static_cast<int>(static_cast<int>(i) == history.best_epoch));
    }
    csv.write(path);
}

void write_calibration_csv(const ModelF& model, const fs::path& path) {
    CsvWriter csv({"exit", "train_acc"});
    for (std::size_t i = 0; i < model.calibration.size(); ++i)
        csv.begin_row().cell(model.arch.exits[i]).cell(model.calibration[i]);
    csv.write(path);
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    DatasetOptions data;
    TrainConfig cfg;
    std::string mode = "combined";
    int depth = 6;
    int width = 8;
    std::string out_dir;
    std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& args) {
    TrainConfig cfg = args.cfg;
    cfg.seed = args.seed;
    const DataBundle data = load_data(args.data, args.seed);

    const Arch arch =
        args.mode == "single"
            ? Arch::single(args.depth, args.width, data.train.image_h(),
                           data.train.image_w(), data.train.image_c(),
                           data.train.class_count)
            : Arch::multi_exit(args.depth, args.width, data.train.image_h(),
                               data.train.image_w(), data.train.image_c(),
                               data.train.class_count);
    ModelF model = build_model<float>(arch, args.seed);

    TrainHistory history;
    if (args.mode == "single") {
        history = train_single(model, data.train, data.val, cfg);
    } else if (args.mode == "combined") {
        history = train_combined(model, data.train, data.val, cfg);
    } else {
        history = train_individual(model, data.train, data.val, cfg);
    }
    calibrate(model, data.full_train);

    const EvalResult test_eval = evaluate_exits(model, data.test, arch.exits);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    save_checkpoint(model, out / "checkpoint.bin");
    write_history_csv(history, out / "history.csv");
    write_calibration_csv(model, out / "calibration.csv");

    std::cout << "trained " << args.mode << " depth=" << args.depth
              << " width=" << args.width << " epochs=" << history.epochs.size()
              << (history.stopped_early ? " (early stop)" : "") << "\n";
    for (std::size_t i = 0; i < test_eval.per_exit_accuracy.size(); ++i)
        std::cout << "exit " << arch.exits[i]
                  << " test_acc=" << format_float(test_eval.per_exit_accuracy[i])
                  << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- sweep ----

struct SweepArgs {
    DatasetOptions data;
    TrainConfig cfg;
    std::string axis = "depth";
    std::string range = "1:4";
    int depth = 6;
    int width = 8;
    std::string alphas = "0,0.5,1";
    std::string out_dir;
    std::uint64_t seed = 0;
};

int cmd_sweep(const SweepArgs& args) {
    TrainConfig cfg = args.cfg;
    cfg.seed = args.seed;
    const DataBundle data = load_data(args.data, args.seed);
    const std::vector<int> params = parse_int_range(args.range);
    const std::vector<double> alphas = parse_double_list(args.alphas, "alpha");
    for (double a : alphas)
        if (a < 0.0 || a > 1.0)
            throw ParameterError("alphas must lie in [0, 1]");

    const auto points =
        args.axis == "depth"
            ? sweep_depth(params, args.width, data.train, data.val, data.test, cfg)
            : sweep_width(args.depth, params, data.train, data.val, data.test, cfg);

    std::size_t failed = 0;
    std::int64_t max_macs = 0;
    for (const SweepPoint& pt : points) {
        if (pt.ok())
            max_macs = std::max(max_macs, pt.macs);
        else
            ++failed;
    }
    if (failed == points.size())
        throw ParameterError("every sweep point failed: " + points.front().error);

    std::vector<std::string> header{"mode",      "param",    "macs",
                                    "c_d",       "train_acc", "test_acc"};
    for (double a : alphas) header.push_back(alpha_column_name(a));
    header.push_back("error");
    CsvWriter csv(header);
    for (const SweepPoint& pt : points) {
        csv.begin_row().cell(args.axis).cell(pt.param);
        if (pt.ok()) {
            const double c_d =
                decision_cost(static_cast<double>(pt.macs),
                              static_cast<double>(max_macs));
            csv.cell(pt.macs).cell(c_d).cell(pt.train_acc).cell(pt.test_acc);
            for (double a : alphas)
                csv.cell(total_cost(c_d, 1.0 - pt.test_acc, a));
            csv.cell(std::string());
        } else {
            csv.cell(std::string()).cell(std::string()).cell(std::string()).cell(
                std::string());
            for (double a : alphas) {
                (void)a;
                csv.cell(std::string());
            }
            csv.cell(pt.error);
        }
    }
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    csv.write(out / "sweep.csv");

    // Accuracy and cost curves against the swept parameter.
    std::vector<SvgSeries> series(3 + alphas.size());
    series[0].label = "train_acc";
    series[1].label = "test_acc";
    series[1].color = "#d62728";
    series[2].label = "c_d";
    series[2].color = "#2ca02c";
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        series[3 + ai].label = alpha_column_name(alphas[ai]);
        series[3 + ai].color = "";
        series[3 + ai].dashed = true;
    }
    for (const SweepPoint& pt : points) {
        if (!pt.ok()) continue;
        const double x = pt.param;
        const double c_d = decision_cost(static_cast<double>(pt.macs),
                                         static_cast<double>(max_macs));
        series[0].points.emplace_back(x, pt.train_acc);
        series[1].points.emplace_back(x, pt.test_acc);
        series[2].points.emplace_back(x, c_d);
        for (std::size_t ai = 0; ai < alphas.size(); ++ai)
            series[3 + ai].points.emplace_back(
                x, total_cost(c_d, 1.0 - pt.test_acc, alphas[ai]));
    }
    SvgChartOptions chart;
    chart.title = "Accuracy and cost vs " + args.axis;
    chart.x_label = args.axis;
    chart.y_label = "accuracy / normalized cost";
    write_line_chart(out / "sweep.svg", series, chart);

    std::cout << "sweep wrote " << points.size() << " rows ("
              << points.size() - failed << " ok) to " << (out / "sweep.csv").string()
              << "\n";
    return kExitOk;
}

// -------------------------------------------------------------- analyze ----

struct AnalyzeArgs {
    std::string input;
    std::string fit_kind = "exp";
    int max_fit_depth = 6;
    std::vector<double> alphas;
    bool binary = false;
    std::string gamma = "";
    std::string ratio = "";
    bool region = false;
    std::string gamma_grid = "1:100:25:log";
    std::string ratio_grid = "0.001:10:25:log";
    double explicit_a = 0, explicit_b = 0;
    bool have_explicit = false;
    std::string out_dir;
};

struct SweepInput {
    std::vector<CurvePoint> points;  // (accuracy, c_d)
    AchievableSet achievable;
};

SweepInput read_sweep_input(const std::string& path, int max_fit_depth) {
    const CsvData data = read_csv(path);
    const int mode_col = data.column("mode");
    const int param_col = data.column("param");
    const int acc_col = data.column("test_acc");
    const int cd_col = data.column("c_d");
    const int err_col = data.column("error");
    if (mode_col < 0 || param_col < 0 || acc_col < 0 || cd_col < 0)
        throw FormatError(path + ": missing sweep columns (mode,param,test_acc,c_d)");
    SweepInput input;
    for (const auto& row : data.rows) {
        if (err_col >= 0 && static_cast<std::size_t>(err_col) < row.size() &&
            !row[static_cast<std::size_t>(err_col)].empty())
            continue;
        const std::string mode = row[static_cast<std::size_t>(mode_col)];
        const int param = std::stoi(row[static_cast<std::size_t>(param_col)]);
        if (mode == "depth" && param > max_fit_depth) continue;
        const double acc = std::stod(row[static_cast<std::size_t>(acc_col)]);
        const double c_d = std::stod(row[static_cast<std::size_t>(cd_col)]);
        input.points.emplace_back(acc, c_d);
        input.achievable.push_back({param, acc, c_d});
    }
    if (input.points.empty())
        throw FormatError(path + ": no usable sweep rows");
    return input;
}

int cmd_analyze(const AnalyzeArgs& args) {
    std::optional<SweepInput> sweep;
    if (!args.input.empty())
        sweep = read_sweep_input(args.input, args.max_fit_depth);

    // The closed forms need the exponential family; fit it on demand from
    // the sweep points, or take explicit coefficients.
    std::optional<ExpFit> exp_fit;
    if (args.have_explicit) {
        ExpFit f;
        f.a = args.explicit_a;
        f.b = args.explicit_b;
        exp_fit = f;
    }
    auto need_exp_fit = [&]() -> const ExpFit& {
        if (!exp_fit) {
            if (!sweep)
                throw ParameterError(
                    "this analysis needs --input sweep.csv or --a/--b coefficients");
            exp_fit = fit_exponential(sweep->points);
        }
        return *exp_fit;
    };

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);

    if (sweep) {
        CsvWriter fit_csv({"a", "b", "residual"});
        if (args.fit_kind == "exp") {
            const ExpFit& f = need_exp_fit();
            fit_csv.begin_row().cell(f.a).cell(f.b).cell(f.residual);
            if (f.near_zero_b)
                std::cerr << "warning: fitted b is near zero (flat curve)\n";
        } else {
            const RatFit f = fit_rational(sweep->points);
            fit_csv.begin_row().cell(f.a).cell(f.b).cell(f.residual);
        }
        fit_csv.write(out / "fit.csv");
    }

    const AccuracyRange range =
        sweep ? achievable_range(sweep->achievable) : AccuracyRange{};

    const bool want_optimal = !args.alphas.empty() || args.binary;
    if (want_optimal) {
        need_exp_fit();
        CsvWriter opt_csv({"source", "alpha", "gamma", "ratio", "a_star", "clamped",
                           "depth", "depth_acc"});
        auto emit = [&](const std::string& source, std::optional<double> alpha,
                        std::optional<double> gamma, std::optional<double> ratio,
                        const OptimalAccuracy& opt) {
            opt_csv.begin_row()
                .cell(source)
                .cell(alpha)
                .cell(gamma)
                .cell(ratio)
                .cell(opt.value)
                .cell(static_cast<int>(opt.clamped()));
            if (sweep) {
                const AchievablePoint& p =
                    nearest_achievable(opt.value, sweep->achievable);
                opt_csv.cell(p.depth).cell(p.accuracy);
            } else {
                opt_csv.cell(std::string()).cell(std::string());
            }
        };
        for (double alpha : args.alphas)
            emit("alpha", alpha, std::nullopt, std::nullopt,
                 optimal_accuracy_alpha(*exp_fit, alpha, range));
        if (args.binary) {
            if (args.gamma.empty() || args.ratio.empty())
                throw ParameterError("--binary needs --gamma and --ratio");
            for (double g : parse_grid(args.gamma, "gamma"))
                for (double r : parse_grid(args.ratio, "ratio"))
                    emit("binary", alpha_from_binary(g, r, 1.0), g, r,
                         optimal_accuracy_binary(*exp_fit, g, r, 1.0, range));
        }
        opt_csv.write(out / "optimal.csv");
    }

    if (args.region) {
        if (!sweep) throw ParameterError("--region-map needs --input sweep.csv");
        need_exp_fit();
        const std::vector<double> gammas = parse_grid(args.gamma_grid, "gamma");
        const std::vector<double> ratios = parse_grid(args.ratio_grid, "ratio");
        for (double g : gammas)
            if (g < 1.0) throw ParameterError("gamma grid must stay >= 1");
        const RegionMap map = region_map(*exp_fit, sweep->achievable, gammas, ratios);

        // Matrix CSV: first row carries the ratio axis, first column gamma.
        std::vector<std::string> header{"gamma\\ratio"};
        for (double r : ratios) header.push_back(format_float(r));
        CsvWriter map_csv(header);
        for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
            map_csv.begin_row().cell(gammas[gi]);
            for (std::size_t ri = 0; ri < ratios.size(); ++ri)
                map_csv.cell(map.depth_at(gi, ri));
        }
        map_csv.write(out / "region_map.csv");

        std::vector<std::vector<int>> cells(gammas.size(),
                                            std::vector<int>(ratios.size(), 0));
        SvgHeatmapOptions heat;
        heat.title = "Optimal depth vs energy ratio and gamma";
        heat.x_label = "E_X / E_Dmax";
        heat.y_label = "gamma";
        for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
            heat.y_ticks.push_back(format_float(gammas[gi]));
            for (std::size_t ri = 0; ri < ratios.size(); ++ri)
                cells[gi][ri] = map.depth_at(gi, ri);
        }
        for (double r : ratios) heat.x_ticks.push_back(format_float(r));
        write_heatmap(out / "region_map.svg", cells, heat);
    }

    std::cout << "analyze wrote outputs to " << out.string() << "\n";
    return kExitOk;
}

// ------------------------------------------------------------ exit-eval ----

struct ExitEvalArgs {
    std::string checkpoint;
    DatasetOptions data;
    std::string desired_grid = "0:1:51";
    std::optional<double> desired_single;
    std::string betas = "1,1;0.8,1.1";
    std::string out_dir;
    std::uint64_t seed = 0;
};

int cmd_exit_eval(const ExitEvalArgs& args) {
    const ModelF model = load_checkpoint(args.checkpoint);
    if (!model.has_calibration())
        throw StateError("checkpoint has no calibration table; retrain with "
                         "`exitwise train` (it calibrates and embeds the per-exit "
                         "training accuracies) or rebuild the checkpoint after "
                         "calling calibrate()");
    const DataBundle data = load_data(args.data, args.seed);
    const auto betas = parse_betas(args.betas);
    const std::vector<double> grid =
        args.desired_single ? std::vector<double>{*args.desired_single}
                            : parse_grid(args.desired_grid, "desired accuracy");

    const FixedDepthBaseline baseline = fixed_depth_baseline(model, data.test);

    // Per-preset policy reports.
    CsvWriter report_csv([&] {
        std::vector<std::string> h{"beta_acc", "beta_conf", "desired_acc",
                                   "test_acc", "mean_macs", "norm_energy",
                                   "savings"};
        for (int e : model.arch.exits) h.push_back("exit" + std::to_string(e));
        return h;
    }());
    CsvWriter acc_csv({"beta_acc", "beta_conf", "desired_acc", "test_acc"});
    CsvWriter energy_csv({"beta_acc", "beta_conf", "desired_acc", "test_acc",
                          "mean_macs", "norm_energy", "baseline_norm_energy",
                          "savings"});

    std::vector<SvgSeries> acc_series, energy_series;
    for (const auto& [b1, b2] : betas) {
        SvgSeries acc_s;
        acc_s.label = "beta=(" + format_float(b1) + "," + format_float(b2) + ")";
        acc_s.color = "";
        SvgSeries en_s = acc_s;
        for (double desired : grid) {
            ExitPolicyParams params{desired, b1, b2, model.calibration};
            const PolicyReport report =
                evaluate_policy(model, data.test, params, &baseline);
            report_csv.begin_row()
                .cell(b1)
                .cell(b2)
                .cell(desired)
                .cell(report.test_accuracy)
                .cell(report.mean_macs)
                .cell(report.mean_macs / static_cast<double>(report.max_macs))
                .cell(report.savings);
            for (std::int64_t count : report.usage_histogram)
                report_csv.cell(count);
            acc_csv.begin_row().cell(b1).cell(b2).cell(desired).cell(
                report.test_accuracy);
            energy_csv.begin_row()
                .cell(b1)
                .cell(b2)
                .cell(desired)
                .cell(report.test_accuracy)
                .cell(report.mean_macs)
                .cell(report.mean_macs / static_cast<double>(report.max_macs))
                .cell(report.matched_baseline_macs /
                      static_cast<double>(report.max_macs))
                .cell(report.savings);
            acc_s.points.emplace_back(desired, report.test_accuracy);
            en_s.points.emplace_back(
                report.test_accuracy,
                report.mean_macs / static_cast<double>(report.max_macs));
        }
        acc_series.push_back(std::move(acc_s));
        energy_series.push_back(std::move(en_s));
    }

    // Fixed-depth baseline curve for the energy chart.
    SvgSeries base_s;
    base_s.label = "fixed-depth baseline";
    base_s.color = "#7f7f7f";
    base_s.dashed = true;
    for (std::size_t i = 0; i < baseline.accuracy.size(); ++i)
        base_s.points.emplace_back(
            baseline.accuracy[i],
            static_cast<double>(baseline.macs[i]) /
                static_cast<double>(baseline.max_macs));
    std::sort(base_s.points.begin(), base_s.points.end());
    energy_series.push_back(std::move(base_s));

    const ConfidenceTable table = build_confidence_table(
        model, data.full_train, default_confidence_thresholds());
    CsvWriter conf_csv({"exit", "min_confidence", "accuracy", "fraction"});
    std::vector<SvgSeries> conf_series;
    for (std::size_t e = 0; e < table.per_exit.size(); ++e) {
        SvgSeries s;
        s.label = "exit " + std::to_string(table.exit_layers[e]);
        s.color = "";
        s.markers = false;
        for (const ConfidenceRow& row : table.per_exit[e]) {
            conf_csv.begin_row()
                .cell(table.exit_layers[e])
                .cell(row.threshold)
                .cell(row.accuracy)
                .cell(row.fraction);
            if (row.accuracy.has_value())
                s.points.emplace_back(row.threshold, *row.accuracy);
        }
        conf_series.push_back(std::move(s));
    }

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    report_csv.write(out / "policy_report.csv");
    acc_csv.write(out / "acc_vs_desired.csv");
    energy_csv.write(out / "energy_vs_acc.csv");
    conf_csv.write(out / "confidence_table.csv");

    SvgChartOptions acc_chart;
    acc_chart.title = "Test accuracy vs desired accuracy";
    acc_chart.x_label = "desired accuracy";
    acc_chart.y_label = "test accuracy";
    acc_chart.diagonal_reference = true;
    write_line_chart(out / "acc_vs_desired.svg", acc_series, acc_chart);

    SvgChartOptions energy_chart;
    energy_chart.title = "Normalized energy vs accuracy (dynamic exits)";
    energy_chart.x_label = "test accuracy";
    energy_chart.y_label = "normalized energy";
    write_line_chart(out / "energy_vs_acc.svg", energy_series, energy_chart);

    SvgChartOptions conf_chart;
    conf_chart.title = "Training accuracy vs minimum confidence";
    conf_chart.x_label = "minimum confidence";
    conf_chart.y_label = "training accuracy";
    write_line_chart(out / "confidence_table.svg", conf_series, conf_chart);

    std::cout << "exit-eval wrote policy outputs to " << out.string() << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------- macs ----

struct MacsArgs {
    int depth = 6;
    int width = 64;
    std::string input_shape = "32x32x3";
    int classes = 10;
    bool multi_exit = false;
    std::string out_file;
};

int cmd_macs(const MacsArgs& args) {
    int h = 32, w = 32, c = 3;
    if (std::sscanf(args.input_shape.c_str(), "%dx%dx%d", &h, &w, &c) != 3)
        throw ParameterError("bad --input shape '" + args.input_shape +
                             "' (want HxWxC)");
    const Arch arch = args.multi_exit
                          ? Arch::multi_exit(args.depth, args.width, h, w, c,
                                             args.classes)
                          : Arch::single(args.depth, args.width, h, w, c,
                                         args.classes);
    const MacBreakdown mb = mac_network(arch);
    CsvWriter csv({"kind", "name", "macs"});
    for (const auto& [name, macs] : mb.per_layer)
        csv.begin_row().cell(std::string("layer")).cell(name).cell(macs);
    for (std::size_t i = 0; i < mb.per_exit_cumulative.size(); ++i)
        csv.begin_row()
            .cell(std::string("cumulative"))
            .cell("exit" + std::to_string(arch.exits[i]))
            .cell(mb.per_exit_cumulative[i]);
    csv.begin_row().cell(std::string("total")).cell(std::string("network")).cell(
        mb.total);
    if (args.out_file.empty())
        std::cout << csv.str();
    else
        csv.write(args.out_file);
    return kExitOk;
}

// ------------------------------------------------------------- delta-acc ----

struct DeltaArgs {
    DatasetOptions data;
    TrainConfig cfg;
    int depth = 6;
    int width = 8;
    std::string out_dir;
    std::uint64_t seed = 0;
};

int cmd_delta_acc(const DeltaArgs& args) {
    TrainConfig cfg = args.cfg;
    cfg.seed = args.seed;
    const DataBundle data = load_data(args.data, args.seed);
    const DeltaAccuracyResult r = experiment_delta_accuracy(
        args.depth, args.width, data.train, data.val, data.test, cfg);

    CsvWriter csv({"exit", "baseline_acc", "individual_acc", "combined_acc",
                   "delta_individual", "delta_combined"});
    for (int l = 0; l < args.depth; ++l) {
        csv.begin_row()
            .cell(l + 1)
            .cell(r.baseline_acc[static_cast<std::size_t>(l)])
            .cell(r.individual_acc[static_cast<std::size_t>(l)])
            .cell(r.combined_acc[static_cast<std::size_t>(l)])
            .cell(r.individual_acc[static_cast<std::size_t>(l)] -
                  r.baseline_acc[static_cast<std::size_t>(l)])
            .cell(r.combined_acc[static_cast<std::size_t>(l)] -
                  r.baseline_acc[static_cast<std::size_t>(l)]);
    }
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    csv.write(out / "delta_acc.csv");

    CsvWriter means({"mean_delta_individual", "mean_delta_combined"});
    means.begin_row().cell(r.mean_delta_individual).cell(r.mean_delta_combined);
    means.write(out / "delta_acc_means.csv");

    std::cout << "delta-acc mean(individual)=" << format_float(r.mean_delta_individual)
              << " mean(combined)=" << format_float(r.mean_delta_combined) << "\n";
    return kExitOk;
}

int map_error_to_exit_code(const std::exception& e) {
    if (dynamic_cast<const StateError*>(&e)) return kExitState;
    if (dynamic_cast<const FitError*>(&e)) return kExitNumerical;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e))
        return kExitIo;
    if (dynamic_cast<const Error*>(&e)) return kExitUsage;
    return kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exitwise: energy-accuracy analysis for early-exit CNNs"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key = value configuration file");
    app.footer("Environment: EXITWISE_THREADS caps worker parallelism.\n"
               "Exit codes: 0 ok, 1 usage, 2 I/O, 3 numerical, 4 state.");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train a model and checkpoint it");
    train->add_option("--mode", train_args.mode,
                      "single | combined | individual")
        ->check(CLI::IsMember({"single", "combined", "individual"}));
    train->add_option("--depth", train_args.depth, "Total layers L");
    train->add_option("--width", train_args.width, "Conv filters per layer");
    train->add_option("--seed", train_args.seed, "Deterministic seed")->required();
    train->add_option("--out", train_args.out_dir, "Output directory")->required();
    add_dataset_flags(train, train_args.data);
    add_train_config_flags(train, train_args.cfg);

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep",
                                         "Train across depths or widths and "
                                         "tabulate accuracy vs MAC cost");
    sweep->add_option("--axis", sweep_args.axis, "depth | width")
        ->check(CLI::IsMember({"depth", "width"}));
    sweep->add_option("--range", sweep_args.range, "lo:hi or comma list");
    sweep->add_option("--depth", sweep_args.depth, "Fixed depth for width sweeps");
    sweep->add_option("--width", sweep_args.width, "Fixed width for depth sweeps");
    sweep->add_option("--alphas", sweep_args.alphas,
                      "Comma list of alpha weights for cost columns");
    sweep->add_option("--seed", sweep_args.seed, "Deterministic seed")->required();
    sweep->add_option("--out", sweep_args.out_dir, "Output directory")->required();
    add_dataset_flags(sweep, sweep_args.data);
    add_train_config_flags(sweep, sweep_args.cfg);

    AnalyzeArgs analyze_args;
    std::vector<double> analyze_alphas;
    CLI::App* analyze = app.add_subcommand(
        "analyze", "Fit energy-accuracy curves and solve optimal operating points");
    analyze->add_option("--input", analyze_args.input, "sweep.csv from `sweep`");
    analyze->add_option("--fit", analyze_args.fit_kind, "exp | rat")
        ->check(CLI::IsMember({"exp", "rat"}));
    analyze->add_option("--max-fit-depth", analyze_args.max_fit_depth,
                        "Depth-sweep rows beyond this are excluded from fits");
    analyze->add_option("--alpha", analyze_alphas,
                        "Relative importance factor(s) for the closed form");
    analyze->add_flag("--binary", analyze_args.binary,
                      "Solve the binary-decision optimum");
    analyze->add_option("--gamma", analyze_args.gamma,
                        "Bad-decision multiplier (value or lo:hi:n[:log])");
    analyze->add_option("--ratio", analyze_args.ratio,
                        "E_X/E_Dmax (value or lo:hi:n[:log])");
    analyze->add_flag("--region-map", analyze_args.region,
                      "Emit the optimal-depth region map");
    analyze->add_option("--gamma-grid", analyze_args.gamma_grid,
                        "Region-map gamma grid lo:hi:n[:log]");
    analyze->add_option("--ratio-grid", analyze_args.ratio_grid,
                        "Region-map ratio grid lo:hi:n[:log]");
    CLI::Option* opt_a =
        analyze->add_option("--a", analyze_args.explicit_a, "Explicit fit a");
    analyze->add_option("--b", analyze_args.explicit_b, "Explicit fit b")
        ->needs(opt_a);
    analyze->add_option("--out", analyze_args.out_dir, "Output directory")
        ->required();

    ExitEvalArgs eval_args;
    double desired_single = -1.0;
    CLI::App* exit_eval = app.add_subcommand(
        "exit-eval", "Evaluate the confidence-gated dynamic exit policy");
    exit_eval->add_option("--checkpoint", eval_args.checkpoint,
                          "Trained checkpoint with calibration")
        ->required();
    CLI::Option* desired_opt = exit_eval->add_option(
        "--desired-acc", desired_single, "Single desired accuracy");
    exit_eval->add_option("--grid", eval_args.desired_grid,
                          "Desired-accuracy grid lo:hi:n");
    exit_eval->add_option("--betas", eval_args.betas,
                          "Semicolon-separated beta presets, e.g. 1,1;0.8,1.1");
    exit_eval->add_option("--seed", eval_args.seed, "Deterministic seed")
        ->required();
    exit_eval->add_option("--out", eval_args.out_dir, "Output directory")
        ->required();
    add_dataset_flags(exit_eval, eval_args.data);

    MacsArgs macs_args;
    CLI::App* macs = app.add_subcommand("macs", "Print the MAC breakdown of an arch");
    macs->add_option("--depth", macs_args.depth, "Total layers L");
    macs->add_option("--width", macs_args.width, "Conv filters per layer");
    macs->add_option("--input", macs_args.input_shape, "Input shape HxWxC");
    macs->add_option("--classes", macs_args.classes, "Class count");
    macs->add_flag("--multi-exit", macs_args.multi_exit,
                   "Report the multi-exit topology");
    macs->add_option("--out", macs_args.out_file, "Write CSV here instead of stdout");

    DeltaArgs delta_args;
    CLI::App* delta = app.add_subcommand(
        "delta-acc", "Compare the multiplexed bank against multi-exit training");
    delta->add_option("--depth", delta_args.depth, "Total layers L");
    delta->add_option("--width", delta_args.width, "Conv filters per layer");
    delta->add_option("--seed", delta_args.seed, "Deterministic seed")->required();
    delta->add_option("--out", delta_args.out_dir, "Output directory")->required();
    add_dataset_flags(delta, delta_args.data);
    add_train_config_flags(delta, delta_args.cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*train) return cmd_train(train_args);
        if (*sweep) return cmd_sweep(sweep_args);
        if (*analyze) {
            analyze_args.alphas = analyze_alphas;
            analyze_args.have_explicit = opt_a->count() > 0;
            return cmd_analyze(analyze_args);
        }
        if (*exit_eval) {
            if (desired_opt->count() > 0) eval_args.desired_single = desired_single;
            return cmd_exit_eval(eval_args);
        }
        if (*macs) return cmd_macs(macs_args);
        if (*delta) return cmd_delta_acc(delta_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return map_error_to_exit_code(e);
    }
    return kExitUsage;
}
