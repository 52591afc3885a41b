// Python bindings for the main operations: model building, MAC accounting,
// training, curve fitting, optimal operating points and the dynamic exit
// policy. Tensors cross the boundary as numpy arrays.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "exitwise/checkpoint.hpp"
#include "exitwise/dataset.hpp"
#include "exitwise/energy.hpp"
#include "exitwise/errors.hpp"
#include "exitwise/fit.hpp"
#include "exitwise/model.hpp"
#include "exitwise/optimal.hpp"
#include "exitwise/policy.hpp"
#include "exitwise/training.hpp"

namespace py = pybind11;
using namespace exitwise;

namespace {

TensorF image_from_numpy(const py::array_t<float, py::array::c_style |
                                                      py::array::forcecast>& arr) {
    if (arr.ndim() != 3) throw DimensionError("image array must be HxWxC");
    std::vector<std::size_t> shape{static_cast<std::size_t>(arr.shape(0)),
                                   static_cast<std::size_t>(arr.shape(1)),
                                   static_cast<std::size_t>(arr.shape(2))};
    std::vector<float> data(arr.data(), arr.data() + arr.size());
    return TensorF(std::move(shape), std::move(data));
}

py::array_t<float> numpy_from_tensor(const TensorF& t) {
    std::vector<py::ssize_t> shape;
    for (std::size_t e : t.shape()) shape.push_back(static_cast<py::ssize_t>(e));
    py::array_t<float> arr(shape);
    std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
    return arr;
}

TrainConfig config_from_kwargs(const py::kwargs& kwargs) {
    TrainConfig cfg;
    for (const auto& item : kwargs) {
        const std::string key = py::cast<std::string>(item.first);
        if (key == "lr") cfg.lr = py::cast<double>(item.second);
        else if (key == "beta_m") cfg.beta_m = py::cast<double>(item.second);
        else if (key == "beta_v") cfg.beta_v = py::cast<double>(item.second);
        else if (key == "eps") cfg.eps = py::cast<double>(item.second);
        else if (key == "batch_size") cfg.batch_size = py::cast<int>(item.second);
        else if (key == "max_epochs") cfg.max_epochs = py::cast<int>(item.second);
        else if (key == "patience") cfg.patience = py::cast<int>(item.second);
        else if (key == "l2_lambda") cfg.l2_lambda = py::cast<double>(item.second);
        else if (key == "dropout_keep") cfg.dropout_keep = py::cast<double>(item.second);
        else if (key == "dropout_is_drop_prob")
            cfg.dropout_is_drop_prob = py::cast<bool>(item.second);
        else if (key == "seed") cfg.seed = py::cast<std::uint64_t>(item.second);
        else throw ParameterError("unknown training option '" + key + "'");
    }
    return cfg;
}

py::dict history_to_dict(const TrainHistory& history) {
    py::list epochs;
    for (const EpochStats& e : history.epochs) {
        py::dict row;
        row["epoch"] = e.epoch;
        row["phase"] = e.phase;
        row["train_loss"] = e.train_loss;
        row["train_acc"] = e.train_acc;
        row["val_loss"] = e.val_loss;
        row["val_acc"] = e.val_acc;
        epochs.append(row);
    }
    py::dict out;
    out["epochs"] = epochs;
    out["best_epoch"] = history.best_epoch;
    out["stopped_early"] = history.stopped_early;
    return out;
}

py::dict report_to_dict(const PolicyReport& report) {
    py::dict out;
    out["test_accuracy"] = report.test_accuracy;
    out["mean_macs"] = report.mean_macs;
    out["usage_histogram"] = report.usage_histogram;
    out["baseline_accuracy"] = report.baseline_accuracy;
    out["baseline_macs"] = report.baseline_macs;
    out["max_macs"] = report.max_macs;
    out["matched_baseline_macs"] = report.matched_baseline_macs;
    out["savings"] = report.savings;
    return out;
}

}  // namespace

PYBIND11_MODULE(_exitwise, m) {
    m.doc() = "Energy-accuracy analysis for early-exit CNNs";

    py::register_exception<Error>(m, "ExitwiseError");

    // ---- datasets ----
    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("class_count",
                               [](const Dataset& d) { return d.class_count; })
        .def_property_readonly("name", [](const Dataset& d) { return d.name; })
        .def("__len__", [](const Dataset& d) { return d.size(); })
        .def("label", [](const Dataset& d, std::size_t i) {
            return d.images.at(i).label;
        })
        .def("image", [](const Dataset& d, std::size_t i) {
            return numpy_from_tensor(d.images.at(i).pixels);
        });

    m.def("synthetic_blobs", &synthetic_blobs, py::arg("n_per_class"),
          py::arg("class_count"), py::arg("image_h"), py::arg("image_w"),
          py::arg("image_c"), py::arg("separation"), py::arg("seed"),
          py::arg("variant") = 0);
    m.def("load_cifar10", &load_cifar10, py::arg("directory"));
    m.def("split_validation", &split_validation, py::arg("train"),
          py::arg("fraction"), py::arg("seed"));

    // ---- models ----
    py::class_<ModelF>(m, "Model")
        .def_property_readonly("depth",
                               [](const ModelF& m_) { return m_.arch.depth; })
        .def_property_readonly("width",
                               [](const ModelF& m_) { return m_.arch.width; })
        .def_property_readonly("exits",
                               [](const ModelF& m_) { return m_.arch.exits; })
        .def_property_readonly("calibration",
                               [](const ModelF& m_) { return m_.calibration; })
        .def("count_params", [](const ModelF& m_) { return count_params(m_); })
        .def("forward_all_exits",
             [](const ModelF& m_, const py::array_t<float, py::array::c_style |
                                                               py::array::forcecast>&
                                      image) {
                 const auto probs = forward_all_exits(m_, image_from_numpy(image));
                 py::list out;
                 for (const TensorF& p : probs) out.append(numpy_from_tensor(p));
                 return out;
             })
        .def("save", [](const ModelF& m_, const std::filesystem::path& path) {
            save_checkpoint(m_, path);
        });

    m.def("build_single", &build_single<float>, py::arg("depth"), py::arg("width"),
          py::arg("in_h"), py::arg("in_w"), py::arg("in_c"), py::arg("classes"),
          py::arg("seed"));
    m.def("build_multi_exit", &build_multi_exit<float>, py::arg("depth"),
          py::arg("width"), py::arg("in_h"), py::arg("in_w"), py::arg("in_c"),
          py::arg("classes"), py::arg("seed"));
    m.def("count_params_bank", &count_params_bank, py::arg("max_depth"),
          py::arg("width"), py::arg("in_h"), py::arg("in_w"), py::arg("in_c"),
          py::arg("classes"));
    m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    // ---- energy model ----
    m.def("mac_conv", &mac_conv, py::arg("w_i"), py::arg("h_i"), py::arg("w_f"),
          py::arg("h_f"), py::arg("n_c"), py::arg("n_f"));
    m.def("mac_fc", &mac_fc, py::arg("n_u"), py::arg("n_y"));
    m.def("mac_network",
          [](int depth, int width, int in_h, int in_w, int in_c, int classes,
             bool multi_exit) {
              const Arch arch = multi_exit
                                    ? Arch::multi_exit(depth, width, in_h, in_w,
                                                       in_c, classes)
                                    : Arch::single(depth, width, in_h, in_w, in_c,
                                                   classes);
              const MacBreakdown mb = mac_network(arch);
              py::dict out;
              out["per_layer"] = mb.per_layer;
              out["per_exit_cumulative"] = mb.per_exit_cumulative;
              out["total"] = mb.total;
              return out;
          },
          py::arg("depth"), py::arg("width"), py::arg("in_h"), py::arg("in_w"),
          py::arg("in_c"), py::arg("classes"), py::arg("multi_exit") = false);
    m.def("decision_cost", &decision_cost, py::arg("e_d"), py::arg("e_d_max"));
    m.def("total_cost", &total_cost, py::arg("c_d"), py::arg("c_x"),
          py::arg("alpha"));
    m.def("expected_binary_energy", &expected_binary_energy, py::arg("e_d"),
          py::arg("e_x"), py::arg("gamma"), py::arg("accuracy"));

    // ---- training ----
    m.def("train_single",
          [](ModelF& model, const Dataset& train, const Dataset& val,
             const py::kwargs& kwargs) {
              return history_to_dict(
                  train_single(model, train, val, config_from_kwargs(kwargs)));
          },
          py::arg("model"), py::arg("train"), py::arg("val"));
    m.def("train_combined",
          [](ModelF& model, const Dataset& train, const Dataset& val,
             const py::kwargs& kwargs) {
              return history_to_dict(
                  train_combined(model, train, val, config_from_kwargs(kwargs)));
          },
          py::arg("model"), py::arg("train"), py::arg("val"));
    m.def("train_individual",
          [](ModelF& model, const Dataset& train, const Dataset& val,
             const py::kwargs& kwargs) {
              return history_to_dict(
                  train_individual(model, train, val, config_from_kwargs(kwargs)));
          },
          py::arg("model"), py::arg("train"), py::arg("val"));
    m.def("calibrate", &calibrate, py::arg("model"), py::arg("full_train"));
    m.def("evaluate_exits",
          [](const ModelF& model, const Dataset& data) {
              const EvalResult ev = evaluate_exits(model, data, model.arch.exits);
              py::dict out;
              out["per_exit_accuracy"] = ev.per_exit_accuracy;
              out["mean_loss"] = ev.mean_loss;
              out["mean_accuracy"] = ev.mean_accuracy;
              return out;
          },
          py::arg("model"), py::arg("data"));

    // ---- curve fits and optima ----
    py::class_<ExpFit>(m, "ExpFit")
        .def_readonly("a", &ExpFit::a)
        .def_readonly("b", &ExpFit::b)
        .def_readonly("residual", &ExpFit::residual)
        .def_readonly("near_zero_b", &ExpFit::near_zero_b)
        .def("__call__", &ExpFit::operator());
    py::class_<RatFit>(m, "RatFit")
        .def_readonly("a", &RatFit::a)
        .def_readonly("b", &RatFit::b)
        .def_readonly("residual", &RatFit::residual)
        .def("__call__", &RatFit::operator());
    m.def("fit_exponential", &fit_exponential, py::arg("points"));
    m.def("fit_rational", &fit_rational, py::arg("points"));
    m.def("make_exp_fit", [](double a, double b) {
        ExpFit f;
        f.a = a;
        f.b = b;
        return f;
    });

    m.def("optimal_accuracy_alpha",
          [](const ExpFit& fit, double alpha, double a_min, double a_max) {
              const OptimalAccuracy opt =
                  optimal_accuracy_alpha(fit, alpha, {a_min, a_max});
              return py::make_tuple(opt.value, opt.clamped());
          },
          py::arg("fit"), py::arg("alpha"), py::arg("a_min") = 0.0,
          py::arg("a_max") = 1.0);
    m.def("alpha_from_binary", &alpha_from_binary, py::arg("gamma"), py::arg("e_x"),
          py::arg("e_d_max"));
    m.def("optimal_accuracy_binary",
          [](const ExpFit& fit, double gamma, double e_x, double e_d_max,
             double a_min, double a_max) {
              const OptimalAccuracy opt =
                  optimal_accuracy_binary(fit, gamma, e_x, e_d_max, {a_min, a_max});
              return py::make_tuple(opt.value, opt.clamped());
          },
          py::arg("fit"), py::arg("gamma"), py::arg("e_x"), py::arg("e_d_max"),
          py::arg("a_min") = 0.0, py::arg("a_max") = 1.0);
    m.def("nearest_achievable",
          [](double a_star, const std::vector<std::tuple<int, double, double>>& set) {
              AchievableSet achievable;
              for (const auto& [depth, acc, cd] : set)
                  achievable.push_back({depth, acc, cd});
              const AchievablePoint& p = nearest_achievable(a_star, achievable);
              return py::make_tuple(p.depth, p.accuracy);
          },
          py::arg("a_star"), py::arg("achievable"));
    m.def("region_map",
          [](const ExpFit& fit, const std::vector<std::tuple<int, double, double>>& set,
             const std::vector<double>& gammas, const std::vector<double>& ratios) {
              AchievableSet achievable;
              for (const auto& [depth, acc, cd] : set)
                  achievable.push_back({depth, acc, cd});
              const RegionMap map = region_map(fit, achievable, gammas, ratios);
              py::array_t<int> out({gammas.size(), ratios.size()});
              std::copy(map.depths.begin(), map.depths.end(), out.mutable_data());
              return out;
          },
          py::arg("fit"), py::arg("achievable"), py::arg("gammas"),
          py::arg("ratios"));

    // ---- exit policy ----
    m.def("confidence",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>&
                 probs) {
              std::vector<float> data(probs.data(), probs.data() + probs.size());
              return confidence(TensorF({data.size()}, std::move(data)));
          },
          py::arg("probs"));
    m.def("evaluate_policy",
          [](const ModelF& model, const Dataset& data, double desired,
             double beta_acc, double beta_conf) {
              if (!model.has_calibration())
                  throw StateError("model has no calibration; call calibrate()");
              ExitPolicyParams params{desired, beta_acc, beta_conf,
                                      model.calibration};
              return report_to_dict(evaluate_policy(model, data, params));
          },
          py::arg("model"), py::arg("data"), py::arg("desired_accuracy"),
          py::arg("beta_acc") = 1.0, py::arg("beta_conf") = 1.0);
    m.def("accuracy_vs_desired_sweep",
          [](const ModelF& model, const Dataset& data,
             const std::vector<double>& grid, double beta_acc, double beta_conf) {
              const auto points =
                  accuracy_vs_desired_sweep(model, data, grid, beta_acc, beta_conf);
              py::list out;
              for (const auto& pt : points)
                  out.append(py::make_tuple(pt.desired, pt.accuracy));
              return out;
          },
          py::arg("model"), py::arg("data"), py::arg("grid"),
          py::arg("beta_acc") = 1.0, py::arg("beta_conf") = 1.0);
    m.def("energy_accuracy_with_policy",
          [](const ModelF& model, const Dataset& data,
             const std::vector<double>& grid, double beta_acc, double beta_conf) {
              const auto curve = energy_accuracy_with_policy(model, data, grid,
                                                             beta_acc, beta_conf);
              py::list out;
              for (const auto& pt : curve) {
                  py::dict row;
                  row["desired"] = pt.desired;
                  row["accuracy"] = pt.accuracy;
                  row["mean_macs"] = pt.mean_macs;
                  row["norm_energy"] = pt.norm_energy;
                  row["baseline_norm_energy"] = pt.baseline_norm_energy;
                  row["savings"] = pt.savings;
                  out.append(row);
              }
              return out;
          },
          py::arg("model"), py::arg("data"), py::arg("grid"),
          py::arg("beta_acc") = 1.0, py::arg("beta_conf") = 1.0);
    m.def("build_confidence_table",
          [](const ModelF& model, const Dataset& data,
             const std::vector<double>& thresholds) {
              const ConfidenceTable table =
                  build_confidence_table(model, data, thresholds);
              py::list out;
              for (std::size_t e = 0; e < table.per_exit.size(); ++e) {
                  for (const ConfidenceRow& row : table.per_exit[e]) {
                      py::dict r;
                      r["exit"] = table.exit_layers[e];
                      r["threshold"] = row.threshold;
                      r["accuracy"] = row.accuracy.has_value()
                                          ? py::object(py::float_(*row.accuracy))
                                          : py::object(py::none());
                      r["fraction"] = row.fraction;
                      out.append(r);
                  }
              }
              return out;
          },
          py::arg("model"), py::arg("data"), py::arg("thresholds"));
}
