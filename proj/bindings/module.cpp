// Python surface: dataset generation, training, evaluation, and the core
// matching/localization math on plain lists.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "simsc/config.hpp"
#include "simsc/model.hpp"
#include "simsc/objective.hpp"
#include "simsc/synthdata.hpp"
#include "simsc/train.hpp"

namespace py = pybind11;
using namespace simsc;

namespace {

py::dict train_from_json(const std::string& config_json, const std::string& data_dir,
                         const std::string& out_dir) {
    ExperimentConfig cfg = experiment_config_from_json(config_json);
    const Dataset train_set = load_dataset(data_dir + "/train.json");
    const Dataset val_set = load_dataset(data_dir + "/val.json");
    Model model = make_model(cfg.train.model, cfg.train.seed);
    const TrainResult res = train_model(model, train_set, val_set, cfg.train, out_dir);

    py::dict out;
    out["diverged"] = res.diverged;
    out["diagnostics"] = res.diagnostics;
    out["best_val_pck"] = res.best_val_pck;
    out["best_epoch"] = res.best_epoch;
    out["final_val_pck"] = res.final_val_pck;
    out["epochs_run"] = res.epoch_log.size();
    if (!res.epoch_log.empty()) {
        out["final_beta_trn"] = res.epoch_log.back().beta_trn;
        out["final_loss"] = res.epoch_log.back().loss;
    }
    return out;
}

py::dict evaluate(const std::string& weights_dir, const std::string& data_json,
                  const std::vector<double>& alphas, const std::string& convention,
                  double beta_eval, double sigma, const std::string& aggregate) {
    const Model model = load_model(weights_dir);
    const Dataset data = load_dataset(data_json);
    EvalOptions options;
    options.alphas = alphas;
    options.convention = threshold_convention_from_name(convention);
    options.localizer.beta_eval = beta_eval;
    options.localizer.sigma = sigma;
    if (aggregate == "pairs")
        options.aggregate = AggregateMode::mean_over_pairs;
    else if (aggregate == "keypoints")
        options.aggregate = AggregateMode::mean_over_keypoints;
    else
        throw std::invalid_argument("aggregate must be 'pairs' or 'keypoints'");
    const PckResult res = evaluate_model(model, data, options);

    py::dict out;
    out["convention"] = res.convention;
    out["alphas"] = res.alphas;
    out["per_alpha"] = res.per_alpha;
    out["per_pair"] = res.per_pair;
    return out;
}

std::vector<double> softmax_list(const std::vector<double>& values, double beta) {
    if (values.empty()) throw std::invalid_argument("softmax: empty input");
    const Tensor t = Tensor::from_data({values.size()}, values);
    return softmax(t, beta).data();
}

std::pair<double, double> kernel_soft_argmax_list(const std::vector<double>& m, std::size_t h,
                                                  std::size_t w, double sigma, double beta_eval) {
    LocalizerConfig cfg;
    cfg.sigma = sigma;
    cfg.beta_eval = beta_eval;
    validate_localizer_config(cfg);
    const Point p = kernel_soft_argmax(m, h, w, cfg);
    return {p.row, p.col};
}

double pck_list(const std::vector<std::pair<double, double>>& preds,
                const std::vector<std::pair<double, double>>& targets, double alpha,
                double theta) {
    std::vector<Point> pred_pts;
    CorrespondenceSet set;
    for (const auto& [r, c] : preds) pred_pts.push_back({r, c});
    for (const auto& [r, c] : targets) set.points_b.push_back({r, c});
    return pck(pred_pts, set, alpha, theta);
}

py::dict pair_summary(std::uint64_t seed, std::size_t size) {
    SynthConfig cfg;
    cfg.size = size;
    const SynthPair pair = generate_pair(seed, cfg);
    auto points = [](const std::vector<Point>& pts) {
        std::vector<std::pair<double, double>> out;
        for (const Point& p : pts) out.emplace_back(p.row, p.col);
        return out;
    };
    py::dict out;
    out["seed"] = pair.seed;
    out["warp_kind"] = pair.warp.kind;
    out["keypoints_a"] = points(pair.keypoints_a);
    out["keypoints_b"] = points(pair.keypoints_b);
    out["bbox_b"] = pair.bbox_b;
    out["image_a"] = pair.image_a.data.data();
    out["image_b"] = pair.image_b.data.data();
    out["size"] = size;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "semantic correspondence with learned softmax temperature";

    m.def("generate_split", [](std::uint64_t seed, std::size_t n_train, std::size_t n_val,
                               std::size_t n_test, const std::string& out_dir, std::size_t size) {
              SynthConfig cfg;
              cfg.size = size;
              generate_split(seed, n_train, n_val, n_test, cfg, out_dir);
          },
          py::arg("seed"), py::arg("n_train"), py::arg("n_val"), py::arg("n_test"),
          py::arg("out_dir"), py::arg("size") = 64,
          "Write train/val/test dataset JSONs plus SMT1 images under out_dir.");

    m.def("generate_pair", &pair_summary, py::arg("seed"), py::arg("size") = 64,
          "One synthetic pair: keypoints, warp kind, bbox, and flat pixel rows.");

    m.def("train", &train_from_json, py::arg("config_json"), py::arg("data_dir"),
          py::arg("out_dir") = "",
          "Train from an experiment-config JSON string; returns a summary dict.");

    m.def("evaluate", &evaluate, py::arg("weights_dir"), py::arg("data_json"),
          py::arg("alphas") = std::vector<double>{0.05, 0.1, 0.15},
          py::arg("convention") = "img", py::arg("beta_eval") = 1.0, py::arg("sigma") = 7.0,
          py::arg("aggregate") = "pairs", "PCK of saved weights on a dataset JSON.");

    m.def("softmax", &softmax_list, py::arg("values"), py::arg("beta") = 1.0,
          "Temperature softmax over a flat list.");

    m.def("kernel_soft_argmax", &kernel_soft_argmax_list, py::arg("scores"), py::arg("h"),
          py::arg("w"), py::arg("sigma") = 7.0, py::arg("beta_eval") = 1.0,
          "Kernel soft-argmax over a row-major h*w score map; returns (row, col).");

    m.def("pck", &pck_list, py::arg("predictions"), py::arg("targets"), py::arg("alpha"),
          py::arg("theta"), "Fraction of predictions within alpha * theta of their targets.");

    m.def("temperature_regularizer", &temperature_regularizer_value, py::arg("beta"),
          py::arg("beta_thres") = 0.1, "Hinge keeping partial temperatures above beta_thres.");
}
