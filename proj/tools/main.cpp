#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "simsc/config.hpp"
#include "simsc/model.hpp"
#include "simsc/synthdata.hpp"
#include "simsc/train.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string train_csv_header(const simsc::TrainConfig& cfg) {
    std::string h = "step,epoch,loss,ce,reg,mean_beta_a,mean_beta_b,beta_trn";
    for (double a : cfg.val_alphas) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), ",val_pck_%g", a);
        h += buf;
    }
    for (std::size_t i = 0; i <= cfg.model.backbone.layers; ++i)
        h += ",grad_layer_" + std::to_string(i);
    return h;
}

std::string train_csv_row(const simsc::EpochLogRow& r) {
    std::string s = std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + fmt(r.loss) +
                    "," + fmt(r.ce) + "," + fmt(r.reg) + "," + fmt(r.mean_beta_a) + "," +
                    fmt(r.mean_beta_b) + "," + fmt(r.beta_trn);
    for (double v : r.val_pck) s += "," + fmt(v);
    for (double v : r.layer_grad) s += "," + fmt(v);
    return s;
}

struct TrainOutputs {
    simsc::TrainResult result;
    simsc::Model model;
};

// Shared by cmd_train / cmd_grid_temp / cmd_grad_analysis: seeds the model,
// trains, optionally streams the epoch CSV.
TrainOutputs run_training(const simsc::TrainConfig& cfg, const simsc::Dataset& train_set,
                          const simsc::Dataset& val_set, const std::string& out_dir,
                          std::ostream* epoch_csv,
                          const std::function<void(const simsc::StepLogRow&)>& on_step = {}) {
    simsc::Model model = simsc::make_model(cfg.model, cfg.seed);
    std::function<void(const simsc::EpochLogRow&)> on_epoch;
    if (epoch_csv) {
        on_epoch = [epoch_csv](const simsc::EpochLogRow& row) {
            (*epoch_csv) << train_csv_row(row) << "\n";
            epoch_csv->flush();
        };
    }
    simsc::TrainResult result =
        simsc::train_model(model, train_set, val_set, cfg, out_dir, on_epoch, on_step);
    return {std::move(result), std::move(model)};
}

simsc::Dataset load_split(const std::string& data_dir, const char* split) {
    return simsc::load_dataset((fs::path(data_dir) / (std::string(split) + ".json")).string());
}

std::size_t worker_cap() {
    const char* env = std::getenv("SIMSC_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == nullptr || *end != '\0' || v < 1)
        throw std::invalid_argument("SIMSC_THREADS must be a positive integer");
    return static_cast<std::size_t>(v);
}

int run_gen(std::uint64_t seed, const std::string& out, std::size_t n_train, std::size_t n_val,
            std::size_t n_test, std::size_t size) {
    simsc::SynthConfig cfg;
    cfg.size = size;
    simsc::generate_split(seed, n_train, n_val, n_test, cfg, out);
    std::cout << "wrote " << n_train << "/" << n_val << "/" << n_test << " pairs to " << out
              << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& data_flag,
              const std::string& out_flag) {
    simsc::ExperimentConfig cfg = simsc::load_experiment_config(config_path);
    if (!data_flag.empty()) cfg.data = data_flag;
    if (!out_flag.empty()) cfg.out = out_flag;
    if (cfg.data.empty()) throw std::invalid_argument("cmd_train: --data (or config 'data') required");
    if (cfg.out.empty()) throw std::invalid_argument("cmd_train: --out (or config 'out') required");

    const simsc::Dataset train_set = load_split(cfg.data, "train");
    const simsc::Dataset val_set = load_split(cfg.data, "val");

    fs::create_directories(cfg.out);
    const fs::path csv_path = fs::path(cfg.out) / "train_log.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cmd_train: cannot open " + csv_path.string());
    csv << train_csv_header(cfg.train) << "\n";
    csv.flush();

    TrainOutputs outputs = run_training(cfg.train, train_set, val_set, cfg.out, &csv);
    if (outputs.result.diverged) {
        std::cerr << "training diverged: " << outputs.result.diagnostics << "\n";
        return 1;
    }
    std::cout << "best epoch " << outputs.result.best_epoch << " val_pck "
              << fmt(outputs.result.best_val_pck) << ", final val_pck "
              << fmt(outputs.result.final_val_pck) << "\n";
    std::cout << "weights in " << (fs::path(cfg.out) / "weights_best").string() << " and "
              << (fs::path(cfg.out) / "weights_final").string() << "\n";
    return 0;
}

int run_eval(const std::string& weights, const std::string& data_path,
             std::vector<double> alphas, const std::string& convention,
             std::optional<double> beta_eval, double sigma, const std::string& aggregate,
             const std::string& out_path) {
    const simsc::Model model = simsc::load_model(weights);
    const simsc::Dataset data = simsc::load_dataset(data_path);

    simsc::EvalOptions opts;
    if (!alphas.empty()) opts.alphas = std::move(alphas);
    opts.convention = simsc::threshold_convention_from_name(convention);
    opts.localizer.sigma = sigma;
    if (model.config.temperature.mode == simsc::TempMode::unit && !beta_eval.has_value())
        throw std::invalid_argument(
            "cmd_eval: unit-temperature weights require an explicit --beta-eval");
    opts.localizer.beta_eval = beta_eval.value_or(1.0);
    if (aggregate == "keypoints")
        opts.aggregate = simsc::AggregateMode::mean_over_keypoints;
    else if (aggregate != "pairs")
        throw std::invalid_argument("cmd_eval: --aggregate must be 'pairs' or 'keypoints'");

    const simsc::PckResult result = simsc::evaluate_model(model, data, opts);
    const std::string text = simsc::pck_result_to_json(result);
    if (out_path.empty()) {
        std::cout << text << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cmd_eval: cannot open " + out_path);
        out << text << "\n";
    }
    return 0;
}

int run_grid_temp(const std::vector<double>& betas, const std::string& config_path,
                  const std::string& data_flag, const std::string& out_path) {
    if (betas.empty()) throw std::invalid_argument("cmd_grid_temp: --betas must be non-empty");
    for (double b : betas)
        if (!(b > 0.0) || b > 1.0)
            throw std::invalid_argument("cmd_grid_temp: every beta must lie in (0,1]");
    simsc::ExperimentConfig base = simsc::load_experiment_config(config_path);
    if (!data_flag.empty()) base.data = data_flag;
    if (base.data.empty())
        throw std::invalid_argument("cmd_grid_temp: --data (or config 'data') required");

    const simsc::Dataset train_set = load_split(base.data, "train");
    const simsc::Dataset val_set = load_split(base.data, "val");

    struct Row {
        double beta;
        double pck005 = std::nan("");
        double pck01 = std::nan("");
        std::string status = "diverged";
    };
    std::vector<Row> rows(betas.size());

    // Each worker trains fully isolated models; the loaded datasets are
    // shared read-only constants.
    const std::size_t workers = std::min(worker_cap(), betas.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= betas.size()) break;
            simsc::TrainConfig cfg = base.train;
            cfg.model.temperature.mode = simsc::TempMode::manual;
            cfg.model.temperature.value = betas[i];
            // The manual temperature is baked into the correlation entries,
            // so evaluating at beta_eval=1 matches evaluating the unscaled
            // correlation at beta_eval=beta_trn.
            cfg.localizer.beta_eval = 1.0;
            Row row;
            row.beta = betas[i];
            TrainOutputs outputs = run_training(cfg, train_set, val_set, "", nullptr);
            if (!outputs.result.diverged && !outputs.result.epoch_log.empty()) {
                const auto& last = outputs.result.epoch_log.back();
                row.pck005 = last.val_pck[0];
                row.pck01 = last.val_pck[1];
                row.status = "ok";
            }
            rows[i] = std::move(row);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cmd_grid_temp: cannot open " + out_path);
        out = &file;
    }
    (*out) << "beta,pck_005,pck_01,status\n";
    for (const auto& row : rows)
        (*out) << fmt(row.beta) << "," << fmt(row.pck005) << "," << fmt(row.pck01) << ","
               << row.status << "\n";
    return 0;
}

int run_grad_analysis(const std::string& configs_path, const std::string& data_flag,
                      const std::string& out_path) {
    simsc::ExperimentConfig base = simsc::load_experiment_config(configs_path);
    if (!data_flag.empty()) base.data = data_flag;
    if (base.data.empty())
        throw std::invalid_argument("cmd_grad_analysis: --data (or config 'data') required");

    const simsc::Dataset train_set = load_split(base.data, "train");
    const simsc::Dataset val_set = load_split(base.data, "val");

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cmd_grad_analysis: cannot open " + out_path);
        out = &file;
    }
    (*out) << "config,step,loss,beta_trn";
    for (std::size_t i = 0; i <= base.train.model.backbone.layers; ++i)
        (*out) << ",grad_layer_" << i;
    (*out) << "\n";

    const struct {
        const char* label;
        simsc::Normalization normalization;
        simsc::TempMode mode;
    } variants[3] = {
        {"WithL2Norm", simsc::Normalization::l2, simsc::TempMode::unit},
        {"NoL2Norm", simsc::Normalization::none, simsc::TempMode::unit},
        {"SimSC", simsc::Normalization::l2, simsc::TempMode::learned_mlp},
    };

    for (const auto& variant : variants) {
        simsc::TrainConfig cfg = base.train;
        cfg.model.normalization = variant.normalization;
        cfg.model.temperature.mode = variant.mode;
        auto on_step = [&](const simsc::StepLogRow& row) {
            (*out) << variant.label << "," << row.step << "," << fmt(row.loss) << ","
                   << fmt(row.beta_trn);
            for (double g : row.layer_grad) (*out) << "," << fmt(g);
            (*out) << "\n";
            out->flush();
        };
        TrainOutputs outputs = run_training(cfg, train_set, val_set, "", nullptr, on_step);
        if (outputs.result.diverged) {
            std::cerr << "grad-analysis " << variant.label
                      << " diverged: " << outputs.result.diagnostics << "\n";
            return 1;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simsc: semantic correspondence with learned softmax temperature"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic correspondence dataset");
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    std::size_t gen_train = 512, gen_val = 64, gen_test = 64, gen_size = 64;
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--n-train", gen_train, "training pairs");
    gen->add_option("--n-val", gen_val, "validation pairs");
    gen->add_option("--n-test", gen_test, "test pairs");
    gen->add_option("--size", gen_size, "square canvas size in pixels");

    // train
    auto* train = app.add_subcommand("train", "train a model from an experiment config");
    std::string train_config, train_data, train_out;
    train->add_option("--config", train_config, "experiment config JSON")->required();
    train->add_option("--data", train_data, "dataset directory (train.json/val.json)");
    train->add_option("--out", train_out, "output directory for logs and weights");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate saved weights on a dataset split");
    std::string eval_weights, eval_data, eval_convention = "img", eval_aggregate = "pairs";
    std::string eval_out;
    std::vector<double> eval_alphas;
    double eval_beta = 0.0, eval_sigma = 7.0;
    eval->add_option("--weights", eval_weights, "weights directory")->required();
    eval->add_option("--data", eval_data, "dataset JSON file")->required();
    eval->add_option("--alphas", eval_alphas, "PCK thresholds")->delimiter(',');
    eval->add_option("--convention", eval_convention, "threshold convention: img|kps|bbox");
    auto* beta_opt = eval->add_option("--beta-eval", eval_beta, "localizer softmax temperature");
    eval->add_option("--sigma", eval_sigma, "localizer Gaussian mask std, feature cells");
    eval->add_option("--aggregate", eval_aggregate, "aggregate: pairs|keypoints");
    eval->add_option("--out", eval_out, "write the PCK JSON here instead of stdout");

    // grid-temp
    auto* grid = app.add_subcommand("grid-temp", "train manual-temperature models over a grid");
    std::vector<double> grid_betas;
    std::string grid_config, grid_data, grid_out;
    grid->add_option("--betas", grid_betas, "manual beta_trn values")->required()->delimiter(',');
    grid->add_option("--config", grid_config, "experiment config JSON")->required();
    grid->add_option("--data", grid_data, "dataset directory");
    grid->add_option("--out", grid_out, "write the CSV here instead of stdout");

    // grad-analysis
    auto* grad = app.add_subcommand("grad-analysis",
                                    "per-step gradient comparison of WithL2Norm/NoL2Norm/SimSC");
    std::string grad_configs, grad_data, grad_out;
    grad->add_option("--configs", grad_configs, "base experiment config JSON")->required();
    grad->add_option("--data", grad_data, "dataset directory");
    grad->add_option("--out", grad_out, "write the CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return run_gen(gen_seed, gen_out, gen_train, gen_val, gen_test, gen_size);
        if (train->parsed()) return run_train(train_config, train_data, train_out);
        if (eval->parsed()) {
            std::optional<double> beta;
            if (beta_opt->count() > 0) beta = eval_beta;
            return run_eval(eval_weights, eval_data, eval_alphas, eval_convention, beta,
                            eval_sigma, eval_aggregate, eval_out);
        }
        if (grid->parsed()) return run_grid_temp(grid_betas, grid_config, grid_data, grid_out);
        if (grad->parsed()) return run_grad_analysis(grad_configs, grad_data, grad_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::logic_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
