#include "simsc/config.hpp"

#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace simsc {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const auto& k : allowed)
            if (item.key() == k) ok = true;
        if (!ok) throw std::invalid_argument("config: unknown key '" + item.key() + "' in " + where);
    }
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& text, const std::string& where) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config: malformed JSON in " + where + ": " + e.what());
    }
    check_keys(j, {"mode",        "temperature_value", "normalization", "finetune_scope",
                   "lr_backbone", "lr_temp",           "lr_single",     "epochs",
                   "batch_size",  "warmup_epochs",     "n_s",           "n_k",
                   "sigma",       "beta_thres",        "gamma",         "beta_eval",
                   "clip_norm",   "seed",              "backbone",      "data",
                   "out"},
               where);

    ExperimentConfig cfg;
    TrainConfig& t = cfg.train;
    t.model.temperature.mode = temp_mode_from_name(j.value("mode", "learned_mlp"));
    t.model.temperature.value = j.value("temperature_value", 0.5);
    t.model.normalization = normalization_from_name(j.value("normalization", "l2"));
    t.scope = j.value("finetune_scope", "full") == std::string("last_block")
                  ? FinetuneScope::last_block
                  : FinetuneScope::full;
    if (j.contains("finetune_scope") && j["finetune_scope"] != "last_block" &&
        j["finetune_scope"] != "full")
        throw std::invalid_argument("config: finetune_scope must be 'full' or 'last_block'");
    t.lr_backbone = j.value("lr_backbone", 3e-4);
    t.lr_temp = j.value("lr_temp", 1e-4);
    t.lr_single = j.value("lr_single", 5e-3);
    t.epochs = j.value("epochs", std::size_t{60});
    t.batch_size = j.value("batch_size", std::size_t{4});
    t.warmup_epochs = j.value("warmup_epochs", std::size_t{0});
    t.loss.n_s = j.value("n_s", 3);
    t.loss.n_k = j.value("n_k", 5);
    t.loss.beta_thres = j.value("beta_thres", 0.1);
    t.loss.gamma = j.value("gamma", 0.2);
    t.localizer.sigma = j.value("sigma", 7.0);
    t.localizer.beta_eval = j.value("beta_eval", 1.0);
    t.clip_norm = j.value("clip_norm", 10.0);
    t.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("backbone")) {
        const json& b = j["backbone"];
        check_keys(b, {"channels", "ratio", "embed_dim", "layers", "feature_dim"}, "backbone");
        t.model.backbone.channels = b.value("channels", std::size_t{1});
        t.model.backbone.ratio = b.value("ratio", std::size_t{8});
        t.model.backbone.embed_dim = b.value("embed_dim", std::size_t{32});
        t.model.backbone.layers = b.value("layers", std::size_t{3});
        t.model.backbone.feature_dim = b.value("feature_dim", std::size_t{64});
    }
    cfg.data = j.value("data", "");
    cfg.out = j.value("out", "");
    validate_train_config(t);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return experiment_config_from_json(text, path);
}

}  // namespace simsc
