#include "simsc/model.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "simsc/serialize.hpp"

namespace simsc {
namespace {

using nlohmann::json;

json backbone_config_to_json(const BackboneConfig& c) {
    return json{{"channels", c.channels},
                {"ratio", c.ratio},
                {"embed_dim", c.embed_dim},
                {"layers", c.layers},
                {"feature_dim", c.feature_dim}};
}

BackboneConfig backbone_config_from_json(const json& j) {
    BackboneConfig c;
    c.channels = j.at("channels").get<std::size_t>();
    c.ratio = j.at("ratio").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    return c;
}

}  // namespace

std::string normalization_name(Normalization normalization) {
    return normalization == Normalization::l2 ? "l2" : "none";
}

Normalization normalization_from_name(const std::string& name) {
    if (name == "l2") return Normalization::l2;
    if (name == "none") return Normalization::none;
    throw std::invalid_argument("unknown normalization: " + name);
}

std::vector<Tensor> Model::parameters() const {
    std::vector<Tensor> all = backbone.parameters();
    for (const auto& p : temperature.parameters()) all.push_back(p);
    return all;
}

std::vector<Tensor> Model::trainable_parameters(FinetuneScope scope) const {
    std::vector<Tensor> all = backbone.trainable_parameters(scope);
    for (const auto& p : temperature.parameters()) all.push_back(p);
    return all;
}

Model make_model(const ModelConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    Rng backbone_rng = rng.fork(1);
    Rng temp_rng = rng.fork(2);
    Backbone backbone(config.backbone, backbone_rng);
    TemperatureModule temperature(config.temperature, config.backbone.feature_dim, temp_rng);
    return Model{config, std::move(backbone), std::move(temperature)};
}

void save_model(const std::string& dir, const Model& model, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::vector<Tensor> params = model.parameters();
    json param_list = json::array();
    for (std::size_t i = 0; i < params.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "param_%02zu.smt", i);
        save_smt((fs::path(dir) / name).string(), params[i]);
        param_list.push_back({{"file", name}, {"shape", params[i].shape()}});
    }
    json manifest{{"format", "simsc-weights"},
                  {"version", 1},
                  {"seed", seed},
                  {"backbone", backbone_config_to_json(model.config.backbone)},
                  {"temperature",
                   {{"mode", temp_mode_name(model.config.temperature.mode)},
                    {"value", model.config.temperature.value}}},
                  {"normalization", normalization_name(model.config.normalization)},
                  {"params", param_list}};
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ofstream out(manifest_path);
    if (!out) throw std::runtime_error("save_model: cannot open " + manifest_path.string());
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("save_model: write failed for " + manifest_path.string());
}

Model load_model(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("load_model: cannot open " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument("load_model: malformed manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "simsc-weights")
        throw std::invalid_argument("load_model: not a weights manifest: " + manifest_path.string());

    ModelConfig config;
    config.backbone = backbone_config_from_json(manifest.at("backbone"));
    config.temperature.mode = temp_mode_from_name(manifest.at("temperature").at("mode").get<std::string>());
    config.temperature.value = manifest.at("temperature").at("value").get<double>();
    config.normalization = normalization_from_name(manifest.at("normalization").get<std::string>());

    std::vector<Tensor> params;
    for (const auto& entry : manifest.at("params")) {
        const std::string file = entry.at("file").get<std::string>();
        Tensor t = load_smt_tensor((fs::path(dir) / file).string(), /*requires_grad=*/true);
        const Shape expect = entry.at("shape").get<Shape>();
        if (t.shape() != expect)
            throw std::invalid_argument("load_model: shape mismatch for " + file);
        params.push_back(std::move(t));
    }

    const std::size_t backbone_count = 2 * (config.backbone.layers + 1);
    if (params.size() < backbone_count)
        throw std::invalid_argument("load_model: manifest lists too few parameters");
    std::vector<Tensor> backbone_params(params.begin(), params.begin() + backbone_count);
    std::vector<Tensor> temp_params(params.begin() + backbone_count, params.end());

    Backbone backbone(config.backbone, std::move(backbone_params));
    TemperatureModule temperature(config.temperature, config.backbone.feature_dim,
                                  std::move(temp_params));
    return Model{config, std::move(backbone), std::move(temperature)};
}

CorrelationTensor model_correlation(const Model& model, const Image& a, const Image& b) {
    const FeatureMap fa = model.backbone.extract(a);
    const FeatureMap fb = model.backbone.extract(b);
    const auto [beta_a, beta_b] = model.temperature.effective_temperature(fa, fb);
    return build_correlation(fa, fb, model.config.normalization, beta_a, beta_b);
}

PckResult evaluate_model(const Model& model, const Dataset& data, const EvalOptions& options) {
    return evaluate_model_sweep(model, data, options, {options.localizer.beta_eval}).front();
}

std::vector<PckResult> evaluate_model_sweep(const Model& model, const Dataset& data,
                                            const EvalOptions& options,
                                            const std::vector<double>& beta_evals) {
    if (beta_evals.empty()) throw std::invalid_argument("evaluate_model_sweep: no beta_eval values");
    if (data.pairs.empty()) throw std::invalid_argument("evaluate_model_sweep: empty dataset");
    for (double b : beta_evals) {
        LocalizerConfig probe = options.localizer;
        probe.beta_eval = b;
        validate_localizer_config(probe);
    }

    std::vector<PckResult> results(beta_evals.size());
    for (auto& r : results) {
        r.convention = threshold_convention_name(options.convention);
        r.alphas = options.alphas;
    }
    std::vector<std::size_t> counts;
    const std::size_t ratio = model.config.backbone.ratio;

    for (const auto& pair : data.pairs) {
        const CorrelationTensor corr = model_correlation(model, pair.image_a, pair.image_b);
        const CorrespondenceSet set = to_correspondence_set(pair);
        const double theta = base_threshold(set, options.convention);
        counts.push_back(pair.keypoints_a.size());
        for (std::size_t bi = 0; bi < beta_evals.size(); ++bi) {
            LocalizerConfig loc = options.localizer;
            loc.beta_eval = beta_evals[bi];
            std::vector<Point> preds;
            preds.reserve(pair.keypoints_a.size());
            for (const auto& query : pair.keypoints_a)
                preds.push_back(predict_correspondence(corr, query, ratio, ratio, loc));
            std::vector<double> row;
            row.reserve(options.alphas.size());
            for (double alpha : options.alphas) row.push_back(pck(preds, set, alpha, theta));
            results[bi].per_pair.push_back(std::move(row));
        }
    }
    for (auto& r : results) r.per_alpha = aggregate(r.per_pair, counts, options.aggregate);
    return results;
}

}  // namespace simsc
