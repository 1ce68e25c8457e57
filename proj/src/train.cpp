#include "simsc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "simsc/geometry.hpp"
#include "simsc/rng.hpp"

namespace simsc {

Adam::Adam(std::vector<ParamGroup> groups, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1 || eps <= 0)
        throw std::invalid_argument("Adam: betas must lie in [0,1) and eps must be positive");
    std::unordered_set<std::uint64_t> seen;
    for (const auto& group : groups) {
        if (group.lr < 0) throw std::invalid_argument("Adam: learning rate must be non-negative");
        for (const auto& p : group.params) {
            if (!p.defined() || !p.requires_grad())
                throw std::invalid_argument("Adam: parameters must be defined and require gradients");
            if (!seen.insert(p.id()).second)
                throw std::invalid_argument("Adam: parameter appears in more than one group");
            slots_.push_back(
                {p, group.lr, std::vector<double>(p.size(), 0.0), std::vector<double>(p.size(), 0.0)});
        }
    }
}

void Adam::zero_grad() {
    for (auto& slot : slots_) slot.param.zero_grad();
}

double Adam::global_grad_norm() const {
    double sq = 0.0;
    for (const auto& slot : slots_) {
        if (!slot.param.has_grad()) continue;
        for (double g : slot.param.grad()) sq += g * g;
    }
    return std::sqrt(sq);
}

bool Adam::clip_global_norm(double max_norm) {
    if (max_norm <= 0) throw std::invalid_argument("Adam: max_norm must be positive");
    const double norm = global_grad_norm();
    if (norm <= max_norm) return false;
    const double scale = max_norm / norm;
    for (auto& slot : slots_) {
        if (!slot.param.has_grad()) continue;
        for (double& g : slot.param.node()->grad) g *= scale;
    }
    return true;
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& slot : slots_) {
        const bool has = slot.param.has_grad();
        const std::vector<double>* g = has ? &slot.param.grad() : nullptr;
        std::vector<double>& x = slot.param.leaf_data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double gi = has ? (*g)[i] : 0.0;
            slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * gi;
            slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * gi * gi;
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            x[i] -= slot.lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void validate_train_config(const TrainConfig& config) {
    if (config.epochs < 1) throw std::invalid_argument("train: epochs must be at least 1");
    if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be at least 1");
    if (config.lr_backbone < 0 || config.lr_temp < 0 || config.lr_single < 0)
        throw std::invalid_argument("train: learning rates must be non-negative");
    if (config.clip_norm <= 0) throw std::invalid_argument("train: clip_norm must be positive");
    if (config.val_alphas.empty()) throw std::invalid_argument("train: val_alphas must be non-empty");
    validate_temperature_config(config.model.temperature);
    validate_loss_config(config.loss);
    validate_localizer_config(config.localizer);
}

namespace {

struct PairTerms {
    Tensor ce, reg;
    double beta_a = 1.0, beta_b = 1.0;
};

PairTerms pair_loss_terms(const Model& model, const DatasetPair& pair, const LossConfig& loss) {
    const FeatureMap fa = model.backbone.extract(pair.image_a);
    const FeatureMap fb = model.backbone.extract(pair.image_b);
    const auto [beta_a, beta_b] = model.temperature.effective_temperature(fa, fb);
    const CorrelationTensor corr =
        build_correlation(fa, fb, model.config.normalization, beta_a, beta_b);
    const std::size_t ratio = model.config.backbone.ratio;

    Tensor ce_sum;
    for (std::size_t i = 0; i < pair.keypoints_a.size(); ++i) {
        const Point qf = image_to_feature_coords(pair.keypoints_a[i], ratio, corr.h_a, corr.w_a);
        const Point gt = image_to_feature_coords(pair.keypoints_b[i], ratio, corr.h_b, corr.w_b);
        const ScoreMap m = extract_score_map(corr, qf);
        const GtDistribution dist = make_gt_distribution(gt, corr.h_b, corr.w_b, loss.n_s, loss.n_k);
        const Tensor ce = cross_entropy(m.data, dist);
        ce_sum = ce_sum.defined() ? add(ce_sum, ce) : ce;
    }
    PairTerms terms;
    terms.ce = div_scalar(ce_sum, static_cast<double>(pair.keypoints_a.size()));
    terms.reg = add(temperature_regularizer(beta_a, loss.beta_thres),
                    temperature_regularizer(beta_b, loss.beta_thres));
    terms.beta_a = beta_a.value();
    terms.beta_b = beta_b.value();
    return terms;
}

std::vector<double> backbone_layer_grads(const Model& model) {
    const std::vector<Tensor>& params = model.backbone.parameters();
    std::vector<double> out;
    for (std::size_t block = 0; 2 * block + 1 < params.size(); ++block) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t k : {2 * block, 2 * block + 1}) {
            const Tensor& p = params[k];
            if (p.has_grad())
                for (double g : p.grad()) sum += std::abs(g);
            count += p.size();
        }
        out.push_back(count ? sum / static_cast<double>(count) : 0.0);
    }
    return out;
}

void shuffle_indices(std::vector<std::size_t>& order, Rng& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_int(0, i - 1);
        std::swap(order[i - 1], order[j]);
    }
}

std::vector<std::vector<double>> snapshot_parameters(const Model& model) {
    std::vector<std::vector<double>> snap;
    for (const auto& p : model.parameters()) snap.push_back(p.data());
    return snap;
}

Model model_from_snapshot(const Model& like, const std::vector<std::vector<double>>& snap) {
    const std::vector<Tensor> params = like.parameters();
    if (snap.size() != params.size())
        throw std::logic_error("model_from_snapshot: parameter count mismatch");
    std::vector<Tensor> fresh;
    for (std::size_t i = 0; i < snap.size(); ++i)
        fresh.push_back(Tensor::from_data(params[i].shape(), snap[i], /*requires_grad=*/true));
    const std::size_t backbone_count = 2 * (like.config.backbone.layers + 1);
    std::vector<Tensor> bb(fresh.begin(), fresh.begin() + backbone_count);
    std::vector<Tensor> tp(fresh.begin() + backbone_count, fresh.end());
    return Model{like.config, Backbone(like.config.backbone, std::move(bb)),
                 TemperatureModule(like.config.temperature, like.config.backbone.feature_dim,
                                   std::move(tp))};
}

}  // namespace

TrainResult train_model(Model& model, const Dataset& train_set, const Dataset& val_set,
                        const TrainConfig& config, const std::string& out_dir,
                        const std::function<void(const EpochLogRow&)>& on_epoch,
                        const std::function<void(const StepLogRow&)>& on_step) {
    validate_train_config(config);
    if (train_set.pairs.empty() || val_set.pairs.empty())
        throw std::invalid_argument("train_model: train and val sets must be non-empty");

    std::vector<ParamGroup> groups;
    groups.push_back({model.backbone.trainable_parameters(config.scope), config.lr_backbone});
    std::vector<Tensor> temp_params = model.temperature.parameters();
    if (!temp_params.empty()) {
        const double lr = model.config.temperature.mode == TempMode::single_param
                              ? config.lr_single
                              : config.lr_temp;
        groups.push_back({std::move(temp_params), lr});
    }
    Adam opt(std::move(groups));
    std::vector<Tensor> all_params = model.parameters();
    auto zero_all = [&all_params] {
        for (auto& p : all_params) p.zero_grad();
    };

    std::size_t best_alpha = 0;
    for (std::size_t i = 1; i < config.val_alphas.size(); ++i)
        if (std::abs(config.val_alphas[i] - 0.1) < std::abs(config.val_alphas[best_alpha] - 0.1))
            best_alpha = i;

    EvalOptions val_opts;
    val_opts.alphas = config.val_alphas;
    val_opts.convention = config.val_convention;
    val_opts.localizer = config.localizer;

    TrainResult result;
    Rng shuffle_rng = Rng(config.seed).fork(101);
    std::vector<std::size_t> order(train_set.pairs.size());
    std::iota(order.begin(), order.end(), 0);

    std::size_t global_step = 0;
    double last_beta_trn = 1.0;
    double best_val = -1.0;
    std::vector<std::vector<double>> best_snapshot;

    try {
        // Warmup: the image matched against itself, ground truth at the query
        // cell, unit temperatures. Touches only the backbone.
        for (std::size_t we = 0; we < config.warmup_epochs; ++we) {
            shuffle_indices(order, shuffle_rng);
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t stop = std::min(order.size(), start + config.batch_size);
                zero_all();
                Tensor ce_batch;
                for (std::size_t k = start; k < stop; ++k) {
                    const Image& img = train_set.pairs[order[k]].image_a;
                    const FeatureMap f = model.backbone.extract(img);
                    const CorrelationTensor corr =
                        build_correlation(f, f, model.config.normalization, 1.0, 1.0);
                    Tensor ce_img;
                    std::size_t queries = 0;
                    for (std::size_t i = 0; i < corr.h_a; i += 2) {
                        for (std::size_t j = 0; j < corr.w_a; j += 2) {
                            const Point q{static_cast<double>(i), static_cast<double>(j)};
                            const ScoreMap m = extract_score_map(corr, q);
                            const GtDistribution dist = make_gt_distribution(
                                q, corr.h_b, corr.w_b, config.loss.n_s, config.loss.n_k);
                            const Tensor ce = cross_entropy(m.data, dist);
                            ce_img = ce_img.defined() ? add(ce_img, ce) : ce;
                            ++queries;
                        }
                    }
                    ce_img = div_scalar(ce_img, static_cast<double>(queries));
                    ce_batch = ce_batch.defined() ? add(ce_batch, ce_img) : ce_img;
                }
                Tensor loss = div_scalar(ce_batch, static_cast<double>(stop - start));
                loss.backward();
                ++global_step;
                StepLogRow row{global_step, loss.value(), 1.0, backbone_layer_grads(model)};
                opt.clip_global_norm(config.clip_norm);
                opt.step();
                result.step_log.push_back(std::move(row));
                if (on_step) on_step(result.step_log.back());
            }
        }

        for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
            shuffle_indices(order, shuffle_rng);
            double ep_loss = 0, ep_ce = 0, ep_reg = 0;
            double ep_beta_a = 0, ep_beta_b = 0, ep_beta_trn = 0;
            std::size_t ep_batches = 0, ep_pairs = 0;
            std::vector<double> ep_layer;

            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t stop = std::min(order.size(), start + config.batch_size);
                zero_all();
                Tensor ce_batch, reg_batch;
                for (std::size_t k = start; k < stop; ++k) {
                    const PairTerms terms =
                        pair_loss_terms(model, train_set.pairs[order[k]], config.loss);
                    ce_batch = ce_batch.defined() ? add(ce_batch, terms.ce) : terms.ce;
                    reg_batch = reg_batch.defined() ? add(reg_batch, terms.reg) : terms.reg;
                    ep_beta_a += terms.beta_a;
                    ep_beta_b += terms.beta_b;
                    ep_beta_trn += terms.beta_a * terms.beta_b;
                    last_beta_trn = terms.beta_a * terms.beta_b;
                    ++ep_pairs;
                }
                const double batch_count = static_cast<double>(stop - start);
                const Tensor ce = div_scalar(ce_batch, batch_count);
                const Tensor reg = div_scalar(reg_batch, batch_count);
                const Tensor loss = total_loss(ce, reg, config.loss.gamma);
                loss.backward();
                ++global_step;

                const std::vector<double> layer = backbone_layer_grads(model);
                if (ep_layer.empty()) ep_layer.assign(layer.size(), 0.0);
                for (std::size_t i = 0; i < layer.size(); ++i) ep_layer[i] += layer[i];
                result.step_log.push_back({global_step, loss.value(), last_beta_trn, layer});
                if (on_step) on_step(result.step_log.back());

                ep_loss += loss.value();
                ep_ce += ce.value();
                ep_reg += reg.value();
                ++ep_batches;

                opt.clip_global_norm(config.clip_norm);
                opt.step();
            }

            EpochLogRow row;
            row.step = global_step;
            row.epoch = epoch;
            row.loss = ep_loss / static_cast<double>(ep_batches);
            row.ce = ep_ce / static_cast<double>(ep_batches);
            row.reg = ep_reg / static_cast<double>(ep_batches);
            row.mean_beta_a = ep_beta_a / static_cast<double>(ep_pairs);
            row.mean_beta_b = ep_beta_b / static_cast<double>(ep_pairs);
            row.beta_trn = ep_beta_trn / static_cast<double>(ep_pairs);
            for (double& v : ep_layer) v /= static_cast<double>(ep_batches);
            row.layer_grad = std::move(ep_layer);
            row.val_pck = evaluate_model(model, val_set, val_opts).per_alpha;

            if (row.val_pck[best_alpha] > best_val) {
                best_val = row.val_pck[best_alpha];
                result.best_epoch = epoch;
                best_snapshot = snapshot_parameters(model);
            }
            result.epoch_log.push_back(std::move(row));
            if (on_epoch) on_epoch(result.epoch_log.back());
        }
    } catch (const std::runtime_error& e) {
        result.diverged = true;
        result.diagnostics = "step " + std::to_string(global_step + 1) + ": " + e.what() +
                             " (last beta_trn=" + std::to_string(last_beta_trn) + ")";
        return result;
    }

    result.best_val_pck = best_val;
    result.final_val_pck = result.epoch_log.back().val_pck[best_alpha];
    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        const Model best = model_from_snapshot(model, best_snapshot);
        save_model((fs::path(out_dir) / "weights_best").string(), best, config.seed);
        save_model((fs::path(out_dir) / "weights_final").string(), model, config.seed);
    }
    return result;
}

}  // namespace simsc
