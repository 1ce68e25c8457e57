#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "simsc/localizer.hpp"
#include "simsc/model.hpp"
#include "simsc/objective.hpp"

namespace simsc {

struct ParamGroup {
    std::vector<Tensor> params;
    double lr = 1e-3;
};

// Adam with per-group learning rates. Parameters whose gradient buffer is
// absent for a step are treated as having zero gradient.
class Adam {
public:
    explicit Adam(std::vector<ParamGroup> groups, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void zero_grad();
    double global_grad_norm() const;
    // Scales every gradient so the global norm is at most max_norm; returns
    // whether scaling was applied.
    bool clip_global_norm(double max_norm);
    void step();
    std::size_t steps_taken() const { return t_; }

private:
    struct Slot {
        Tensor param;
        double lr;
        std::vector<double> m, v;
    };
    std::vector<Slot> slots_;
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

struct TrainConfig {
    ModelConfig model;
    FinetuneScope scope = FinetuneScope::full;
    std::size_t epochs = 60;
    std::size_t batch_size = 4;
    std::size_t warmup_epochs = 0;  // patch-identity self-matching epochs
    double lr_backbone = 3e-4;
    double lr_temp = 1e-4;    // learned MLP head
    double lr_single = 5e-3;  // single raw temperature parameter
    double clip_norm = 10.0;
    LossConfig loss;
    LocalizerConfig localizer;  // validation-time localization
    std::vector<double> val_alphas{0.05, 0.1, 0.15};
    ThresholdConvention val_convention = ThresholdConvention::img;
    std::uint64_t seed = 1;
};

void validate_train_config(const TrainConfig& config);

struct EpochLogRow {
    std::size_t step = 0;   // optimizer steps completed so far
    std::size_t epoch = 0;  // 1-based
    double loss = 0, ce = 0, reg = 0;
    double mean_beta_a = 0, mean_beta_b = 0, beta_trn = 0;
    std::vector<double> val_pck;     // at val_alphas
    std::vector<double> layer_grad;  // per backbone block, epoch mean of mean|grad|
};

struct StepLogRow {
    std::size_t step = 0;  // 1-based
    double loss = 0;
    double beta_trn = 0;
    std::vector<double> layer_grad;  // per backbone block mean |grad|
};

struct TrainResult {
    bool diverged = false;
    std::string diagnostics;  // step and temperature at the failure point
    std::vector<EpochLogRow> epoch_log;
    std::vector<StepLogRow> step_log;
    double best_val_pck = 0.0;   // at the alpha nearest 0.1
    std::size_t best_epoch = 0;  // 1-based, 0 when never evaluated
    double final_val_pck = 0.0;
};

// Trains the model in place. When out_dir is non-empty, weights_best/ and
// weights_final/ are written beneath it (best = highest validation PCK at the
// alpha nearest 0.1, earliest epoch on ties). A non-finite loss or gradient
// stops training and is reported through `diverged`/`diagnostics` rather than
// thrown. The callbacks fire as each log row is produced, so callers can
// stream append-only logs.
TrainResult train_model(Model& model, const Dataset& train_set, const Dataset& val_set,
                        const TrainConfig& config, const std::string& out_dir = "",
                        const std::function<void(const EpochLogRow&)>& on_epoch = {},
                        const std::function<void(const StepLogRow&)>& on_step = {});

}  // namespace simsc
