#pragma once

#include <string>
#include <vector>

#include "docsr/datasets.hpp"
#include "docsr/dwa.hpp"
#include "docsr/generator.hpp"
#include "docsr/losses.hpp"
#include "docsr/supervisors.hpp"

namespace docsr {

// One row of the experiment matrix: training-data regime plus the three
// loss toggles (the five image/detection components are always on).
struct VariantSpec {
    bool real_data = true;
    bool use_crnn = true;
    bool use_keynet = true;
    bool use_hue = true;

    std::string label() const;  // e.g. "M+-+^R"
    static VariantSpec parse(const std::string& label);
    LossConfig loss_config() const;
};

// The 16 training setups, real-data rows first, toggles in +++ .. ---
// order within each regime.
std::vector<VariantSpec> enumerate_variants();

struct TrainSample {
    Image lr;  // unit range
    Image hr;  // unit range, 4x dims
    PairSource source = PairSource::Real;
};

struct TrainConfig {
    GeneratorConfig generator = GeneratorConfig::desk();
    LossConfig losses = LossConfig::all();
    int epochs = 20;
    int batch_size = 4;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    int k_top = 16;            // keypoints per scale
    int crop_lr = 0;           // >0: fixed seeded per-sample LR crops
    double dwa_temperature = 2.0;
    std::string init_checkpoint;  // empty = fresh He init
    std::string out_dir;          // empty = no files written
    std::string stage = "real_finetune";  // or "synthetic_finetune"

    void validate() const;
};

// Adam over a ParamStore (bias-corrected, step counted globally).
class Adam {
public:
    Adam(const ParamStore& params, double beta1, double beta2, double eps);
    void step(ParamStore& params, const std::vector<Tensor>& grads, double lr);
    int64_t steps() const { return step_; }

private:
    std::vector<Tensor> m_, v_;
    int64_t step_ = 0;
    double beta1_, beta2_, eps_;
};

// Per-sample HR features cached across epochs (HR references are fixed).
class HrFeatureCache {
public:
    const HrFeatures& get(size_t sample_index, const SupervisorBundle& bundle, const Image& hr,
                          const LossConfig& cfg, int k_top);

private:
    std::vector<std::optional<HrFeatures>> slots_;
};

// One pass over the batches: forward, enabled losses, Adam step on the
// generator only. Returns sample-weighted epoch means.
LossBreakdown train_epoch(ParamStore& params, const GeneratorConfig& gen_cfg,
                          const SupervisorBundle& bundle,
                          const std::vector<std::vector<size_t>>& batches,
                          const std::vector<TrainSample>& samples, const WeightVector& weights,
                          Adam& adam, const TrainConfig& cfg, HrFeatureCache& cache,
                          int epoch_index);

struct RunResult {
    ParamStore params;
    std::vector<LossBreakdown> epoch_means;
    std::vector<WeightVector> weight_rows;
    uint64_t supervisor_fingerprint = 0;
    std::string checkpoint_path;
};

RunResult run_training(const TrainConfig& cfg, const SupervisorBundle& bundle,
                       const std::vector<TrainSample>& data);

// Two independent fine-tuning passes from the same initialization: stage 1
// on real pairs, stage 2 on simulated pairs (never chained).
struct TwoStageResult {
    RunResult real_stage;
    RunResult synthetic_stage;
};

TwoStageResult run_two_stage(const TrainConfig& base, const SupervisorBundle& bundle,
                             const std::vector<TrainSample>& real_data,
                             const std::vector<TrainSample>& synthetic_data);

// Loss CSV / weight-trajectory CSV writers (blank fields for disabled
// components).
void write_loss_csv(const std::string& path, const std::vector<LossBreakdown>& rows,
                    const std::vector<WeightVector>& weights);
void write_weight_csv(const std::string& path, const std::vector<WeightVector>& rows);

}  // namespace docsr
