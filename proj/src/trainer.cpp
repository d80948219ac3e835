#include "docsr/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "docsr/checkpoint.hpp"
#include "docsr/ops.hpp"
#include "docsr/rng.hpp"

namespace fs = std::filesystem;

namespace docsr {

// ---- variants -------------------------------------------------------------

std::string VariantSpec::label() const {
    std::string s = "M";
    s += use_crnn ? '+' : '-';
    s += use_keynet ? '+' : '-';
    s += use_hue ? '+' : '-';
    s += '^';
    s += real_data ? 'R' : 'S';
    return s;
}

VariantSpec VariantSpec::parse(const std::string& label) {
    if (label.size() != 6 || label[0] != 'M' || label[4] != '^' ||
        (label[5] != 'R' && label[5] != 'S'))
        throw ConfigError("bad variant label: " + label);
    auto flag = [&](char c) {
        if (c == '+') return true;
        if (c == '-') return false;
        throw ConfigError("bad variant label: " + label);
    };
    VariantSpec v;
    v.use_crnn = flag(label[1]);
    v.use_keynet = flag(label[2]);
    v.use_hue = flag(label[3]);
    v.real_data = label[5] == 'R';
    return v;
}

LossConfig VariantSpec::loss_config() const {
    return LossConfig::variant(use_crnn, use_keynet, use_hue);
}

std::vector<VariantSpec> enumerate_variants() {
    std::vector<VariantSpec> out;
    for (bool real : {true, false})
        for (int bits = 7; bits >= 0; --bits)
            out.push_back({real, (bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0});
    return out;
}

// ---- config ---------------------------------------------------------------

void TrainConfig::validate() const {
    generator.validate();
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("train.lr must be >= 0");
    if (k_top < 1) throw ConfigError("train.k_top must be >= 1");
    if (stage != "real_finetune" && stage != "synthetic_finetune")
        throw ConfigError("train.stage must be real_finetune or synthetic_finetune");
}

// ---- Adam -------------------------------------------------------------------

Adam::Adam(const ParamStore& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (size_t i = 0; i < params.count(); ++i) {
        m_.push_back(Tensor::zeros(params.tensor(i).shape()));
        v_.push_back(Tensor::zeros(params.tensor(i).shape()));
    }
}

void Adam::step(ParamStore& params, const std::vector<Tensor>& grads, double lr) {
    if (grads.size() != m_.size()) throw ContractError("adam: gradient count mismatch");
    ++step_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (size_t p = 0; p < m_.size(); ++p) {
        Tensor& theta = params.tensor(p);
        const Tensor& g = grads[p];
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (int64_t i = 0; i < theta.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

// ---- epoch ------------------------------------------------------------------

const HrFeatures& HrFeatureCache::get(size_t sample_index, const SupervisorBundle& bundle,
                                      const Image& hr, const LossConfig& cfg, int k_top) {
    if (slots_.size() <= sample_index) slots_.resize(sample_index + 1);
    if (!slots_[sample_index])
        slots_[sample_index] = prepare_hr_features(bundle, hr, cfg, k_top);
    return *slots_[sample_index];
}

LossBreakdown train_epoch(ParamStore& params, const GeneratorConfig& gen_cfg,
                          const SupervisorBundle& bundle,
                          const std::vector<std::vector<size_t>>& batches,
                          const std::vector<TrainSample>& samples, const WeightVector& weights,
                          Adam& adam, const TrainConfig& cfg, HrFeatureCache& cache,
                          int epoch_index) {
    weights.validate();
    LossBreakdown epoch_sum;
    epoch_sum.enabled = cfg.losses.enabled;
    int64_t n_samples = 0;

    int batch_index = 0;
    for (const auto& batch : batches) {
        std::vector<Tensor> grad_sum;
        for (size_t p = 0; p < params.count(); ++p)
            grad_sum.push_back(Tensor::zeros(params.tensor(p).shape()));

        for (size_t idx : batch) {
            const TrainSample& s = samples[idx];
            Tape tape;
            ParamNodes nodes = push_params(tape, params, true);
            int lr_node = tape.constant(to_signed(s.lr).data);
            int sr = generator_forward_nodes(tape, gen_cfg, params, nodes, lr_node);
            const HrFeatures& hrf = cache.get(idx, bundle, s.hr, cfg.losses, cfg.k_top);
            LossNodes losses =
                loss_pipeline(tape, sr, s.hr, s.lr, bundle, hrf, cfg.losses, weights);
            LossBreakdown bd = losses.read(tape, cfg.losses);
            if (!bd.all_finite()) {
                std::ostringstream os;
                os << "non-finite loss at epoch " << epoch_index << " batch " << batch_index
                   << ":";
                for (LossComponent c : kAllLoss)
                    if (bd.on(c)) os << " " << loss_name(c) << "=" << bd.get(c);
                throw TrainingAborted(os.str(), epoch_index, batch_index);
            }
            for (size_t i = 0; i < kNumLoss; ++i) epoch_sum.values[i] += bd.values[i];
            ++n_samples;

            tape.backward(losses.total);
            double inv_b = 1.0 / static_cast<double>(batch.size());
            for (size_t p = 0; p < params.count(); ++p) {
                Tensor g = tape.grad_of(nodes.node(p));
                double* dst = grad_sum[p].data();
                for (int64_t i = 0; i < g.size(); ++i) dst[i] += inv_b * g[i];
            }
        }
        adam.step(params, grad_sum, cfg.learning_rate);
        if (!params.all_finite())
            throw TrainingAborted("non-finite parameter after step", epoch_index, batch_index);
        ++batch_index;
    }

    for (size_t i = 0; i < kNumLoss; ++i)
        epoch_sum.values[i] = n_samples > 0 ? epoch_sum.values[i] / n_samples : 0.0;
    return epoch_sum;
}

// ---- runs -------------------------------------------------------------------

namespace {

std::vector<TrainSample> apply_fixed_crops(const std::vector<TrainSample>& data,
                                           const TrainConfig& cfg) {
    if (cfg.crop_lr <= 0) return data;
    std::vector<TrainSample> out;
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    for (const auto& s : data) {
        int lh = s.lr.height(), lw = s.lr.width();
        if (lh < cfg.crop_lr || lw < cfg.crop_lr)
            throw ConfigError("train.crop_lr larger than LR patches");
        int oy = lh == cfg.crop_lr ? 0 : rng.uniform_int(0, lh - cfg.crop_lr);
        int ox = lw == cfg.crop_lr ? 0 : rng.uniform_int(0, lw - cfg.crop_lr);
        TrainSample c;
        c.source = s.source;
        Tensor lr_t({3, cfg.crop_lr, cfg.crop_lr});
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < cfg.crop_lr; ++y)
                for (int x = 0; x < cfg.crop_lr; ++x)
                    lr_t.at(ch, y, x) = s.lr.data.at(ch, oy + y, ox + x);
        int hs = 4 * cfg.crop_lr;
        Tensor hr_t({3, hs, hs});
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < hs; ++y)
                for (int x = 0; x < hs; ++x)
                    hr_t.at(ch, y, x) = s.hr.data.at(ch, 4 * oy + y, 4 * ox + x);
        c.lr = Image(std::move(lr_t), s.lr.range);
        c.hr = Image(std::move(hr_t), s.hr.range);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<std::vector<size_t>> make_batches(size_t n, int batch_size, uint64_t seed,
                                              int epoch) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(seed * 2654435761ull + static_cast<uint64_t>(epoch) + 1);
    for (size_t i = n; i > 1; --i) {
        size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::vector<size_t>> batches;
    for (size_t i = 0; i < n; i += static_cast<size_t>(batch_size)) {
        std::vector<size_t> b;
        for (size_t j = i; j < std::min(n, i + static_cast<size_t>(batch_size)); ++j)
            b.push_back(order[j]);
        batches.push_back(std::move(b));
    }
    return batches;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void write_loss_csv(const std::string& path, const std::vector<LossBreakdown>& rows,
                    const std::vector<WeightVector>& weights) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "epoch,mse,cons,ctpn_deep,ctpn_clss,ctpn_reg,crnn,keynet,hue,total\n";
    for (size_t e = 0; e < rows.size(); ++e) {
        out << e;
        for (LossComponent c : kAllLoss) {
            out << ",";
            if (rows[e].on(c)) out << fmt_double(rows[e].get(c));
        }
        out << "," << fmt_double(total_loss(rows[e], weights[e])) << "\n";
    }
}

void write_weight_csv(const std::string& path, const std::vector<WeightVector>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "epoch,lambda_mse,lambda_cons,lambda_ctpn_deep,lambda_ctpn_clss,lambda_ctpn_reg,"
           "lambda_crnn,lambda_keynet,lambda_hue\n";
    for (size_t e = 0; e < rows.size(); ++e) {
        out << e;
        for (LossComponent c : kAllLoss) {
            out << ",";
            if (rows[e].enabled[static_cast<size_t>(c)]) out << fmt_double(rows[e].get(c));
        }
        out << "\n";
    }
}

RunResult run_training(const TrainConfig& cfg, const SupervisorBundle& bundle,
                       const std::vector<TrainSample>& data) {
    cfg.validate();
    if (data.empty()) throw ConfigError("run_training: empty dataset");
    for (const auto& s : data) {
        if (s.hr.height() != 4 * s.lr.height() || s.hr.width() != 4 * s.lr.width())
            throw ContractError("run_training: sample is not an exact 4x pair");
        if (cfg.stage == "synthetic_finetune" && s.source != PairSource::Simulated)
            throw ContractError("run_training: synthetic stage requires simulated samples");
    }

    std::vector<TrainSample> samples = apply_fixed_crops(data, cfg);

    RunResult result;
    result.supervisor_fingerprint = bundle.fingerprint();
    if (!cfg.init_checkpoint.empty()) {
        Checkpoint ckpt = load_checkpoint(cfg.init_checkpoint);
        auto plan = generator_param_plan(cfg.generator);
        if (ckpt.params.count() != plan.size())
            throw ConfigError("init checkpoint does not match generator config");
        for (size_t i = 0; i < plan.size(); ++i)
            if (ckpt.params.name(i) != plan[i].first ||
                ckpt.params.tensor(i).shape() != plan[i].second)
                throw ConfigError("init checkpoint tensor mismatch: " + ckpt.params.name(i));
        result.params = std::move(ckpt.params);
    } else {
        result.params = build_generator(cfg.generator, cfg.seed);
    }

    Adam adam(result.params, cfg.beta1, cfg.beta2, cfg.adam_eps);
    DwaState dwa(cfg.losses, cfg.dwa_temperature);
    HrFeatureCache cache;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        WeightVector w = update_weights(dwa, epoch);
        result.weight_rows.push_back(w);
        auto batches = make_batches(samples.size(), cfg.batch_size, cfg.seed, epoch);
        LossBreakdown means = train_epoch(result.params, cfg.generator, bundle, batches, samples,
                                          w, adam, cfg, cache, epoch);
        record_epoch(dwa, means);
        result.epoch_means.push_back(means);
    }

    if (bundle.fingerprint() != result.supervisor_fingerprint)
        throw Error("supervisor parameters changed during training");

    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        Checkpoint ckpt;
        ckpt.config.set("generator.num_residual_blocks",
                        std::to_string(cfg.generator.num_residual_blocks));
        ckpt.config.set("generator.trunk_channels", std::to_string(cfg.generator.trunk_channels));
        ckpt.config.set("generator.scale_factor", std::to_string(cfg.generator.scale_factor));
        ckpt.config.set("generator.input_channels", std::to_string(cfg.generator.input_channels));
        ckpt.params = result.params;
        result.checkpoint_path = cfg.out_dir + "/checkpoint.dsr";
        save_checkpoint(result.checkpoint_path, ckpt);
        write_loss_csv(cfg.out_dir + "/losses.csv", result.epoch_means, result.weight_rows);
        write_weight_csv(cfg.out_dir + "/weights.csv", result.weight_rows);
        std::ofstream meta(cfg.out_dir + "/run_meta");
        meta << "stage = " << cfg.stage << "\n"
             << "seed = " << cfg.seed << "\n"
             << "epochs = " << cfg.epochs << "\n"
             << "batch_size = " << cfg.batch_size << "\n"
             << "learning_rate = " << fmt_double(cfg.learning_rate) << "\n"
             << "supervisor_fingerprint = " << result.supervisor_fingerprint << "\n"
             << "version = docsr 0.1.0\n";
    }
    return result;
}

TwoStageResult run_two_stage(const TrainConfig& base, const SupervisorBundle& bundle,
                             const std::vector<TrainSample>& real_data,
                             const std::vector<TrainSample>& synthetic_data) {
    if (base.init_checkpoint.empty())
        throw ConfigError("run_two_stage: init_checkpoint required");
    TwoStageResult out;

    TrainConfig real_cfg = base;
    real_cfg.stage = "real_finetune";
    if (!base.out_dir.empty()) real_cfg.out_dir = base.out_dir + "/real";
    out.real_stage = run_training(real_cfg, bundle, real_data);

    // Stage 2 restarts from the same initialization; the stages are
    // independent comparisons, not a sequence.
    TrainConfig synth_cfg = base;
    synth_cfg.stage = "synthetic_finetune";
    if (!base.out_dir.empty()) synth_cfg.out_dir = base.out_dir + "/synthetic";
    out.synthetic_stage = run_training(synth_cfg, bundle, synthetic_data);
    return out;
}

}  // namespace docsr
