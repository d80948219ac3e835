#include "docsr/losses.hpp"

#include <cmath>

#include "docsr/ops.hpp"
#include "docsr/resample.hpp"

namespace docsr {

const char* loss_name(LossComponent c) {
    switch (c) {
        case LossComponent::Mse: return "mse";
        case LossComponent::Cons: return "cons";
        case LossComponent::CtpnDeep: return "ctpn_deep";
        case LossComponent::CtpnClss: return "ctpn_clss";
        case LossComponent::CtpnReg: return "ctpn_reg";
        case LossComponent::Crnn: return "crnn";
        case LossComponent::Keynet: return "keynet";
        case LossComponent::Hue: return "hue";
    }
    return "?";
}

LossConfig LossConfig::all() {
    LossConfig cfg;
    cfg.enabled.fill(true);
    return cfg;
}

LossConfig LossConfig::mse_only() {
    LossConfig cfg;
    cfg.enabled[static_cast<size_t>(LossComponent::Mse)] = true;
    return cfg;
}

LossConfig LossConfig::variant(bool use_crnn, bool use_keynet, bool use_hue) {
    LossConfig cfg;
    cfg.enabled[static_cast<size_t>(LossComponent::Mse)] = true;
    cfg.enabled[static_cast<size_t>(LossComponent::Cons)] = true;
    cfg.enabled[static_cast<size_t>(LossComponent::CtpnDeep)] = true;
    cfg.enabled[static_cast<size_t>(LossComponent::CtpnClss)] = true;
    cfg.enabled[static_cast<size_t>(LossComponent::CtpnReg)] = true;
    cfg.enabled[static_cast<size_t>(LossComponent::Crnn)] = use_crnn;
    cfg.enabled[static_cast<size_t>(LossComponent::Keynet)] = use_keynet;
    cfg.enabled[static_cast<size_t>(LossComponent::Hue)] = use_hue;
    return cfg;
}

int LossConfig::n_active() const {
    int n = 0;
    for (bool b : enabled) n += b ? 1 : 0;
    return n;
}

bool LossBreakdown::all_finite() const {
    for (size_t i = 0; i < kNumLoss; ++i)
        if (enabled[i] && !std::isfinite(values[i])) return false;
    return true;
}

WeightVector WeightVector::ones(const LossConfig& cfg) {
    WeightVector w;
    w.enabled = cfg.enabled;
    for (size_t i = 0; i < kNumLoss; ++i) w.lambda[i] = cfg.enabled[i] ? 1.0 : 0.0;
    return w;
}

int WeightVector::n_active() const {
    int n = 0;
    for (bool b : enabled) n += b ? 1 : 0;
    return n;
}

void WeightVector::validate() const {
    double sum = 0.0;
    for (size_t i = 0; i < kNumLoss; ++i) {
        if (!enabled[i]) continue;
        if (!(lambda[i] > 0.0)) throw ContractError("weight vector: lambda must be positive");
        sum += lambda[i];
    }
    if (std::fabs(sum - n_active()) > 1e-9)
        throw ContractError("weight vector: sum != number of active components");
}

// ---- plain kernels ------------------------------------------------------

double mse_loss(const Image& a, const Image& b) {
    require_same_shape(a.data, b.data, "mse_loss");
    double acc = 0.0;
    for (int64_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double consistency_loss(const Image& sr, const Image& lr) {
    if (sr.height() != 4 * lr.height() || sr.width() != 4 * lr.width() ||
        sr.channels() != lr.channels())
        throw ShapeError("consistency_loss: SR dims must be exactly 4x LR dims");
    Tensor down = resample_bicubic(sr.data, lr.height(), lr.width());
    double acc = 0.0;
    for (int64_t i = 0; i < down.size(); ++i) {
        double d = down[i] - lr.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(down.size());
}

double feature_l1(const Tensor& fa, const Tensor& fb) {
    require_same_shape(fa, fb, "feature_l1");
    double acc = 0.0;
    for (int64_t i = 0; i < fa.size(); ++i) acc += std::fabs(fa[i] - fb[i]);
    return acc / static_cast<double>(fa.size());
}

double msip_loss(const KeypointSet& sr, const KeypointSet& hr) {
    if (sr.scales.size() != hr.scales.size() || sr.k_top != hr.k_top)
        throw ContractError("msip_loss: scale set / K_top mismatch");
    double acc = 0.0;
    for (size_t s = 0; s < sr.scales.size(); ++s) {
        if (sr.scales[s].scale != hr.scales[s].scale)
            throw ContractError("msip_loss: scale set mismatch");
        for (size_t k = 0; k < sr.scales[s].points.size(); ++k) {
            const Tensor& da = sr.scales[s].points[k].descriptor;
            const Tensor& db = hr.scales[s].points[k].descriptor;
            require_same_shape(da, db, "msip_loss");
            for (int64_t i = 0; i < da.size(); ++i) {
                double d = da[i] - db[i];
                acc += d * d;
            }
        }
    }
    return acc / (static_cast<double>(sr.scales.size()) * sr.k_top);
}

HueLossResult hue_loss(const HueMap& sr, const HueMap& hr) {
    require_same_shape(sr.hue, hr.hue, "hue_loss");
    double mask_sum = 0.0, acc = 0.0;
    for (int64_t i = 0; i < hr.mask.size(); ++i) {
        double m = hr.mask[i];
        mask_sum += m;
        double d = std::fabs(sr.hue[i] - hr.hue[i]);
        acc += m * std::min(d, 1.0 - d);
    }
    if (mask_sum <= 0.0) return {0.0, true};
    return {acc / mask_sum, false};
}

double total_loss(const LossBreakdown& breakdown, const WeightVector& weights) {
    if (breakdown.enabled != weights.enabled)
        throw ContractError("total_loss: weight/component key mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < kNumLoss; ++i)
        if (breakdown.enabled[i]) acc += weights.lambda[i] * breakdown.values[i];
    return acc;
}

// ---- differentiable pipeline --------------------------------------------

LossBreakdown LossNodes::read(const Tape& tape, const LossConfig& cfg) const {
    LossBreakdown out;
    out.enabled = cfg.enabled;
    for (size_t i = 0; i < kNumLoss; ++i)
        if (component[i] >= 0) out.values[i] = tape.val(component[i])[0];
    return out;
}

HrFeatures prepare_hr_features(const SupervisorBundle& bundle, const Image& hr_unit,
                               const LossConfig& cfg, int k_top) {
    HrFeatures out;
    if (cfg.on(LossComponent::CtpnDeep) || cfg.on(LossComponent::CtpnClss) ||
        cfg.on(LossComponent::CtpnReg))
        out.ctpn = bundle.ctpn().extract(hr_unit);
    if (cfg.on(LossComponent::Crnn)) out.crnn = bundle.crnn().extract(hr_unit);
    if (cfg.on(LossComponent::Keynet)) out.keypoints = bundle.keynet().detect(hr_unit, k_top);
    if (cfg.on(LossComponent::Hue)) out.hue = extract_hue(hr_unit);
    return out;
}

LossNodes loss_pipeline(Tape& tape, int sr_signed, const Image& hr_unit, const Image& lr_unit,
                        const SupervisorBundle& bundle, const LossConfig& cfg,
                        const WeightVector& weights, int k_top) {
    return loss_pipeline(tape, sr_signed, hr_unit, lr_unit, bundle,
                         prepare_hr_features(bundle, hr_unit, cfg, k_top), cfg, weights);
}

LossNodes loss_pipeline(Tape& tape, int sr_signed, const Image& hr_unit, const Image& lr_unit,
                        const SupervisorBundle& bundle, const HrFeatures& hr_feat,
                        const LossConfig& cfg, const WeightVector& weights) {
    if (weights.enabled != cfg.enabled)
        throw ContractError("loss_pipeline: weights do not cover the enabled set");
    if (hr_unit.range != ValueRange::Unit || lr_unit.range != ValueRange::Unit)
        throw ContractError("loss_pipeline: references must be unit range");
    const Tensor& sr = tape.val(sr_signed);
    if (sr.rank() != 3 || sr.dim(0) != 3) throw ShapeError("loss_pipeline: SR must be {3,H,W}");
    if (sr.dim(1) != hr_unit.height() || sr.dim(2) != hr_unit.width())
        throw ShapeError("loss_pipeline: SR dims must match HR dims");

    LossNodes out;
    out.component.fill(-1);
    int sr_unit = ops::affine(tape, sr_signed, 0.5, 0.5);
    auto idx = [](LossComponent c) { return static_cast<size_t>(c); };

    if (cfg.on(LossComponent::Mse)) {
        int hr = tape.constant(hr_unit.data);
        out.component[idx(LossComponent::Mse)] = ops::mean_sq(tape, ops::sub(tape, sr_unit, hr));
    }
    if (cfg.on(LossComponent::Cons)) {
        if (sr.dim(1) != 4 * lr_unit.height() || sr.dim(2) != 4 * lr_unit.width())
            throw ShapeError("loss_pipeline: SR dims must be exactly 4x LR dims");
        int down = ops::resample(tape, sr_unit, lr_unit.height(), lr_unit.width());
        int lr = tape.constant(lr_unit.data);
        out.component[idx(LossComponent::Cons)] = ops::mean_sq(tape, ops::sub(tape, down, lr));
    }
    bool need_ctpn = cfg.on(LossComponent::CtpnDeep) || cfg.on(LossComponent::CtpnClss) ||
                     cfg.on(LossComponent::CtpnReg);
    if (need_ctpn) {
        if (!hr_feat.ctpn) throw ContractError("loss_pipeline: missing HR ctpn features");
        CtpnFeatureNodes sr_feat = bundle.ctpn().extract_nodes(tape, sr_unit);
        if (cfg.on(LossComponent::CtpnDeep))
            out.component[idx(LossComponent::CtpnDeep)] = ops::mean_abs(
                tape, ops::sub(tape, sr_feat.deep, tape.constant(hr_feat.ctpn->deep)));
        if (cfg.on(LossComponent::CtpnClss))
            out.component[idx(LossComponent::CtpnClss)] = ops::mean_abs(
                tape, ops::sub(tape, sr_feat.clss, tape.constant(hr_feat.ctpn->clss)));
        if (cfg.on(LossComponent::CtpnReg))
            out.component[idx(LossComponent::CtpnReg)] = ops::mean_abs(
                tape, ops::sub(tape, sr_feat.reg, tape.constant(hr_feat.ctpn->reg)));
    }
    if (cfg.on(LossComponent::Crnn)) {
        if (!hr_feat.crnn) throw ContractError("loss_pipeline: missing HR crnn features");
        int sr_seq = bundle.crnn().extract_node(tape, sr_unit);
        out.component[idx(LossComponent::Crnn)] =
            ops::mean_abs(tape, ops::sub(tape, sr_seq, tape.constant(hr_feat.crnn->sequence)));
    }
    if (cfg.on(LossComponent::Keynet)) {
        if (!hr_feat.keypoints) throw ContractError("loss_pipeline: missing HR keypoints");
        const KeypointSet& anchors = *hr_feat.keypoints;
        std::vector<int> sr_desc = bundle.keynet().descriptor_nodes(tape, sr_unit, anchors);
        std::vector<int> terms;
        std::vector<double> term_w;
        double norm = 1.0 / (static_cast<double>(anchors.scales.size()) * anchors.k_top);
        for (size_t s = 0; s < anchors.scales.size(); ++s) {
            const auto& pts = anchors.scales[s].points;
            int D = static_cast<int>(pts.empty() ? 0 : pts[0].descriptor.size());
            Tensor hr_mat({static_cast<int>(pts.size()), D});
            for (size_t k = 0; k < pts.size(); ++k)
                for (int i = 0; i < D; ++i) hr_mat.at(static_cast<int>(k), i) =
                    pts[k].descriptor[i];
            terms.push_back(ops::sum_sq(tape, ops::sub(tape, sr_desc[s], tape.constant(hr_mat))));
            term_w.push_back(norm);
        }
        out.component[idx(LossComponent::Keynet)] = ops::weighted_sum(tape, terms, term_w);
    }
    if (cfg.on(LossComponent::Hue)) {
        if (!hr_feat.hue) throw ContractError("loss_pipeline: missing HR hue map");
        out.component[idx(LossComponent::Hue)] =
            ops::hue_circular_loss(tape, sr_unit, hr_feat.hue->hue, hr_feat.hue->mask);
    }

    std::vector<int> enabled_nodes;
    std::vector<double> lams;
    for (LossComponent c : kAllLoss) {
        if (!cfg.on(c)) continue;
        enabled_nodes.push_back(out.component[idx(c)]);
        lams.push_back(weights.get(c));
    }
    out.total = ops::weighted_sum(tape, enabled_nodes, lams);
    return out;
}

}  // namespace docsr
