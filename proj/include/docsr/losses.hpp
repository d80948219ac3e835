#pragma once

#include <array>
#include <optional>
#include <string>

#include "docsr/image.hpp"
#include "docsr/supervisors.hpp"
#include "docsr/tape.hpp"

namespace docsr {

// The eight loss components of the training objective, in canonical order.
enum class LossComponent { Mse, Cons, CtpnDeep, CtpnClss, CtpnReg, Crnn, Keynet, Hue };
inline constexpr int kNumLoss = 8;
inline constexpr std::array<LossComponent, kNumLoss> kAllLoss = {
    LossComponent::Mse,      LossComponent::Cons, LossComponent::CtpnDeep,
    LossComponent::CtpnClss, LossComponent::CtpnReg, LossComponent::Crnn,
    LossComponent::Keynet,   LossComponent::Hue};

const char* loss_name(LossComponent c);

// Which components are active. The five image/detection components are
// always on in the experiment variants; CRNN / Key.Net / Hue toggle.
struct LossConfig {
    std::array<bool, kNumLoss> enabled{};

    static LossConfig all();
    static LossConfig mse_only();
    static LossConfig variant(bool use_crnn, bool use_keynet, bool use_hue);

    bool on(LossComponent c) const { return enabled[static_cast<size_t>(c)]; }
    int n_active() const;
};

// Per-component scalar values for one batch or epoch. Disabled components
// stay exactly 0 and are excluded from aggregation and DWA history.
struct LossBreakdown {
    std::array<double, kNumLoss> values{};
    std::array<bool, kNumLoss> enabled{};
    bool hue_mask_degenerate = false;

    double get(LossComponent c) const { return values[static_cast<size_t>(c)]; }
    void set(LossComponent c, double v) { values[static_cast<size_t>(c)] = v; }
    bool on(LossComponent c) const { return enabled[static_cast<size_t>(c)]; }
    bool all_finite() const;
};

// Per-component weights; sums to the number of enabled components.
struct WeightVector {
    std::array<double, kNumLoss> lambda{};
    std::array<bool, kNumLoss> enabled{};

    static WeightVector ones(const LossConfig& cfg);
    double get(LossComponent c) const { return lambda[static_cast<size_t>(c)]; }
    int n_active() const;
    void validate() const;  // sum law + positivity
};

// ---- plain (non-autodiff) loss kernels --------------------------------

double mse_loss(const Image& a, const Image& b);
double consistency_loss(const Image& sr, const Image& lr);  // D(sr) vs lr, 4x
double feature_l1(const Tensor& fa, const Tensor& fb);
double msip_loss(const KeypointSet& sr, const KeypointSet& hr);

struct HueLossResult {
    double value = 0.0;
    bool degenerate = false;  // reference mask was all-zero
};
HueLossResult hue_loss(const HueMap& sr, const HueMap& hr);

double total_loss(const LossBreakdown& breakdown, const WeightVector& weights);

// ---- differentiable pipeline ------------------------------------------

// HR-side reference features (fixed per sample, so the trainer caches
// them across epochs). Only the fields the enabled set needs are filled.
struct HrFeatures {
    std::optional<CtpnFeatures> ctpn;
    std::optional<CrnnFeatures> crnn;
    std::optional<KeypointSet> keypoints;
    std::optional<HueMap> hue;
};

HrFeatures prepare_hr_features(const SupervisorBundle& bundle, const Image& hr_unit,
                               const LossConfig& cfg, int k_top);

// Builds every enabled component from the generator output node
// (signed range) against fixed HR/LR references, plus the weighted total.
// Supervisor features for the HR side are plain constants; SR-side
// features stay on the tape so gradients reach the generator.
struct LossNodes {
    std::array<int, kNumLoss> component{};  // -1 when disabled
    int total = -1;

    LossBreakdown read(const Tape& tape, const LossConfig& cfg) const;
};

LossNodes loss_pipeline(Tape& tape, int sr_signed, const Image& hr_unit, const Image& lr_unit,
                        const SupervisorBundle& bundle, const HrFeatures& hr_feat,
                        const LossConfig& cfg, const WeightVector& weights);

// Convenience overload computing the HR features in place.
LossNodes loss_pipeline(Tape& tape, int sr_signed, const Image& hr_unit, const Image& lr_unit,
                        const SupervisorBundle& bundle, const LossConfig& cfg,
                        const WeightVector& weights, int k_top);

}  // namespace docsr
