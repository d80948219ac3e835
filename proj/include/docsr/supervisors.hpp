#pragma once

#include <optional>
#include <string>
#include <vector>

#include "docsr/image.hpp"
#include "docsr/params.hpp"

namespace docsr {

// ---------------------------------------------------------------------------
// Frozen proxy supervisors. Each extractor owns an immutable ParamStore;
// parameters always enter tapes as constants, so no gradient can reach
// them. Surrogates are seeded-random networks honoring the real models'
// tensor contracts (backbone stride, head shapes, sequence layout); real
// weights can be loaded from checkpoint archives through the same
// constructors.
// ---------------------------------------------------------------------------

// Text-detection features: conv backbone (stride 16) -> 3x3 conv to a mid
// width -> row-wise bidirectional GRU -> 1x1 restore conv (the "deep"
// features) -> parallel 1x1 classification / vertical-regression heads.
// The classification head carries a fixed ink-density pathway so that the
// decoded detections respond to dark print, which the IoU metric needs.
struct CtpnConfig {
    std::vector<int> backbone_channels = {8, 12, 16, 24};  // one stride-2 conv each
    int mid_channels = 32;
    int gru_hidden = 12;
    int num_anchors = 2;
    double ink_gain = 8.0;
    double ink_threshold = 0.18;
    uint64_t seed = 101;

    static CtpnConfig tiny();  // for gradient-check sized inputs
    int stride() const { return 1 << static_cast<int>(backbone_channels.size()); }
};

struct CtpnFeatureNodes {
    int deep = -1;  // {mid, H', W'}
    int clss = -1;  // {anchors*2, H', W'}, channel a*2+1 = text logit
    int reg = -1;   // {anchors*2, H', W'}, (dy, dh) per anchor
};

struct CtpnFeatures {
    Tensor deep, clss, reg;
};

class CtpnExtractor {
public:
    explicit CtpnExtractor(const CtpnConfig& cfg);
    CtpnExtractor(const CtpnConfig& cfg, ParamStore params);

    CtpnFeatureNodes extract_nodes(Tape& tape, int image_unit) const;
    CtpnFeatures extract(const Image& unit_image) const;

    const CtpnConfig& config() const { return cfg_; }
    const ParamStore& params() const { return params_; }
    long call_count() const { return calls_; }

private:
    CtpnConfig cfg_;
    ParamStore params_;
    mutable long calls_ = 0;
};

// Recognition features: conv encoder with stride-(2,1) stages collapsing
// the height to exactly 1, then two stacked bidirectional LSTM layers over
// the width axis. Output is the {W', d} sequence of the last layer.
struct CrnnConfig {
    int collapse_stages = 8;  // input height must equal 2^collapse_stages
    int channels = 8;
    int lstm_hidden = 8;  // d = 2*lstm_hidden
    uint64_t seed = 202;

    static CrnnConfig tiny(int stages);
    int required_height() const { return 1 << collapse_stages; }
    int feature_dim() const { return 2 * lstm_hidden; }
};

struct CrnnFeatures {
    Tensor sequence;  // {W', d}
};

class CrnnExtractor {
public:
    explicit CrnnExtractor(const CrnnConfig& cfg);
    CrnnExtractor(const CrnnConfig& cfg, ParamStore params);

    int extract_node(Tape& tape, int image_unit) const;  // {W', d}
    CrnnFeatures extract(const Image& unit_image) const;

    const CrnnConfig& config() const { return cfg_; }
    const ParamStore& params() const { return params_; }
    long call_count() const { return calls_; }

private:
    CrnnConfig cfg_;
    ParamStore params_;
    mutable long calls_ = 0;
};

// Multi-scale keypoints: Harris-style response on fixed smoothed gradient
// products per scale, top-K selection with 3x3 non-max suppression on the
// HR side, and local gradient-window descriptors. Descriptors for the SR
// image are extracted at the HR-detected coordinates, which keeps the
// MSIP loss differentiable.
struct KeynetConfig {
    std::vector<int> scales = {1, 2, 4};  // downsampling factors
    int window = 8;                       // descriptor window (gradient patch)
    double harris_kappa = 0.06;
    uint64_t seed = 303;  // kept for config-format symmetry; no learned weights

    int min_input_dim() const;
};

struct Keypoint {
    double y = 0.0, x = 0.0;  // original-image pixels
    double response = 0.0;
    bool padded = false;
    Tensor descriptor;  // flattened {2*window*window}
};

struct KeypointScaleSet {
    int scale = 1;
    std::vector<Keypoint> points;  // sorted by descending response
};

struct KeypointSet {
    std::vector<KeypointScaleSet> scales;
    int k_top = 0;
    bool any_padded = false;
};

class KeynetExtractor {
public:
    explicit KeynetExtractor(const KeynetConfig& cfg);

    // Detection on a (reference) image; deterministic.
    KeypointSet detect(const Image& unit_image, int k_top) const;

    // Descriptor nodes for `image_unit` at the coordinates of `anchors`;
    // one {K, D} node per scale (padded rows are zero).
    std::vector<int> descriptor_nodes(Tape& tape, int image_unit,
                                      const KeypointSet& anchors) const;

    // Detection + own-coordinates descriptors (the public extractor op).
    KeypointSet extract(const Image& unit_image, int k_top) const;

    const KeynetConfig& config() const { return cfg_; }
    const ParamStore& params() const { return params_; }
    long call_count() const { return calls_; }

private:
    KeynetConfig cfg_;
    ParamStore params_;  // fixed smoothing/gradient kernels
    mutable long calls_ = 0;
};

// Hue component of HSV plus the saturation mask (zero where hue is
// undefined).
struct HueMap {
    Tensor hue;   // {H,W} in [0,1)
    Tensor mask;  // {H,W} in [0,1], the HSV saturation
};

HueMap extract_hue(const Image& unit_image);

// ---------------------------------------------------------------------------

struct SupervisorSelection {
    std::string ctpn = "surrogate";  // "surrogate" or "checkpoint:<path>"
    std::string crnn = "surrogate";
    std::string keynet = "surrogate";
};

class SupervisorBundle {
public:
    SupervisorBundle(CtpnConfig ctpn_cfg, CrnnConfig crnn_cfg, KeynetConfig keynet_cfg,
                     const SupervisorSelection& select = {});

    const CtpnExtractor& ctpn() const { return ctpn_; }
    const CrnnExtractor& crnn() const { return crnn_; }
    const KeynetExtractor& keynet() const { return keynet_; }

    // Digest over every supervisor parameter tensor; invariant across a
    // training run.
    uint64_t fingerprint() const;

private:
    CtpnExtractor ctpn_;
    CrnnExtractor crnn_;
    KeynetExtractor keynet_;
};

CtpnFeatures extract_ctpn(const SupervisorBundle& bundle, const Image& image);
CrnnFeatures extract_crnn(const SupervisorBundle& bundle, const Image& image);
KeypointSet extract_keypoints(const SupervisorBundle& bundle, const Image& image, int k_top);

}  // namespace docsr
