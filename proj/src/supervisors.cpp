#include "docsr/supervisors.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "docsr/checkpoint.hpp"
#include "docsr/ops.hpp"
#include "docsr/rng.hpp"

namespace docsr {
namespace {

Tensor rand_uniform(Rng& rng, std::vector<int> shape, double bound) {
    Tensor t(std::move(shape));
    for (auto& v : t.vec()) v = rng.uniform(-bound, bound);
    return t;
}

void add_conv(ParamStore& store, Rng& rng, const std::string& base, int cout, int cin, int kh,
              int kw) {
    double bound = std::sqrt(1.0 / (static_cast<double>(cin) * kh * kw));
    store.add(base + ".weight", rand_uniform(rng, {cout, cin, kh, kw}, bound));
    store.add(base + ".bias", rand_uniform(rng, {cout}, bound));
}

void add_gate(ParamStore& store, Rng& rng, const std::string& name, int out, int in) {
    double bound = std::sqrt(1.0 / in);
    store.add(name + ".W", rand_uniform(rng, {out, in}, bound));
    store.add(name + ".b", rand_uniform(rng, {out}, bound));
}

struct Look {
    const ParamNodes& nodes;
    const ParamStore& store;
    int operator()(const std::string& name) const {
        for (size_t i = 0; i < store.count(); ++i)
            if (store.name(i) == name) return nodes.node(i);
        throw ContractError("supervisor forward: missing parameter " + name);
    }
};

// z = sig(Wz.[x,h]+bz); r = sig(Wr.[x,h]+br); n = tanh(Wn.[x, r*h]+bn);
// h' = (1-z)*h + z*n
int gru_cell(Tape& t, const Look& look, const std::string& base, int x, int h) {
    int xh = ops::concat1d(t, x, h);
    int z = ops::sigmoid(t, ops::matvec(t, look(base + ".z.W"), xh, look(base + ".z.b")));
    int r = ops::sigmoid(t, ops::matvec(t, look(base + ".r.W"), xh, look(base + ".r.b")));
    int rh = ops::mul(t, r, h);
    int xrh = ops::concat1d(t, x, rh);
    int n = ops::tanh(t, ops::matvec(t, look(base + ".n.W"), xrh, look(base + ".n.b")));
    int one_minus_z = ops::affine(t, z, -1.0, 1.0);
    return ops::add(t, ops::mul(t, one_minus_z, h), ops::mul(t, z, n));
}

struct LstmState {
    int h, c;
};

LstmState lstm_cell(Tape& t, const Look& look, const std::string& base, int x, LstmState s) {
    int xh = ops::concat1d(t, x, s.h);
    int i = ops::sigmoid(t, ops::matvec(t, look(base + ".i.W"), xh, look(base + ".i.b")));
    int f = ops::sigmoid(t, ops::matvec(t, look(base + ".f.W"), xh, look(base + ".f.b")));
    int g = ops::tanh(t, ops::matvec(t, look(base + ".g.W"), xh, look(base + ".g.b")));
    int o = ops::sigmoid(t, ops::matvec(t, look(base + ".o.W"), xh, look(base + ".o.b")));
    int c = ops::add(t, ops::mul(t, f, s.c), ops::mul(t, i, g));
    int h = ops::mul(t, o, ops::tanh(t, c));
    return {h, c};
}

}  // namespace

// --------------------------------------------------------------------- CTPN

CtpnConfig CtpnConfig::tiny() {
    CtpnConfig cfg;
    cfg.backbone_channels = {4, 6, 8, 8};
    cfg.mid_channels = 8;
    cfg.gru_hidden = 4;
    cfg.num_anchors = 2;
    return cfg;
}

namespace {

ParamStore build_ctpn_params(const CtpnConfig& cfg) {
    Rng rng(cfg.seed);
    ParamStore store;
    int cin = 3;
    for (size_t i = 0; i < cfg.backbone_channels.size(); ++i) {
        add_conv(store, rng, "backbone" + std::to_string(i), cfg.backbone_channels[i], cin, 3, 3);
        cin = cfg.backbone_channels[i];
    }
    add_conv(store, rng, "mid_conv", cfg.mid_channels, cin, 3, 3);
    int gh = cfg.gru_hidden;
    for (const char* dir : {"fw", "bw"}) {
        std::string base = std::string("gru_") + dir;
        add_gate(store, rng, base + ".z", gh, cfg.mid_channels + gh);
        add_gate(store, rng, base + ".r", gh, cfg.mid_channels + gh);
        add_gate(store, rng, base + ".n", gh, cfg.mid_channels + gh);
    }
    add_conv(store, rng, "restore_conv", cfg.mid_channels, 2 * gh, 1, 1);
    add_conv(store, rng, "clss_conv", 2 * cfg.num_anchors, cfg.mid_channels, 1, 1);
    add_conv(store, rng, "reg_conv", 2 * cfg.num_anchors, cfg.mid_channels, 1, 1);
    return store;
}

void check_store_matches(const ParamStore& expected, const ParamStore& loaded,
                         const std::string& what) {
    if (expected.count() != loaded.count())
        throw IoError(what + ": parameter count mismatch in checkpoint");
    for (size_t i = 0; i < expected.count(); ++i) {
        if (expected.name(i) != loaded.name(i))
            throw IoError(what + ": parameter name mismatch: " + loaded.name(i));
        if (expected.tensor(i).shape() != loaded.tensor(i).shape())
            throw IoError(what + ": shape mismatch for " + loaded.name(i));
    }
}

}  // namespace

CtpnExtractor::CtpnExtractor(const CtpnConfig& cfg) : cfg_(cfg), params_(build_ctpn_params(cfg)) {}

CtpnExtractor::CtpnExtractor(const CtpnConfig& cfg, ParamStore params) : cfg_(cfg) {
    check_store_matches(build_ctpn_params(cfg), params, "ctpn");
    params_ = std::move(params);
}

CtpnFeatureNodes CtpnExtractor::extract_nodes(Tape& t, int image_unit) const {
    const Tensor& img = t.val(image_unit);
    if (img.rank() != 3 || img.dim(0) != 3) throw ContractError("ctpn: image must be {3,H,W}");
    if (img.dim(1) < cfg_.stride() || img.dim(2) < cfg_.stride())
        throw InputTooSmallError("ctpn: image smaller than backbone receptive field");
    ParamNodes nodes = push_params(t, params_, false);
    Look look{nodes, params_};

    // Fixed ink pathway: per-cell mean of (1 - mean RGB).
    Tensor luma_w({1, 3, 1, 1}, {-1.0 / 3, -1.0 / 3, -1.0 / 3});
    int ink = ops::conv2d(t, image_unit, t.constant(luma_w), t.constant(Tensor({1}, {1.0})), 1, 1,
                          0, 0);
    int ink_cells = ops::avg_pool(t, ink, cfg_.stride());

    int h = image_unit;
    for (size_t i = 0; i < cfg_.backbone_channels.size(); ++i) {
        std::string base = "backbone" + std::to_string(i);
        h = ops::tanh(t, ops::conv2d(t, h, look(base + ".weight"), look(base + ".bias"), 2, 2, 1,
                                     1));
    }
    h = ops::tanh(t,
                  ops::conv2d(t, h, look("mid_conv.weight"), look("mid_conv.bias"), 1, 1, 1, 1));

    int hp = t.val(h).dim(1), wp = t.val(h).dim(2);
    int gh = cfg_.gru_hidden;
    Tensor zero_h({gh});
    std::vector<int> cells(static_cast<size_t>(hp) * wp);
    for (int row = 0; row < hp; ++row) {
        std::vector<int> fw(static_cast<size_t>(wp)), bw(static_cast<size_t>(wp));
        int state = t.constant(zero_h);
        for (int col = 0; col < wp; ++col) {
            state = gru_cell(t, look, "gru_fw", ops::pixel_vector(t, h, row, col), state);
            fw[static_cast<size_t>(col)] = state;
        }
        state = t.constant(zero_h);
        for (int col = wp - 1; col >= 0; --col) {
            state = gru_cell(t, look, "gru_bw", ops::pixel_vector(t, h, row, col), state);
            bw[static_cast<size_t>(col)] = state;
        }
        for (int col = 0; col < wp; ++col)
            cells[static_cast<size_t>(row) * wp + col] =
                ops::concat1d(t, fw[static_cast<size_t>(col)], bw[static_cast<size_t>(col)]);
    }
    int seq_map = ops::stack_to_chw(t, cells, 2 * gh, hp, wp);

    int deep = ops::tanh(t, ops::conv2d(t, seq_map, look("restore_conv.weight"),
                                        look("restore_conv.bias"), 1, 1, 0, 0));
    int clss = ops::conv2d(t, deep, look("clss_conv.weight"), look("clss_conv.bias"), 1, 1, 0, 0);
    std::vector<int> text_channels;
    for (int a = 0; a < cfg_.num_anchors; ++a) text_channels.push_back(2 * a + 1);
    clss = ops::add_scaled_to_channels(t, clss, ink_cells, cfg_.ink_gain,
                                       -cfg_.ink_gain * cfg_.ink_threshold, text_channels);
    int reg = ops::conv2d(t, deep, look("reg_conv.weight"), look("reg_conv.bias"), 1, 1, 0, 0);
    return {deep, clss, reg};
}

CtpnFeatures CtpnExtractor::extract(const Image& unit_image) const {
    unit_image.validate();
    if (unit_image.range != ValueRange::Unit) throw ContractError("ctpn: image must be unit range");
    ++calls_;
    Tape t;
    int img = t.constant(unit_image.data);
    CtpnFeatureNodes n = extract_nodes(t, img);
    return {t.val(n.deep), t.val(n.clss), t.val(n.reg)};
}

// --------------------------------------------------------------------- CRNN

CrnnConfig CrnnConfig::tiny(int stages) {
    CrnnConfig cfg;
    cfg.collapse_stages = stages;
    cfg.channels = 6;
    cfg.lstm_hidden = 4;
    return cfg;
}

namespace {

ParamStore build_crnn_params(const CrnnConfig& cfg) {
    Rng rng(cfg.seed);
    ParamStore store;
    int cin = 3;
    for (int s = 0; s < cfg.collapse_stages; ++s) {
        add_conv(store, rng, "stage" + std::to_string(s), cfg.channels, cin, 3, 3);
        cin = cfg.channels;
    }
    int lh = cfg.lstm_hidden;
    int in1 = cfg.channels, in2 = 2 * lh;
    for (int layer = 0; layer < 2; ++layer) {
        int in = layer == 0 ? in1 : in2;
        for (const char* dir : {"fw", "bw"}) {
            std::string base = "lstm" + std::to_string(layer) + "_" + dir;
            for (const char* gate : {"i", "f", "g", "o"})
                add_gate(store, rng, base + "." + gate, lh, in + lh);
        }
    }
    return store;
}

}  // namespace

CrnnExtractor::CrnnExtractor(const CrnnConfig& cfg) : cfg_(cfg), params_(build_crnn_params(cfg)) {}

CrnnExtractor::CrnnExtractor(const CrnnConfig& cfg, ParamStore params) : cfg_(cfg) {
    check_store_matches(build_crnn_params(cfg), params, "crnn");
    params_ = std::move(params);
}

int CrnnExtractor::extract_node(Tape& t, int image_unit) const {
    const Tensor& img = t.val(image_unit);
    if (img.rank() != 3 || img.dim(0) != 3) throw ContractError("crnn: image must be {3,H,W}");
    int need = cfg_.required_height();
    if (img.dim(1) < need)
        throw InputTooSmallError("crnn: height too small to collapse to 1 (need " +
                                 std::to_string(need) + ")");
    if (img.dim(1) != need)
        throw ContractError("crnn: height " + std::to_string(img.dim(1)) +
                            " does not collapse to 1 after " +
                            std::to_string(cfg_.collapse_stages) + " stages");
    ParamNodes nodes = push_params(t, params_, false);
    Look look{nodes, params_};

    int h = image_unit;
    for (int s = 0; s < cfg_.collapse_stages; ++s) {
        std::string base = "stage" + std::to_string(s);
        h = ops::tanh(t, ops::conv2d(t, h, look(base + ".weight"), look(base + ".bias"), 2, 1, 1,
                                     1));
    }
    int wp = t.val(h).dim(2);
    int lh = cfg_.lstm_hidden;
    Tensor zero({lh});

    std::vector<int> seq(static_cast<size_t>(wp));
    for (int col = 0; col < wp; ++col) seq[static_cast<size_t>(col)] =
        ops::pixel_vector(t, h, 0, col);

    for (int layer = 0; layer < 2; ++layer) {
        std::string base = "lstm" + std::to_string(layer);
        std::vector<int> fw(static_cast<size_t>(wp)), bw(static_cast<size_t>(wp));
        LstmState st{t.constant(zero), t.constant(zero)};
        for (int col = 0; col < wp; ++col) {
            st = lstm_cell(t, look, base + "_fw", seq[static_cast<size_t>(col)], st);
            fw[static_cast<size_t>(col)] = st.h;
        }
        st = {t.constant(zero), t.constant(zero)};
        for (int col = wp - 1; col >= 0; --col) {
            st = lstm_cell(t, look, base + "_bw", seq[static_cast<size_t>(col)], st);
            bw[static_cast<size_t>(col)] = st.h;
        }
        for (int col = 0; col < wp; ++col)
            seq[static_cast<size_t>(col)] =
                ops::concat1d(t, fw[static_cast<size_t>(col)], bw[static_cast<size_t>(col)]);
    }
    return ops::stack_rows(t, seq, cfg_.feature_dim());
}

CrnnFeatures CrnnExtractor::extract(const Image& unit_image) const {
    unit_image.validate();
    if (unit_image.range != ValueRange::Unit) throw ContractError("crnn: image must be unit range");
    ++calls_;
    Tape t;
    int node = extract_node(t, t.constant(unit_image.data));
    return {t.val(node)};
}

// ------------------------------------------------------------------- Key.Net

int KeynetConfig::min_input_dim() const {
    int smax = *std::max_element(scales.begin(), scales.end());
    return smax * (window + 4);
}

namespace {

ParamStore build_keynet_params(const KeynetConfig&) {
    ParamStore store;
    store.add("luma.weight", Tensor({1, 3, 1, 1}, {0.299, 0.587, 0.114}));
    store.add("grad_x.weight", Tensor({1, 1, 1, 3}, {-0.5, 0.0, 0.5}));
    store.add("grad_y.weight", Tensor({1, 1, 3, 1}, {-0.5, 0.0, 0.5}));
    std::vector<double> binom = {1, 2, 1, 2, 4, 2, 1, 2, 1};
    for (auto& v : binom) v /= 16.0;
    store.add("smooth.weight", Tensor({1, 1, 3, 3}, binom));
    return store;
}

struct ScaleNodes {
    int gx = -1, gy = -1;  // gradient maps on the scaled grid
    int sh = 0, sw = 0;
};

ScaleNodes scale_gradients(Tape& t, const Look& look, int image_unit, int scale) {
    const Tensor& img = t.val(image_unit);
    int hs = img.dim(1) / scale, ws = img.dim(2) / scale;
    int scaled = scale == 1 ? image_unit : ops::resample(t, image_unit, hs, ws);
    int gray = ops::conv2d(t, scaled, look("luma.weight"), -1, 1, 1, 0, 0);
    ScaleNodes out;
    out.gx = ops::conv2d(t, gray, look("grad_x.weight"), -1, 1, 1, 0, 1);
    out.gy = ops::conv2d(t, gray, look("grad_y.weight"), -1, 1, 1, 1, 0);
    out.sh = hs;
    out.sw = ws;
    return out;
}

}  // namespace

KeynetExtractor::KeynetExtractor(const KeynetConfig& cfg)
    : cfg_(cfg), params_(build_keynet_params(cfg)) {}

KeypointSet KeynetExtractor::detect(const Image& unit_image, int k_top) const {
    unit_image.validate();
    if (k_top < 1) throw ContractError("keynet: k_top must be >= 1");
    if (unit_image.height() < cfg_.min_input_dim() || unit_image.width() < cfg_.min_input_dim())
        throw InputTooSmallError("keynet: image too small for the largest scale's window");

    KeypointSet set;
    set.k_top = k_top;
    Tape t;
    int img = t.constant(unit_image.data);
    ParamNodes nodes = push_params(t, params_, false);
    Look look{nodes, params_};

    for (int scale : cfg_.scales) {
        ScaleNodes sn = scale_gradients(t, look, img, scale);
        const Tensor& gx = t.val(sn.gx);
        const Tensor& gy = t.val(sn.gy);
        // Smoothed structure tensor -> Harris response.
        int gxx = ops::mul(t, sn.gx, sn.gx);
        int gyy = ops::mul(t, sn.gy, sn.gy);
        int gxy = ops::mul(t, sn.gx, sn.gy);
        int sxx = ops::conv2d(t, gxx, look("smooth.weight"), -1, 1, 1, 1, 1);
        int syy = ops::conv2d(t, gyy, look("smooth.weight"), -1, 1, 1, 1, 1);
        int sxy = ops::conv2d(t, gxy, look("smooth.weight"), -1, 1, 1, 1, 1);
        const Tensor& txx = t.val(sxx);
        const Tensor& tyy = t.val(syy);
        const Tensor& txy = t.val(sxy);
        Tensor resp({1, sn.sh, sn.sw});
        for (int y = 0; y < sn.sh; ++y)
            for (int x = 0; x < sn.sw; ++x) {
                double a = txx.at(0, y, x), b = tyy.at(0, y, x), c = txy.at(0, y, x);
                resp.at(0, y, x) = a * b - c * c - cfg_.harris_kappa * (a + b) * (a + b);
            }

        int margin = cfg_.window / 2 + 2;
        struct Cand {
            double r;
            int y, x;
        };
        std::vector<Cand> cands;
        for (int y = margin; y < sn.sh - margin; ++y) {
            for (int x = margin; x < sn.sw - margin; ++x) {
                double r = resp.at(0, y, x);
                bool is_max = true;
                for (int dy = -1; dy <= 1 && is_max; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        if (resp.at(0, y + dy, x + dx) >= r) {
                            is_max = false;
                            break;
                        }
                    }
                if (is_max) cands.push_back({r, y, x});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.r != b.r) return a.r > b.r;
            if (a.y != b.y) return a.y < b.y;
            return a.x < b.x;
        });

        KeypointScaleSet kss;
        kss.scale = scale;
        int D = 2 * cfg_.window * cfg_.window;
        for (int k = 0; k < k_top; ++k) {
            Keypoint kp;
            if (k < static_cast<int>(cands.size())) {
                kp.y = (cands[static_cast<size_t>(k)].y + 0.5) * scale - 0.5;
                kp.x = (cands[static_cast<size_t>(k)].x + 0.5) * scale - 0.5;
                kp.response = cands[static_cast<size_t>(k)].r;
                int w0 = cands[static_cast<size_t>(k)].x - cfg_.window / 2;
                int h0 = cands[static_cast<size_t>(k)].y - cfg_.window / 2;
                Tensor desc({D});
                for (int i = 0; i < cfg_.window; ++i)
                    for (int j = 0; j < cfg_.window; ++j) {
                        desc[i * cfg_.window + j] = gx.at(0, h0 + i, w0 + j);
                        desc[cfg_.window * cfg_.window + i * cfg_.window + j] =
                            gy.at(0, h0 + i, w0 + j);
                    }
                kp.descriptor = std::move(desc);
            } else {
                kp.padded = true;
                kp.descriptor = Tensor::zeros({D});
                set.any_padded = true;
            }
            kss.points.push_back(std::move(kp));
        }
        set.scales.push_back(std::move(kss));
    }
    return set;
}

std::vector<int> KeynetExtractor::descriptor_nodes(Tape& t, int image_unit,
                                                   const KeypointSet& anchors) const {
    ParamNodes nodes = push_params(t, params_, false);
    Look look{nodes, params_};
    std::vector<int> per_scale;
    int D = 2 * cfg_.window * cfg_.window;
    for (const auto& kss : anchors.scales) {
        ScaleNodes sn = scale_gradients(t, look, image_unit, kss.scale);
        std::vector<int> rows;
        for (const auto& kp : kss.points) {
            if (kp.padded) {
                rows.push_back(t.constant(Tensor::zeros({D})));
                continue;
            }
            int ys = static_cast<int>(std::lround((kp.y + 0.5) / kss.scale - 0.5));
            int xs = static_cast<int>(std::lround((kp.x + 0.5) / kss.scale - 0.5));
            int h0 = ys - cfg_.window / 2, w0 = xs - cfg_.window / 2;
            int cx = ops::flatten(t, ops::crop(t, sn.gx, h0, w0, cfg_.window, cfg_.window));
            int cy = ops::flatten(t, ops::crop(t, sn.gy, h0, w0, cfg_.window, cfg_.window));
            rows.push_back(ops::concat1d(t, cx, cy));
        }
        per_scale.push_back(ops::stack_rows(t, rows, D));
    }
    return per_scale;
}

KeypointSet KeynetExtractor::extract(const Image& unit_image, int k_top) const {
    ++calls_;
    return detect(unit_image, k_top);
}

// ----------------------------------------------------------------------- Hue

HueMap extract_hue(const Image& unit_image) {
    unit_image.validate();
    if (unit_image.channels() != 3 || unit_image.range != ValueRange::Unit)
        throw ContractError("extract_hue: 3-channel unit-range image required");
    int h = unit_image.height(), w = unit_image.width();
    HueMap map{Tensor({h, w}), Tensor({h, w})};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double hue, sat;
            ops::rgb_to_hue_sat(unit_image.data.at(0, y, x), unit_image.data.at(1, y, x),
                                unit_image.data.at(2, y, x), &hue, &sat);
            map.hue.at(y, x) = hue;
            map.mask.at(y, x) = sat;
        }
    return map;
}

// -------------------------------------------------------------------- Bundle

namespace {

bool is_checkpoint_source(const std::string& s) { return s.rfind("checkpoint:", 0) == 0; }

template <typename Extractor, typename Cfg>
Extractor make_extractor(const Cfg& cfg, const std::string& source, const char* what) {
    if (is_checkpoint_source(source)) {
        std::string path = source.substr(11);
        try {
            Checkpoint ckpt = load_checkpoint(path);
            return Extractor(cfg, std::move(ckpt.params));
        } catch (const Error& e) {
            std::cerr << "warning: " << what << " weights at '" << path
                      << "' unusable (" << e.what() << "); falling back to surrogate\n";
        }
    } else if (source != "surrogate") {
        throw ConfigError(std::string("supervisor.") + what + ": unknown source '" + source +
                          "'");
    }
    return Extractor(cfg);
}

}  // namespace

SupervisorBundle::SupervisorBundle(CtpnConfig ctpn_cfg, CrnnConfig crnn_cfg,
                                   KeynetConfig keynet_cfg, const SupervisorSelection& select)
    : ctpn_(make_extractor<CtpnExtractor>(ctpn_cfg, select.ctpn, "ctpn")),
      crnn_(make_extractor<CrnnExtractor>(crnn_cfg, select.crnn, "crnn")),
      keynet_(keynet_cfg) {
    if (is_checkpoint_source(select.keynet))
        std::cerr << "warning: keynet uses fixed analytic kernels; checkpoint source ignored\n";
}

uint64_t SupervisorBundle::fingerprint() const {
    uint64_t h = 14695981039346656037ull;
    for (uint64_t fp : {ctpn_.params().fingerprint(), crnn_.params().fingerprint(),
                        keynet_.params().fingerprint()}) {
        for (int i = 0; i < 8; ++i) {
            h ^= (fp >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    }
    return h;
}

CtpnFeatures extract_ctpn(const SupervisorBundle& bundle, const Image& image) {
    return bundle.ctpn().extract(image);
}

CrnnFeatures extract_crnn(const SupervisorBundle& bundle, const Image& image) {
    return bundle.crnn().extract(image);
}

KeypointSet extract_keypoints(const SupervisorBundle& bundle, const Image& image, int k_top) {
    return bundle.keynet().extract(image, k_top);
}

}  // namespace docsr
