#include "docsr/generator.hpp"

#include <cmath>

#include "docsr/ops.hpp"
#include "docsr/rng.hpp"

namespace docsr {
namespace {

bool is_pow2(int v) { return v >= 1 && (v & (v - 1)) == 0; }

Tensor he_conv(Rng& rng, int cout, int cin, int k) {
    Tensor w({cout, cin, k, k});
    double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    for (auto& v : w.vec()) v = rng.normal(0.0, std);
    return w;
}

struct LayerPlan {
    std::vector<std::pair<std::string, std::vector<int>>> entries;
    void conv(const std::string& name, int cout, int cin, int k) {
        entries.push_back({name + ".weight", {cout, cin, k, k}});
        entries.push_back({name + ".bias", {cout}});
    }
    void prelu(const std::string& name, int c) { entries.push_back({name + ".slope", {c}}); }
    void norm(const std::string& name, int c) {
        entries.push_back({name + ".gamma", {c}});
        entries.push_back({name + ".beta", {c}});
    }
};

LayerPlan make_plan(const GeneratorConfig& cfg) {
    LayerPlan p;
    int tc = cfg.trunk_channels;
    p.conv("input_conv", tc, cfg.input_channels, 9);
    p.prelu("input_prelu", tc);
    for (int b = 0; b < cfg.num_residual_blocks; ++b) {
        std::string base = "block" + std::to_string(b);
        p.conv(base + ".conv1", tc, tc, 3);
        p.norm(base + ".norm1", tc);
        p.prelu(base + ".prelu", tc);
        p.conv(base + ".conv2", tc, tc, 3);
        p.norm(base + ".norm2", tc);
    }
    p.conv("merge_conv", tc, tc, 3);
    for (int s = 0; s < cfg.upsample_stages(); ++s) {
        std::string base = "upsample" + std::to_string(s);
        p.conv(base + ".conv", tc * 4, tc, 3);
        p.prelu(base + ".prelu", tc);
    }
    p.conv("output_conv", cfg.input_channels, tc, 9);
    return p;
}

}  // namespace

void GeneratorConfig::validate() const {
    if (num_residual_blocks < 1)
        throw ConfigError("generator.num_residual_blocks must be >= 1");
    if (trunk_channels < 1) throw ConfigError("generator.trunk_channels must be >= 1");
    if (!is_pow2(scale_factor)) throw ConfigError("generator.scale_factor must be a power of 2");
    if (input_channels != 3) throw ConfigError("generator.input_channels must be 3");
}

int GeneratorConfig::upsample_stages() const {
    int s = scale_factor, n = 0;
    while (s > 1) {
        s >>= 1;
        ++n;
    }
    return n;
}

std::vector<std::pair<std::string, std::vector<int>>> generator_param_plan(
    const GeneratorConfig& config) {
    config.validate();
    return make_plan(config).entries;
}

ParamStore build_generator(const GeneratorConfig& config, uint64_t seed) {
    config.validate();
    Rng rng(seed);
    ParamStore store;
    for (const auto& [name, shape] : make_plan(config).entries) {
        if (name.ends_with(".weight")) {
            store.add(name, he_conv(rng, shape[0], shape[1], shape[2]));
        } else if (name.ends_with(".bias") || name.ends_with(".beta")) {
            store.add(name, Tensor::zeros(shape));
        } else if (name.ends_with(".gamma")) {
            store.add(name, Tensor::full(shape, 1.0));
        } else if (name.ends_with(".slope")) {
            store.add(name, Tensor::full(shape, 0.25));
        } else {
            throw ConfigError("unknown parameter kind: " + name);
        }
    }
    return store;
}

namespace {

// Maps store order to node ids by name via a fixed plan walk.
struct NodeLookup {
    const ParamNodes& nodes;
    const ParamStore& store;
    int operator()(const std::string& name) const {
        for (size_t i = 0; i < store.count(); ++i)
            if (store.name(i) == name) return nodes.node(i);
        throw ContractError("generator forward: missing parameter " + name);
    }
};

int conv_layer(Tape& t, const NodeLookup& look, const std::string& base, int x, int pad) {
    return ops::conv2d(t, x, look(base + ".weight"), look(base + ".bias"), 1, 1, pad, pad);
}

}  // namespace

namespace {

int forward_impl(Tape& tape, const GeneratorConfig& cfg, const ParamStore& store,
                 const ParamNodes& nodes, int x) {
    NodeLookup look{nodes, store};
    int feat = conv_layer(tape, look, "input_conv", x, 4);
    feat = ops::prelu(tape, feat, look("input_prelu.slope"));
    int trunk_in = feat;
    for (int b = 0; b < cfg.num_residual_blocks; ++b) {
        std::string base = "block" + std::to_string(b);
        int y = conv_layer(tape, look, base + ".conv1", feat, 1);
        y = ops::channel_norm(tape, y, look(base + ".norm1.gamma"), look(base + ".norm1.beta"));
        y = ops::prelu(tape, y, look(base + ".prelu.slope"));
        y = conv_layer(tape, look, base + ".conv2", y, 1);
        y = ops::channel_norm(tape, y, look(base + ".norm2.gamma"), look(base + ".norm2.beta"));
        feat = ops::add(tape, feat, y);
    }
    int merged = conv_layer(tape, look, "merge_conv", feat, 1);
    merged = ops::add(tape, merged, trunk_in);  // trunk-level skip
    for (int s = 0; s < cfg.upsample_stages(); ++s) {
        std::string base = "upsample" + std::to_string(s);
        merged = conv_layer(tape, look, base + ".conv", merged, 1);
        merged = ops::pixel_shuffle(tape, merged, 2);
        merged = ops::prelu(tape, merged, look(base + ".prelu.slope"));
    }
    int out = conv_layer(tape, look, "output_conv", merged, 4);
    return ops::tanh(tape, out);
}

}  // namespace

int generator_forward_nodes(Tape& tape, const GeneratorConfig& config, const ParamStore& store,
                            const ParamNodes& nodes, int input_node) {
    config.validate();
    const Tensor& in = tape.val(input_node);
    if (in.rank() != 3 || in.dim(0) != config.input_channels)
        throw ContractError("generator input must have 3 channels");
    return forward_impl(tape, config, store, nodes, input_node);
}

Image generator_apply(const GeneratorConfig& config, const ParamStore& params, const Image& lr) {
    if (lr.channels() != 3) throw ContractError("generator input must have 3 channels");
    if (lr.range != ValueRange::Signed)
        throw ContractError("generator input must be declared signed range [-1,1]");
    Tape tape;
    ParamNodes nodes = push_params(tape, params, false);
    int x = tape.constant(lr.data);
    int y = generator_forward_nodes(tape, config, params, nodes, x);
    return Image(tape.val(y), ValueRange::Signed);
}

Tensor residual_block_apply(const GeneratorConfig& config, const ParamStore& params,
                            int block_index, const Tensor& features) {
    if (features.rank() != 3 || features.dim(0) != config.trunk_channels)
        throw ShapeError("residual block: feature channels != trunk_channels");
    Tape tape;
    ParamNodes nodes = push_params(tape, params, false);
    NodeLookup look{nodes, params};
    std::string base = "block" + std::to_string(block_index);
    int x = tape.constant(features);
    int y = conv_layer(tape, look, base + ".conv1", x, 1);
    y = ops::channel_norm(tape, y, look(base + ".norm1.gamma"), look(base + ".norm1.beta"));
    y = ops::prelu(tape, y, look(base + ".prelu.slope"));
    y = conv_layer(tape, look, base + ".conv2", y, 1);
    y = ops::channel_norm(tape, y, look(base + ".norm2.gamma"), look(base + ".norm2.beta"));
    int out = ops::add(tape, x, y);
    return tape.val(out);
}

Tensor pixel_shuffle_tensor(const Tensor& x, int r) {
    Tape tape;
    int id = ops::pixel_shuffle(tape, tape.constant(x), r);
    return tape.val(id);
}

}  // namespace docsr
