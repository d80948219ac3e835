#pragma once

#include <cstdint>

#include "docsr/image.hpp"
#include "docsr/params.hpp"

namespace docsr {

// SRResNet-style 4x generator: wide 9x9 extraction conv + PReLU, a stack
// of residual blocks (conv-norm-PReLU-conv-norm plus skip), a 3x3 merge
// conv with a trunk-level skip, log2(scale) pixel-shuffle upsampling
// blocks, and a wide 9x9 reconstruction conv with a Tanh head.
struct GeneratorConfig {
    int num_residual_blocks = 4;
    int trunk_channels = 32;
    int scale_factor = 4;  // power of 2
    int input_channels = 3;

    void validate() const;
    int upsample_stages() const;  // log2(scale_factor)

    static GeneratorConfig desk() { return {4, 32, 4, 3}; }
    static GeneratorConfig paper() { return {16, 64, 4, 3}; }
};

// Builds He-initialized parameters for the layer plan above. Deterministic
// for a fixed seed.
ParamStore build_generator(const GeneratorConfig& config, uint64_t seed);

// Tape forward pass; input node must carry a {3,H,W} tensor in signed
// range. Returns the output node ({3, sH, sW}, values in [-1,1]).
int generator_forward_nodes(Tape& tape, const GeneratorConfig& config, const ParamStore& store,
                            const ParamNodes& nodes, int input_node);

// Convenience non-autodiff forward over an Image (validates the input
// contract: 3 channels, signed range).
Image generator_apply(const GeneratorConfig& config, const ParamStore& params, const Image& lr);

// One residual block y = x + R(x) applied standalone (R = conv-norm-
// PReLU-conv-norm with the given block's parameters). block index selects
// which block's tensors are read from the store.
Tensor residual_block_apply(const GeneratorConfig& config, const ParamStore& params,
                            int block_index, const Tensor& features);

// Plain pixel-shuffle on a tensor (shares the tape op's index map).
Tensor pixel_shuffle_tensor(const Tensor& x, int r);

// Names and shapes of every parameter for a config, in store order; used
// by checkpoint validation.
std::vector<std::pair<std::string, std::vector<int>>> generator_param_plan(
    const GeneratorConfig& config);

}  // namespace docsr
