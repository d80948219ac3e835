#pragma once

#include <vector>

#include "docsr/tensor.hpp"

namespace docsr {

// Separable Catmull-Rom (a = -0.5) resampling with half-pixel-centered
// sample positions and clamp-to-edge handling. Downsampling stretches the
// kernel support by the scale factor (the usual antialias treatment), so
// one implementation serves upsampling, LR simulation and the cycle loss.
//
// The per-axis tap table is exposed so the autodiff path can reuse the
// exact same weights, keeping simulated LR and the differentiable
// downsampler bit-identical.
struct ResamplePlan {
    struct TapRow {
        int first;                   // index of first input tap
        std::vector<double> weights; // normalized, sum to 1
    };
    std::vector<TapRow> rows;  // one per output index
    int in_size = 0;
    int out_size = 0;
};

ResamplePlan make_resample_plan(int in_size, int out_size);

// Resamples a {C,H,W} tensor to {C,out_h,out_w}.
Tensor resample_bicubic(const Tensor& chw, int out_h, int out_w);

// Applies a plan along one axis (axis 1 = rows, axis 2 = cols) of a CHW
// tensor; building block shared with the tape op.
Tensor apply_plan_rows(const Tensor& chw, const ResamplePlan& plan);
Tensor apply_plan_cols(const Tensor& chw, const ResamplePlan& plan);

}  // namespace docsr
