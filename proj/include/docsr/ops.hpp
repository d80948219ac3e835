#pragma once

#include <vector>

#include "docsr/resample.hpp"
#include "docsr/tape.hpp"

namespace docsr::ops {

// Elementwise (identical shapes).
int add(Tape& t, int a, int b);
int sub(Tape& t, int a, int b);
int mul(Tape& t, int a, int b);
// y = s*x + c
int affine(Tape& t, int x, double s, double c);
int tanh(Tape& t, int x);
int sigmoid(Tape& t, int x);

// y[m] = W[m,n] . x[n] (+ bias[m] when bias >= 0)
int matvec(Tape& t, int W, int x, int bias = -1);
int concat1d(Tape& t, int a, int b);

// x {Cin,H,W}, w {Cout,Cin,kh,kw}, bias {Cout} (or -1), stride/pad per axis.
int conv2d(Tape& t, int x, int w, int bias, int sh, int sw, int ph, int pw);

// Per-channel PReLU; slopes is {C} or {1} (shared).
int prelu(Tape& t, int x, int slopes);

// Per-channel normalization over the spatial axes with learnable scale
// and shift (batch-norm statistics computed on the single sample).
int channel_norm(Tape& t, int x, int gamma, int beta, double eps = 1e-5);

// {C*r^2,H,W} -> {C,rH,rW}
int pixel_shuffle(Tape& t, int x, int r);

// Mean pooling, ceil mode (partial border windows average valid pixels).
int avg_pool(Tape& t, int x, int k);

// Bicubic resize of a {C,H,W} node via the shared resampler plans.
int resample(Tape& t, int x, int out_h, int out_w);

// {C,h,w} crop at (y0,x0) from a {C,H,W} node.
int crop(Tape& t, int x, int y0, int x0, int h, int w);

// Gathers the {C} vector at spatial position (y,x) of a {C,H,W} node.
int pixel_vector(Tape& t, int x, int y, int xx);

// Reassembles H*W vectors of length C (row-major spatial order) into {C,H,W}.
int stack_to_chw(Tape& t, const std::vector<int>& vecs, int C, int H, int W);

// Stacks T vectors of length d into a {T,d} matrix.
int stack_rows(Tape& t, const std::vector<int>& vecs, int d);

// Scalar reductions.
int mean_sq(Tape& t, int x);   // (1/N) sum x^2
int mean_abs(Tape& t, int x);  // (1/N) sum |x|
int sum_sq(Tape& t, int x);    // sum x^2

// Scalar combination: sum_i w_i * xs_i (all xs scalar nodes).
int weighted_sum(Tape& t, const std::vector<int>& xs, const std::vector<double>& ws);

// Reshape to rank-1 (same data, same order).
int flatten(Tape& t, int x);

// y = x, with gain*addend[0,:,:] + bias added into the listed channels of
// a {C,H,W} node; addend is {1,H,W}.
int add_scaled_to_channels(Tape& t, int x, int addend, double gain, double bias,
                           const std::vector<int>& channels);

// Saturation-masked mean circular hue distance between the hue of an RGB
// node (unit range) and a fixed reference hue/mask pair. Returns a scalar
// node; zero (constant) when the mask is empty.
int hue_circular_loss(Tape& t, int rgb_unit, const Tensor& hue_ref, const Tensor& mask_ref);

// Pointwise HSV conversion shared by the hue loss and extract_hue; hue in
// [0,1) (0 when chroma vanishes), sat = chroma / max (0 for black).
void rgb_to_hue_sat(double r, double g, double b, double* hue, double* sat);

}  // namespace docsr::ops
