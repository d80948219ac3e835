#pragma once

#include "docsr/tensor.hpp"

namespace docsr {

// Declared value range of an image tensor.
enum class ValueRange { Unit, Signed };  // [0,1] or [-1,1]

// Channels x height x width raster with a declared value range. This is
// the currency between pipeline stages; conversions between ranges are
// explicit.
struct Image {
    Tensor data;  // {C,H,W}, C in {1,3}
    ValueRange range = ValueRange::Unit;

    Image() = default;
    Image(Tensor t, ValueRange r);

    int channels() const { return data.dim(0); }
    int height() const { return data.dim(1); }
    int width() const { return data.dim(2); }

    // Checks channel count and that values lie in the declared range
    // (with 1e-6 tolerance); throws ContractError otherwise.
    void validate() const;
};

Image to_unit(const Image& img);
Image to_signed(const Image& img);

// Clamps values into the declared range (used after resampling, whose
// kernels can overshoot slightly).
void clamp_to_range(Image& img);

}  // namespace docsr
