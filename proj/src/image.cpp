#include "docsr/image.hpp"

#include <algorithm>

namespace docsr {

Image::Image(Tensor t, ValueRange r) : data(std::move(t)), range(r) {
    if (data.rank() != 3) throw ShapeError("Image tensor must be rank-3 {C,H,W}");
}

void Image::validate() const {
    if (data.rank() != 3) throw ShapeError("Image tensor must be rank-3 {C,H,W}");
    int c = data.dim(0);
    if (c != 1 && c != 3) throw ContractError("image channel count must be 1 or 3");
    const double tol = 1e-6;
    double lo = range == ValueRange::Unit ? 0.0 : -1.0;
    if (data.min() < lo - tol || data.max() > 1.0 + tol)
        throw ContractError("image values outside declared range");
}

Image to_unit(const Image& img) {
    if (img.range == ValueRange::Unit) return img;
    Image out = img;
    out.range = ValueRange::Unit;
    for (auto& v : out.data.vec()) v = 0.5 * (v + 1.0);
    return out;
}

Image to_signed(const Image& img) {
    if (img.range == ValueRange::Signed) return img;
    Image out = img;
    out.range = ValueRange::Signed;
    for (auto& v : out.data.vec()) v = 2.0 * v - 1.0;
    return out;
}

void clamp_to_range(Image& img) {
    double lo = img.range == ValueRange::Unit ? 0.0 : -1.0;
    for (auto& v : img.data.vec()) v = std::clamp(v, lo, 1.0);
}

}  // namespace docsr
