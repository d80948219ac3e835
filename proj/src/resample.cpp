#include "docsr/resample.hpp"

#include <algorithm>
#include <cmath>

namespace docsr {
namespace {

// Catmull-Rom kernel, a = -0.5.
double cubic_kernel(double t) {
    constexpr double a = -0.5;
    t = std::fabs(t);
    if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

}  // namespace

ResamplePlan make_resample_plan(int in_size, int out_size) {
    if (in_size < 1 || out_size < 1) throw ShapeError("resample sizes must be positive");
    ResamplePlan plan;
    plan.in_size = in_size;
    plan.out_size = out_size;
    plan.rows.resize(static_cast<size_t>(out_size));

    double scale = static_cast<double>(in_size) / out_size;
    double support_scale = std::max(scale, 1.0);  // stretch kernel when shrinking
    double support = 2.0 * support_scale;

    for (int j = 0; j < out_size; ++j) {
        double center = (j + 0.5) * scale - 0.5;
        int lo = static_cast<int>(std::floor(center - support + 1e-9)) + 1;
        int hi = static_cast<int>(std::floor(center + support - 1e-9));
        // Accumulate clamped-edge taps onto the boundary pixels.
        int first = std::clamp(lo, 0, in_size - 1);
        int last = std::clamp(hi, 0, in_size - 1);
        std::vector<double> w(static_cast<size_t>(last - first + 1), 0.0);
        double total = 0.0;
        for (int i = lo; i <= hi; ++i) {
            double wk = cubic_kernel((center - i) / support_scale);
            if (wk == 0.0) continue;
            int idx = std::clamp(i, 0, in_size - 1);
            w[static_cast<size_t>(idx - first)] += wk;
            total += wk;
        }
        if (total == 0.0) {
            w.assign(1, 1.0);
            first = std::clamp(static_cast<int>(std::lround(center)), 0, in_size - 1);
            last = first;
            w.resize(1);
            total = 1.0;
        }
        for (auto& x : w) x /= total;
        plan.rows[static_cast<size_t>(j)] = {first, std::move(w)};
    }
    return plan;
}

Tensor apply_plan_rows(const Tensor& chw, const ResamplePlan& plan) {
    int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    if (h != plan.in_size) throw ShapeError("row plan size mismatch");
    Tensor out({c, plan.out_size, w});
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < plan.out_size; ++oy) {
            const auto& row = plan.rows[static_cast<size_t>(oy)];
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (size_t k = 0; k < row.weights.size(); ++k)
                    acc += row.weights[k] * chw.at(ch, row.first + static_cast<int>(k), x);
                out.at(ch, oy, x) = acc;
            }
        }
    }
    return out;
}

Tensor apply_plan_cols(const Tensor& chw, const ResamplePlan& plan) {
    int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    if (w != plan.in_size) throw ShapeError("col plan size mismatch");
    Tensor out({c, h, plan.out_size});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int ox = 0; ox < plan.out_size; ++ox) {
                const auto& row = plan.rows[static_cast<size_t>(ox)];
                double acc = 0.0;
                for (size_t k = 0; k < row.weights.size(); ++k)
                    acc += row.weights[k] * chw.at(ch, y, row.first + static_cast<int>(k));
                out.at(ch, y, ox) = acc;
            }
        }
    }
    return out;
}

Tensor resample_bicubic(const Tensor& chw, int out_h, int out_w) {
    if (chw.rank() != 3) throw ShapeError("resample expects {C,H,W}");
    ResamplePlan py = make_resample_plan(chw.dim(1), out_h);
    ResamplePlan px = make_resample_plan(chw.dim(2), out_w);
    return apply_plan_cols(apply_plan_rows(chw, py), px);
}

}  // namespace docsr
