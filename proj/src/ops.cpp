#include "docsr/ops.hpp"

#include <cmath>
#include <memory>

namespace docsr::ops {
namespace {

bool any_grad(const Tape& t, std::initializer_list<int> ids) {
    for (int id : ids)
        if (id >= 0 && t.needs_grad(id)) return true;
    return false;
}

int out_dim(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

// Ops need their own node id inside the backward closure; the id is only
// known after emit(), so each op shares a SelfRef patched post-emission.
struct SelfRef {
    int id = -1;
};

}  // namespace

int add(Tape& t, int a, int b) {
    require_same_shape(t.val(a), t.val(b), "add");
    Tensor y = t.val(a);
    const Tensor& vb = t.val(b);
    for (int64_t i = 0; i < y.size(); ++i) y[i] += vb[i];
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), any_grad(t, {a, b}), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
    self->id = id;
    return id;
}

int sub(Tape& t, int a, int b) {
    require_same_shape(t.val(a), t.val(b), "sub");
    Tensor y = t.val(a);
    const Tensor& vb = t.val(b);
    for (int64_t i = 0; i < y.size(); ++i) y[i] -= vb[i];
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), any_grad(t, {a, b}), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        tp.accumulate(a, g);
        if (tp.needs_grad(b)) {
            Tensor gn = g;
            for (auto& v : gn.vec()) v = -v;
            tp.accumulate(b, gn);
        }
    });
    self->id = id;
    return id;
}

int mul(Tape& t, int a, int b) {
    require_same_shape(t.val(a), t.val(b), "mul");
    Tensor y = t.val(a);
    const Tensor& vb = t.val(b);
    for (int64_t i = 0; i < y.size(); ++i) y[i] *= vb[i];
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), any_grad(t, {a, b}), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        if (tp.needs_grad(a)) {
            Tensor ga = g;
            const Tensor& vb2 = tp.val(b);
            for (int64_t i = 0; i < ga.size(); ++i) ga[i] *= vb2[i];
            tp.accumulate(a, ga);
        }
        if (tp.needs_grad(b)) {
            Tensor gb = g;
            const Tensor& va2 = tp.val(a);
            for (int64_t i = 0; i < gb.size(); ++i) gb[i] *= va2[i];
            tp.accumulate(b, gb);
        }
    });
    self->id = id;
    return id;
}

int affine(Tape& t, int x, double s, double c) {
    Tensor y = t.val(x);
    for (auto& v : y.vec()) v = s * v + c;
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), t.needs_grad(x), [=](Tape& tp) {
        Tensor g = tp.grad_of(self->id);
        for (auto& v : g.vec()) v *= s;
        tp.accumulate(x, g);
    });
    self->id = id;
    return id;
}

int tanh(Tape& t, int x) {
    Tensor y = t.val(x);
    for (auto& v : y.vec()) v = std::tanh(v);
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), t.needs_grad(x), [=](Tape& tp) {
        Tensor g = tp.grad_of(self->id);
        const Tensor& yv = tp.val(self->id);
        for (int64_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - yv[i] * yv[i];
        tp.accumulate(x, g);
    });
    self->id = id;
    return id;
}

int sigmoid(Tape& t, int x) {
    Tensor y = t.val(x);
    for (auto& v : y.vec()) v = 1.0 / (1.0 + std::exp(-v));
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), t.needs_grad(x), [=](Tape& tp) {
        Tensor g = tp.grad_of(self->id);
        const Tensor& yv = tp.val(self->id);
        for (int64_t i = 0; i < g.size(); ++i) g[i] *= yv[i] * (1.0 - yv[i]);
        tp.accumulate(x, g);
    });
    self->id = id;
    return id;
}

int matvec(Tape& t, int W, int x, int bias) {
    const Tensor& w = t.val(W);
    const Tensor& xv = t.val(x);
    if (w.rank() != 2 || xv.rank() != 1 || w.dim(1) != xv.dim(0))
        throw ShapeError("matvec: need W[m,n], x[n]");
    int m = w.dim(0), n = w.dim(1);
    Tensor y({m});
    for (int i = 0; i < m; ++i) {
        double acc = bias >= 0 ? t.val(bias)[i] : 0.0;
        const double* row = w.data() + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) acc += row[j] * xv[j];
        y[i] = acc;
    }
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), any_grad(t, {W, x, bias}), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        const Tensor& wv = tp.val(W);
        const Tensor& xv2 = tp.val(x);
        int m2 = wv.dim(0), n2 = wv.dim(1);
        if (Tensor* gw = tp.grad_buffer(W)) {
            for (int i = 0; i < m2; ++i)
                for (int j = 0; j < n2; ++j) gw->at(i, j) += g[i] * xv2[j];
        }
        if (Tensor* gx = tp.grad_buffer(x)) {
            for (int i = 0; i < m2; ++i)
                for (int j = 0; j < n2; ++j) (*gx)[j] += wv.at(i, j) * g[i];
        }
        if (bias >= 0) tp.accumulate(bias, g);
    });
    self->id = id;
    return id;
}

int concat1d(Tape& t, int a, int b) {
    const Tensor& va = t.val(a);
    const Tensor& vb = t.val(b);
    if (va.rank() != 1 || vb.rank() != 1) throw ShapeError("concat1d: rank-1 only");
    int p = va.dim(0), q = vb.dim(0);
    Tensor y({p + q});
    for (int i = 0; i < p; ++i) y[i] = va[i];
    for (int i = 0; i < q; ++i) y[p + i] = vb[i];
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), any_grad(t, {a, b}), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        if (Tensor* ga = tp.grad_buffer(a))
            for (int i = 0; i < p; ++i) (*ga)[i] += g[i];
        if (Tensor* gb = tp.grad_buffer(b))
            for (int i = 0; i < q; ++i) (*gb)[i] += g[p + i];
    });
    self->id = id;
    return id;
}

int conv2d(Tape& t, int x, int w, int bias, int sh, int sw, int ph, int pw) {
    const Tensor& xv = t.val(x);
    const Tensor& wv = t.val(w);
    if (xv.rank() != 3 || wv.rank() != 4) throw ShapeError("conv2d: x{C,H,W}, w{O,C,kh,kw}");
    int cin = xv.dim(0), h = xv.dim(1), ww = xv.dim(2);
    int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    if (wv.dim(1) != cin) throw ShapeError("conv2d: channel mismatch");
    int oh = out_dim(h, kh, sh, ph), ow = out_dim(ww, kw, sw, pw);
    if (oh < 1 || ow < 1) throw InputTooSmallError("conv2d: input smaller than kernel");

    Tensor y({cout, oh, ow});
    {
        const double* xd = xv.data();
        const double* wd = wv.data();
        for (int co = 0; co < cout; ++co) {
            double bval = bias >= 0 ? t.val(bias)[co] : 0.0;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bval;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double* xc = xd + static_cast<int64_t>(ci) * h * ww;
                        const double* wc = wd + (static_cast<int64_t>(co) * cin + ci) * kh * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            int iy = oy * sh - ph + ky;
                            if (iy < 0 || iy >= h) continue;
                            const double* xrow = xc + static_cast<int64_t>(iy) * ww;
                            const double* wrow = wc + static_cast<int64_t>(ky) * kw;
                            for (int kx = 0; kx < kw; ++kx) {
                                int ix = ox * sw - pw + kx;
                                if (ix < 0 || ix >= ww) continue;
                                acc += wrow[kx] * xrow[ix];
                            }
                        }
                    }
                    y.at(co, oy, ox) = acc;
                }
            }
        }
    }

    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), any_grad(t, {x, w, bias}), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        const Tensor& xv2 = tp.val(x);
        const Tensor& wv2 = tp.val(w);
        Tensor* gx = tp.grad_buffer(x);
        Tensor* gw = tp.grad_buffer(w);
        Tensor* gb = bias >= 0 ? tp.grad_buffer(bias) : nullptr;
        int h2 = xv2.dim(1), w2 = xv2.dim(2);
        for (int co = 0; co < cout; ++co) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double gv = g.at(co, oy, ox);
                    if (gv == 0.0) continue;
                    if (gb) (*gb)[co] += gv;
                    for (int ci = 0; ci < cin; ++ci) {
                        for (int ky = 0; ky < kh; ++ky) {
                            int iy = oy * sh - ph + ky;
                            if (iy < 0 || iy >= h2) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                int ix = ox * sw - pw + kx;
                                if (ix < 0 || ix >= w2) continue;
                                int64_t widx =
                                    ((static_cast<int64_t>(co) * cin + ci) * kh + ky) * kw + kx;
                                if (gw) (*gw)[widx] += gv * xv2.at(ci, iy, ix);
                                if (gx) gx->at(ci, iy, ix) += gv * wv2[widx];
                            }
                        }
                    }
                }
            }
        }
    });
    self->id = id;
    return id;
}

int prelu(Tape& t, int x, int slopes) {
    const Tensor& xv = t.val(x);
    const Tensor& sv = t.val(slopes);
    if (xv.rank() != 3) throw ShapeError("prelu: expects {C,H,W}");
    int c = xv.dim(0);
    bool shared = sv.size() == 1;
    if (!shared && sv.dim(0) != c) throw ShapeError("prelu: slope count mismatch");
    Tensor y = xv;
    int64_t hw = static_cast<int64_t>(xv.dim(1)) * xv.dim(2);
    for (int ch = 0; ch < c; ++ch) {
        double a = shared ? sv[0] : sv[ch];
        double* row = y.data() + ch * hw;
        for (int64_t i = 0; i < hw; ++i)
            if (row[i] < 0) row[i] *= a;
    }
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), any_grad(t, {x, slopes}), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        const Tensor& xv2 = tp.val(x);
        const Tensor& sv2 = tp.val(slopes);
        Tensor* gx = tp.grad_buffer(x);
        Tensor* gs = tp.grad_buffer(slopes);
        int64_t hw2 = static_cast<int64_t>(xv2.dim(1)) * xv2.dim(2);
        for (int ch = 0; ch < c; ++ch) {
            double a = shared ? sv2[0] : sv2[ch];
            const double* xr = xv2.data() + ch * hw2;
            const double* gr = g.data() + ch * hw2;
            for (int64_t i = 0; i < hw2; ++i) {
                bool neg = xr[i] < 0;
                if (gx) (*gx)[ch * hw2 + i] += gr[i] * (neg ? a : 1.0);
                if (gs && neg) (*gs)[shared ? 0 : ch] += gr[i] * xr[i];
            }
        }
    });
    self->id = id;
    return id;
}

int channel_norm(Tape& t, int x, int gamma, int beta, double eps) {
    const Tensor& xv = t.val(x);
    if (xv.rank() != 3) throw ShapeError("channel_norm: expects {C,H,W}");
    int c = xv.dim(0);
    int64_t hw = static_cast<int64_t>(xv.dim(1)) * xv.dim(2);
    const Tensor& gv = t.val(gamma);
    const Tensor& bv = t.val(beta);
    if (gv.size() != c || bv.size() != c) throw ShapeError("channel_norm: affine size mismatch");

    Tensor y(xv.shape());
    auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(c));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        const double* row = xv.data() + ch * hw;
        double m = 0.0;
        for (int64_t i = 0; i < hw; ++i) m += row[i];
        m /= static_cast<double>(hw);
        double var = 0.0;
        for (int64_t i = 0; i < hw; ++i) {
            double d = row[i] - m;
            var += d * d;
        }
        var /= static_cast<double>(hw);
        (*mean)[static_cast<size_t>(ch)] = m;
        (*inv_std)[static_cast<size_t>(ch)] = 1.0 / std::sqrt(var + eps);
        double* orow = y.data() + ch * hw;
        for (int64_t i = 0; i < hw; ++i)
            orow[i] = gv[ch] * (row[i] - m) * (*inv_std)[static_cast<size_t>(ch)] + bv[ch];
    }
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), any_grad(t, {x, gamma, beta}), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        const Tensor& xv2 = tp.val(x);
        const Tensor& gv2 = tp.val(gamma);
        Tensor* gx = tp.grad_buffer(x);
        Tensor* gg = tp.grad_buffer(gamma);
        Tensor* gb = tp.grad_buffer(beta);
        double n = static_cast<double>(hw);
        for (int ch = 0; ch < c; ++ch) {
            const double* xr = xv2.data() + ch * hw;
            const double* gr = g.data() + ch * hw;
            double m = (*mean)[static_cast<size_t>(ch)];
            double is = (*inv_std)[static_cast<size_t>(ch)];
            double sum_g = 0.0, sum_gxhat = 0.0;
            for (int64_t i = 0; i < hw; ++i) {
                double xhat = (xr[i] - m) * is;
                sum_g += gr[i];
                sum_gxhat += gr[i] * xhat;
            }
            if (gb) (*gb)[ch] += sum_g;
            if (gg) (*gg)[ch] += sum_gxhat;
            if (gx) {
                double* gxr = gx->data() + ch * hw;
                double scale = gv2[ch] * is;
                for (int64_t i = 0; i < hw; ++i) {
                    double xhat = (xr[i] - m) * is;
                    gxr[i] += scale * (gr[i] - sum_g / n - xhat * sum_gxhat / n);
                }
            }
        }
    });
    self->id = id;
    return id;
}

int pixel_shuffle(Tape& t, int x, int r) {
    const Tensor& xv = t.val(x);
    if (xv.rank() != 3) throw ShapeError("pixel_shuffle: expects {C,H,W}");
    int cin = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (r < 1 || cin % (r * r) != 0)
        throw ShapeError("pixel_shuffle: channels not divisible by r^2");
    int c = cin / (r * r);
    Tensor y({c, h * r, w * r});
    for (int ch = 0; ch < c; ++ch)
        for (int a = 0; a < r; ++a)
            for (int b = 0; b < r; ++b)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j)
                        y.at(ch, r * i + a, r * j + b) = xv.at(ch * r * r + a * r + b, i, j);
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), t.needs_grad(x), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        Tensor* gx = tp.grad_buffer(x);
        if (!gx) return;
        for (int ch = 0; ch < c; ++ch)
            for (int a = 0; a < r; ++a)
                for (int b = 0; b < r; ++b)
                    for (int i = 0; i < h; ++i)
                        for (int j = 0; j < w; ++j)
                            gx->at(ch * r * r + a * r + b, i, j) += g.at(ch, r * i + a, r * j + b);
    });
    self->id = id;
    return id;
}

int avg_pool(Tape& t, int x, int k) {
    const Tensor& xv = t.val(x);
    if (xv.rank() != 3) throw ShapeError("avg_pool: expects {C,H,W}");
    int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    int oh = (h + k - 1) / k, ow = (w + k - 1) / k;
    Tensor y({c, oh, ow});
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < oh; ++oy) {
            int y0 = oy * k, y1 = std::min(y0 + k, h);
            for (int ox = 0; ox < ow; ++ox) {
                int x0 = ox * k, x1 = std::min(x0 + k, w);
                double acc = 0.0;
                for (int iy = y0; iy < y1; ++iy)
                    for (int ix = x0; ix < x1; ++ix) acc += xv.at(ch, iy, ix);
                y.at(ch, oy, ox) = acc / ((y1 - y0) * (x1 - x0));
            }
        }
    }
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), t.needs_grad(x), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        Tensor* gx = tp.grad_buffer(x);
        if (!gx) return;
        for (int ch = 0; ch < c; ++ch) {
            for (int oy = 0; oy < oh; ++oy) {
                int y0 = oy * k, y1 = std::min(y0 + k, h);
                for (int ox = 0; ox < ow; ++ox) {
                    int x0 = ox * k, x1 = std::min(x0 + k, w);
                    double gv = g.at(ch, oy, ox) / ((y1 - y0) * (x1 - x0));
                    for (int iy = y0; iy < y1; ++iy)
                        for (int ix = x0; ix < x1; ++ix) gx->at(ch, iy, ix) += gv;
                }
            }
        }
    });
    self->id = id;
    return id;
}

int resample(Tape& t, int x, int out_h, int out_w) {
    const Tensor& xv = t.val(x);
    if (xv.rank() != 3) throw ShapeError("resample: expects {C,H,W}");
    auto py = std::make_shared<ResamplePlan>(make_resample_plan(xv.dim(1), out_h));
    auto px = std::make_shared<ResamplePlan>(make_resample_plan(xv.dim(2), out_w));
    Tensor mid = apply_plan_rows(xv, *py);
    Tensor y = apply_plan_cols(mid, *px);
    int in_w = xv.dim(2), c = xv.dim(0);
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), t.needs_grad(x), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        Tensor* gx = tp.grad_buffer(x);
        if (!gx) return;
        // Transposed cols pass: {C,out_h,out_w} -> {C,out_h,in_w}.
        Tensor gm({c, out_h, in_w});
        for (int ch = 0; ch < c; ++ch)
            for (int yy = 0; yy < out_h; ++yy)
                for (int ox = 0; ox < out_w; ++ox) {
                    const auto& row = px->rows[static_cast<size_t>(ox)];
                    double gv = g.at(ch, yy, ox);
                    for (size_t kk = 0; kk < row.weights.size(); ++kk)
                        gm.at(ch, yy, row.first + static_cast<int>(kk)) += gv * row.weights[kk];
                }
        // Transposed rows pass: {C,out_h,in_w} -> {C,in_h,in_w}.
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < out_h; ++oy) {
                const auto& row = py->rows[static_cast<size_t>(oy)];
                for (int xx = 0; xx < in_w; ++xx) {
                    double gv = gm.at(ch, oy, xx);
                    for (size_t kk = 0; kk < row.weights.size(); ++kk)
                        gx->at(ch, row.first + static_cast<int>(kk), xx) += gv * row.weights[kk];
                }
            }
    });
    self->id = id;
    return id;
}

int crop(Tape& t, int x, int y0, int x0, int h, int w) {
    const Tensor& xv = t.val(x);
    if (xv.rank() != 3) throw ShapeError("crop: expects {C,H,W}");
    int c = xv.dim(0);
    if (y0 < 0 || x0 < 0 || y0 + h > xv.dim(1) || x0 + w > xv.dim(2))
        throw ShapeError("crop: window out of bounds");
    Tensor y({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) y.at(ch, i, j) = xv.at(ch, y0 + i, x0 + j);
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(y), t.needs_grad(x), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        Tensor* gx = tp.grad_buffer(x);
        if (!gx) return;
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) gx->at(ch, y0 + i, x0 + j) += g.at(ch, i, j);
    });
    self->id = id;
    return id;
}

int pixel_vector(Tape& t, int x, int y, int xx) {
    const Tensor& xv = t.val(x);
    if (xv.rank() != 3) throw ShapeError("pixel_vector: expects {C,H,W}");
    int c = xv.dim(0);
    Tensor v({c});
    for (int ch = 0; ch < c; ++ch) v[ch] = xv.at(ch, y, xx);
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(std::move(v), t.needs_grad(x), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        Tensor* gx = tp.grad_buffer(x);
        if (!gx) return;
        for (int ch = 0; ch < c; ++ch) gx->at(ch, y, xx) += g[ch];
    });
    self->id = id;
    return id;
}

int stack_to_chw(Tape& t, const std::vector<int>& vecs, int C, int H, int W) {
    if (static_cast<int>(vecs.size()) != H * W)
        throw ShapeError("stack_to_chw: H*W vectors needed");
    Tensor y({C, H, W});
    bool needs = false;
    for (int i = 0; i < H * W; ++i) {
        const Tensor& v = t.val(vecs[static_cast<size_t>(i)]);
        if (v.size() != C) throw ShapeError("stack_to_chw: vector length mismatch");
        needs = needs || t.needs_grad(vecs[static_cast<size_t>(i)]);
        int yy = i / W, xx = i % W;
        for (int ch = 0; ch < C; ++ch) y.at(ch, yy, xx) = v[ch];
    }
    auto self = std::make_shared<SelfRef>();
    auto ids = vecs;
    int id = t.emit(std::move(y), needs, [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        for (int i = 0; i < H * W; ++i) {
            int vid = ids[static_cast<size_t>(i)];
            if (!tp.needs_grad(vid)) continue;
            Tensor gv({C});
            int yy = i / W, xx = i % W;
            for (int ch = 0; ch < C; ++ch) gv[ch] = g.at(ch, yy, xx);
            tp.accumulate(vid, gv);
        }
    });
    self->id = id;
    return id;
}

int stack_rows(Tape& t, const std::vector<int>& vecs, int d) {
    int n = static_cast<int>(vecs.size());
    Tensor y({n, d});
    bool needs = false;
    for (int i = 0; i < n; ++i) {
        const Tensor& v = t.val(vecs[static_cast<size_t>(i)]);
        if (v.size() != d) throw ShapeError("stack_rows: vector length mismatch");
        needs = needs || t.needs_grad(vecs[static_cast<size_t>(i)]);
        for (int j = 0; j < d; ++j) y.at(i, j) = v[j];
    }
    auto self = std::make_shared<SelfRef>();
    auto ids = vecs;
    int id = t.emit(std::move(y), needs, [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        for (int i = 0; i < n; ++i) {
            int vid = ids[static_cast<size_t>(i)];
            if (!tp.needs_grad(vid)) continue;
            Tensor gv({d});
            for (int j = 0; j < d; ++j) gv[j] = g.at(i, j);
            tp.accumulate(vid, gv);
        }
    });
    self->id = id;
    return id;
}

int mean_sq(Tape& t, int x) {
    const Tensor& xv = t.val(x);
    double n = static_cast<double>(xv.size());
    double acc = 0.0;
    for (int64_t i = 0; i < xv.size(); ++i) acc += xv[i] * xv[i];
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(Tensor::scalar(acc / n), t.needs_grad(x), [=](Tape& tp) {
        double g = tp.grad_of(self->id)[0];
        const Tensor& xv2 = tp.val(x);
        Tensor* gx = tp.grad_buffer(x);
        if (!gx) return;
        double s = 2.0 * g / n;
        for (int64_t i = 0; i < xv2.size(); ++i) (*gx)[i] += s * xv2[i];
    });
    self->id = id;
    return id;
}

int mean_abs(Tape& t, int x) {
    const Tensor& xv = t.val(x);
    double n = static_cast<double>(xv.size());
    double acc = 0.0;
    for (int64_t i = 0; i < xv.size(); ++i) acc += std::fabs(xv[i]);
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(Tensor::scalar(acc / n), t.needs_grad(x), [=](Tape& tp) {
        double g = tp.grad_of(self->id)[0];
        const Tensor& xv2 = tp.val(x);
        Tensor* gx = tp.grad_buffer(x);
        if (!gx) return;
        double s = g / n;
        for (int64_t i = 0; i < xv2.size(); ++i) {
            double v = xv2[i];
            (*gx)[i] += s * (v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
        }
    });
    self->id = id;
    return id;
}

int sum_sq(Tape& t, int x) {
    const Tensor& xv = t.val(x);
    double acc = 0.0;
    for (int64_t i = 0; i < xv.size(); ++i) acc += xv[i] * xv[i];
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(Tensor::scalar(acc), t.needs_grad(x), [=](Tape& tp) {
        double g = tp.grad_of(self->id)[0];
        const Tensor& xv2 = tp.val(x);
        Tensor* gx = tp.grad_buffer(x);
        if (!gx) return;
        for (int64_t i = 0; i < xv2.size(); ++i) (*gx)[i] += 2.0 * g * xv2[i];
    });
    self->id = id;
    return id;
}

int weighted_sum(Tape& t, const std::vector<int>& xs, const std::vector<double>& ws) {
    if (xs.size() != ws.size()) throw ContractError("weighted_sum: arity mismatch");
    double acc = 0.0;
    bool needs = false;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (t.val(xs[i]).size() != 1) throw ContractError("weighted_sum: scalar inputs only");
        acc += ws[i] * t.val(xs[i])[0];
        needs = needs || t.needs_grad(xs[i]);
    }
    auto self = std::make_shared<SelfRef>();
    auto ids = xs;
    auto wts = ws;
    int id = t.emit(Tensor::scalar(acc), needs, [=](Tape& tp) {
        double g = tp.grad_of(self->id)[0];
        for (size_t i = 0; i < ids.size(); ++i) tp.accumulate(ids[i], Tensor::scalar(g * wts[i]));
    });
    self->id = id;
    return id;
}

int flatten(Tape& t, int x) {
    const Tensor& xv = t.val(x);
    Tensor y({static_cast<int>(xv.size())}, xv.vec());
    auto self = std::make_shared<SelfRef>();
    auto shape = xv.shape();
    int id = t.emit(std::move(y), t.needs_grad(x), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        tp.accumulate(x, Tensor(shape, g.vec()));
    });
    self->id = id;
    return id;
}

int add_scaled_to_channels(Tape& t, int x, int addend, double gain, double bias,
                           const std::vector<int>& channels) {
    const Tensor& xv = t.val(x);
    const Tensor& av = t.val(addend);
    if (xv.rank() != 3 || av.rank() != 3 || av.dim(0) != 1 || av.dim(1) != xv.dim(1) ||
        av.dim(2) != xv.dim(2))
        throw ShapeError("add_scaled_to_channels: addend must be {1,H,W} matching x");
    int h = xv.dim(1), w = xv.dim(2);
    Tensor y = xv;
    for (int ch : channels)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) y.at(ch, i, j) += gain * av.at(0, i, j) + bias;
    auto self = std::make_shared<SelfRef>();
    auto chans = channels;
    int id = t.emit(std::move(y), any_grad(t, {x, addend}), [=](Tape& tp) {
        const Tensor g = tp.grad_of(self->id);
        tp.accumulate(x, g);
        if (Tensor* ga = tp.grad_buffer(addend)) {
            for (int ch : chans)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) ga->at(0, i, j) += gain * g.at(ch, i, j);
        }
    });
    self->id = id;
    return id;
}

namespace {

// Forward hue math for one pixel with the branch bookkeeping the backward
// pass needs. max_ch == -1 marks vanishing chroma (hue pinned to 0, zero
// derivative).
struct HuePoint {
    double hue = 0.0;
    int max_ch = -1;
    int min_ch = -1;
    double chroma = 0.0;
    double u = 0.0;
};

HuePoint hue_point(double r, double g, double b) {
    constexpr double eps = 1e-12;
    HuePoint p;
    double mx = r, mn = r;
    int amax = 0, amin = 0;
    if (g > mx) { mx = g; amax = 1; }
    if (b > mx) { mx = b; amax = 2; }
    if (g < mn) { mn = g; amin = 1; }
    if (b < mn) { mn = b; amin = 2; }
    double c = mx - mn;
    if (c <= eps) return p;
    double u, h6;
    if (amax == 0) {
        u = g - b;
        h6 = u / c;
        if (h6 < 0) h6 += 6.0;
    } else if (amax == 1) {
        u = b - r;
        h6 = u / c + 2.0;
    } else {
        u = r - g;
        h6 = u / c + 4.0;
    }
    p.hue = h6 / 6.0;
    if (p.hue >= 1.0) p.hue -= 1.0;
    p.max_ch = amax;
    p.min_ch = amin;
    p.chroma = c;
    p.u = u;
    return p;
}

}  // namespace

void rgb_to_hue_sat(double r, double g, double b, double* hue, double* sat) {
    HuePoint p = hue_point(r, g, b);
    *hue = p.hue;
    double mx = std::max(r, std::max(g, b));
    *sat = (mx > 1e-12 && p.max_ch >= 0) ? p.chroma / mx : 0.0;
}

int hue_circular_loss(Tape& t, int rgb_unit, const Tensor& hue_ref, const Tensor& mask_ref) {
    const Tensor& xv = t.val(rgb_unit);
    if (xv.rank() != 3 || xv.dim(0) != 3) throw ShapeError("hue loss: expects {3,H,W}");
    int h = xv.dim(1), w = xv.dim(2);
    if (hue_ref.rank() != 2 || hue_ref.dim(0) != h || hue_ref.dim(1) != w ||
        !mask_ref.same_shape(hue_ref))
        throw ShapeError("hue loss: reference dims mismatch");

    double mask_sum = 0.0;
    for (int64_t i = 0; i < mask_ref.size(); ++i) mask_sum += mask_ref[i];
    if (mask_sum <= 0.0) return t.constant_scalar(0.0);

    auto points = std::make_shared<std::vector<HuePoint>>(static_cast<size_t>(h) * w);
    double acc = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            HuePoint p = hue_point(xv.at(0, y, x), xv.at(1, y, x), xv.at(2, y, x));
            (*points)[static_cast<size_t>(y) * w + x] = p;
            double d = std::fabs(p.hue - hue_ref.at(y, x));
            acc += mask_ref.at(y, x) * std::min(d, 1.0 - d);
        }
    }
    auto href = std::make_shared<Tensor>(hue_ref);
    auto mref = std::make_shared<Tensor>(mask_ref);
    auto self = std::make_shared<SelfRef>();
    int id = t.emit(Tensor::scalar(acc / mask_sum), t.needs_grad(rgb_unit), [=](Tape& tp) {
        double g = tp.grad_of(self->id)[0] / mask_sum;
        Tensor* gx = tp.grad_buffer(rgb_unit);
        if (!gx) return;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const HuePoint& p = (*points)[static_cast<size_t>(y) * w + x];
                if (p.max_ch < 0) continue;
                double m = mref->at(y, x);
                if (m == 0.0) continue;
                double diff = p.hue - href->at(y, x);
                double d = std::fabs(diff);
                double dh = (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0));
                if (d > 1.0 - d) dh = -dh;  // wrapped branch of min(d, 1-d)
                double s = g * m * dh / 6.0;
                double c = p.chroma, u = p.u;
                double d_dc = -u / (c * c);
                double d_du = 1.0 / c;
                double grads[3] = {0.0, 0.0, 0.0};
                if (p.max_ch == 0) { grads[1] += d_du; grads[2] -= d_du; }
                else if (p.max_ch == 1) { grads[2] += d_du; grads[0] -= d_du; }
                else { grads[0] += d_du; grads[1] -= d_du; }
                grads[p.max_ch] += d_dc;
                grads[p.min_ch] -= d_dc;
                for (int ch = 0; ch < 3; ++ch) gx->at(ch, y, x) += s * grads[ch];
            }
        }
    });
    self->id = id;
    return id;
}

}  // namespace docsr::ops
