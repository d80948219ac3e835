#include "docsr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "docsr/checkpoint.hpp"
#include "docsr/csvio.hpp"
#include "docsr/losses.hpp"
#include "docsr/ops.hpp"
#include "docsr/resample.hpp"
#include "docsr/rng.hpp"

namespace docsr {

// ---- fidelity metrics -----------------------------------------------------

double psnr(const Image& a, const Image& b, double peak) {
    double mse = mse_loss(a, b);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Image& a, const Image& b, const SsimParams& p) {
    require_same_shape(a.data, b.data, "ssim");
    int w = p.window;
    if (a.height() < w || a.width() < w) throw InputTooSmallError("ssim: image smaller than window");

    std::vector<double> kernel(static_cast<size_t>(w) * w);
    double sum = 0.0;
    int half = w / 2;
    for (int y = 0; y < w; ++y)
        for (int x = 0; x < w; ++x) {
            double dy = y - half, dx = x - half;
            double g = std::exp(-(dy * dy + dx * dx) / (2.0 * p.sigma * p.sigma));
            kernel[static_cast<size_t>(y) * w + x] = g;
            sum += g;
        }
    for (auto& k : kernel) k /= sum;

    double c1 = (p.k1 * p.peak) * (p.k1 * p.peak);
    double c2 = (p.k2 * p.peak) * (p.k2 * p.peak);

    double total = 0.0;
    int64_t count = 0;
    int oh = a.height() - w + 1, ow = a.width() - w + 1;
    for (int c = 0; c < a.channels(); ++c) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double mu_a = 0, mu_b = 0, saa = 0, sbb = 0, sab = 0;
                for (int y = 0; y < w; ++y)
                    for (int x = 0; x < w; ++x) {
                        double k = kernel[static_cast<size_t>(y) * w + x];
                        double va = a.data.at(c, oy + y, ox + x);
                        double vb = b.data.at(c, oy + y, ox + x);
                        mu_a += k * va;
                        mu_b += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                double var_a = saa - mu_a * mu_a;
                double var_b = sbb - mu_b * mu_b;
                double cov = sab - mu_a * mu_b;
                double s = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                           ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                total += s;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

// ---- perceptual backend -----------------------------------------------------

namespace {

// Conv stack defined entirely by the checkpoint's layerN.weight/.bias
// tensors: 3x3 conv, tanh, 2x2 mean pool per layer. Distance is the mean
// squared feature difference averaged over layers.
class ConvFeatureBackend : public PerceptualBackend {
public:
    explicit ConvFeatureBackend(ParamStore params) : params_(std::move(params)) {
        for (size_t i = 0;; ++i) {
            std::string name = "layer" + std::to_string(i) + ".weight";
            if (!params_.has(name)) break;
            ++layers_;
        }
        if (layers_ == 0) throw IoError("perceptual checkpoint holds no layers");
    }

    double distance(const Image& a, const Image& b) const override {
        require_same_shape(a.data, b.data, "lpips");
        std::vector<Tensor> fa = features(a), fb = features(b);
        double acc = 0.0;
        for (size_t i = 0; i < fa.size(); ++i) {
            double layer = 0.0;
            for (int64_t k = 0; k < fa[i].size(); ++k) {
                double d = fa[i][k] - fb[i][k];
                layer += d * d;
            }
            acc += layer / static_cast<double>(fa[i].size());
        }
        return acc / static_cast<double>(fa.size());
    }

private:
    std::vector<Tensor> features(const Image& img) const {
        Tape t;
        ParamNodes nodes = push_params(t, params_, false);
        auto look = [&](const std::string& name) {
            for (size_t i = 0; i < params_.count(); ++i)
                if (params_.name(i) == name) return nodes.node(i);
            throw ContractError("perceptual: missing " + name);
        };
        std::vector<Tensor> feats;
        int x = t.constant(img.data);
        for (size_t i = 0; i < layers_; ++i) {
            std::string base = "layer" + std::to_string(i);
            x = ops::tanh(t, ops::conv2d(t, x, look(base + ".weight"), look(base + ".bias"), 1,
                                         1, 1, 1));
            feats.push_back(t.val(x));
            if (t.val(x).dim(1) >= 4 && t.val(x).dim(2) >= 4) x = ops::avg_pool(t, x, 2);
        }
        return feats;
    }

    ParamStore params_;
    size_t layers_ = 0;
};

}  // namespace

std::unique_ptr<PerceptualBackend> load_perceptual_backend(const std::string& source) {
    if (source.empty() || source == "none") return nullptr;
    if (source.rfind("checkpoint:", 0) != 0)
        throw ConfigError("eval.lpips: expected none or checkpoint:<path>");
    std::string path = source.substr(11);
    try {
        Checkpoint ckpt = load_checkpoint(path);
        return std::make_unique<ConvFeatureBackend>(std::move(ckpt.params));
    } catch (const Error& e) {
        std::cerr << "warning: perceptual backend unavailable (" << e.what()
                  << "); LPIPS will be absent\n";
        return nullptr;
    }
}

void write_surrogate_perceptual_checkpoint(const std::string& path, uint64_t seed) {
    Rng rng(seed);
    Checkpoint ckpt;
    ckpt.config.set("perceptual.layers", "3");
    int cin = 3;
    const int chans[3] = {8, 12, 16};
    for (int i = 0; i < 3; ++i) {
        Tensor w({chans[i], cin, 3, 3});
        double bound = std::sqrt(1.0 / (cin * 9.0));
        for (auto& v : w.vec()) v = rng.uniform(-bound, bound);
        Tensor b({chans[i]});
        for (auto& v : b.vec()) v = rng.uniform(-bound, bound);
        ckpt.params.add("layer" + std::to_string(i) + ".weight", std::move(w));
        ckpt.params.add("layer" + std::to_string(i) + ".bias", std::move(b));
        cin = chans[i];
    }
    save_checkpoint(path, ckpt);
}

// ---- detection IoU -----------------------------------------------------------

namespace {

// Row-wise interval union (the production path; the tests compare it
// against a naive per-pixel oracle).
int64_t row_union_area(const BoxSet& s, int y, std::vector<std::pair<int, int>>& scratch) {
    scratch.clear();
    double cy = y + 0.5;
    for (const auto& b : s.boxes) {
        if (cy < b.y0 || cy >= b.y1) continue;
        int x0 = static_cast<int>(std::ceil(b.x0 - 0.5));
        int x1 = static_cast<int>(std::ceil(b.x1 - 0.5));  // exclusive
        x0 = std::max(x0, 0);
        x1 = std::min(x1, s.width);
        if (x1 > x0) scratch.push_back({x0, x1});
    }
    std::sort(scratch.begin(), scratch.end());
    int64_t area = 0;
    int cur_lo = 0, cur_hi = -1;
    for (auto [lo, hi] : scratch) {
        if (hi <= cur_hi) continue;
        if (lo > cur_hi) {
            area += cur_hi - cur_lo;
            cur_lo = lo;
            cur_hi = hi;
        } else {
            cur_hi = hi;
        }
    }
    area += std::max(0, cur_hi - cur_lo);
    return area;
}

}  // namespace

IouResult mask_iou(const BoxSet& a, const BoxSet& b) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("mask_iou: image dims differ");
    a.validate();
    b.validate();
    if (a.boxes.empty() && b.boxes.empty()) return {1.0, true};
    if (a.boxes.empty() || b.boxes.empty()) return {0.0, false};

    // Union/intersection accumulated row by row; the intersection of two
    // interval unions is |A| + |B| - |A u B| per row.
    std::vector<std::pair<int, int>> scratch;
    int64_t area_a = 0, area_b = 0, area_union = 0;
    BoxSet merged = a;
    merged.boxes.insert(merged.boxes.end(), b.boxes.begin(), b.boxes.end());
    for (int y = 0; y < a.height; ++y) {
        area_a += row_union_area(a, y, scratch);
        area_b += row_union_area(b, y, scratch);
        area_union += row_union_area(merged, y, scratch);
    }
    int64_t inter = area_a + area_b - area_union;
    if (area_union == 0) return {1.0, true};
    return {static_cast<double>(inter) / static_cast<double>(area_union), false};
}

IouResult detection_iou(const Image& sr, const Image& hr, const Detector& detector) {
    if (sr.height() != hr.height() || sr.width() != hr.width())
        throw ShapeError("detection_iou: dims differ");
    return mask_iou(detector(sr), detector(hr));
}

BoxSet detect_text_lines(const CtpnExtractor& ctpn, const Image& unit_image, double threshold) {
    CtpnFeatures feats = ctpn.extract(unit_image);
    int stride = ctpn.config().stride();
    int k = ctpn.config().num_anchors;
    int hp = feats.clss.dim(1), wp = feats.clss.dim(2);

    BoxSet out;
    out.width = unit_image.width();
    out.height = unit_image.height();

    for (int y = 0; y < hp; ++y) {
        int run_start = -1;
        double run_score = 0.0;
        double run_dy = 0.0, run_dh = 0.0;
        int run_len = 0;
        auto flush = [&](int x_end) {
            if (run_start < 0) return;
            Box b;
            b.x0 = run_start * stride;
            b.x1 = std::min(x_end * stride, out.width);
            double cy = (y + 0.5) * stride + (run_dy / run_len) * stride;
            double h = stride * std::exp(std::clamp(run_dh / run_len, -1.0, 1.0));
            b.y0 = std::clamp(cy - h / 2.0, 0.0, static_cast<double>(out.height - 1));
            b.y1 = std::clamp(cy + h / 2.0, b.y0 + 1.0, static_cast<double>(out.height));
            b.score = run_score / run_len;
            if (b.x1 > b.x0) out.boxes.push_back(b);
            run_start = -1;
            run_score = run_dy = run_dh = 0.0;
            run_len = 0;
        };
        for (int x = 0; x < wp; ++x) {
            double best_p = 0.0;
            int best_a = 0;
            for (int a = 0; a < k; ++a) {
                double logit_bg = feats.clss.at(2 * a, y, x);
                double logit_text = feats.clss.at(2 * a + 1, y, x);
                double pr = 1.0 / (1.0 + std::exp(logit_bg - logit_text));
                if (pr > best_p) {
                    best_p = pr;
                    best_a = a;
                }
            }
            if (best_p > threshold) {
                if (run_start < 0) run_start = x;
                run_score += best_p;
                run_dy += feats.reg.at(2 * best_a, y, x);
                run_dh += feats.reg.at(2 * best_a + 1, y, x);
                ++run_len;
            } else {
                flush(x);
            }
        }
        flush(wp);
    }
    return out;
}

// ---- model evaluation ----------------------------------------------------------

EvalModel bicubic_baseline() {
    EvalModel m;
    m.label = "Int.";
    m.super_resolve = [](const Image& lr) {
        Image out(resample_bicubic(lr.data, 4 * lr.height(), 4 * lr.width()), ValueRange::Unit);
        clamp_to_range(out);
        return out;
    };
    return m;
}

std::vector<MetricRecord> evaluate_models(const std::vector<EvalModel>& models,
                                          const std::vector<EvalItem>& items,
                                          const Detector& detector,
                                          const PerceptualBackend* lpips_backend) {
    if (models.empty()) throw ContractError("evaluate_models: no models");
    if (items.empty()) throw ContractError("evaluate_models: no test items");
    std::vector<MetricRecord> records;
    for (const auto& model : models) {
        for (const auto& item : items) {
            Image sr = model.super_resolve(item.lr);
            MetricRecord r;
            r.image_id = item.id;
            r.model_label = model.label;
            r.regime = item.regime;
            r.psnr_db = psnr(sr, item.hr);
            r.ssim = ssim(sr, item.hr);
            if (lpips_backend) r.lpips = lpips_backend->distance(sr, item.hr);
            IouResult iou = detection_iou(sr, item.hr, detector);
            r.iou = iou.value;
            r.iou_degenerate = iou.degenerate;
            records.push_back(std::move(r));
        }
    }
    return records;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricRecord>& records) {
    CsvTable t;
    t.header = {"image_id", "model", "regime", "psnr_db", "ssim", "lpips", "iou",
                "iou_degenerate"};
    for (const auto& r : records) {
        t.rows.push_back({r.image_id, r.model_label, r.regime,
                          std::isinf(r.psnr_db) ? "inf" : fmt(r.psnr_db), fmt(r.ssim),
                          r.lpips ? fmt(*r.lpips) : "", fmt(r.iou),
                          r.iou_degenerate ? "1" : "0"});
    }
    write_csv(path, t);
}

std::vector<MetricRecord> read_metrics_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int c_id = t.column("image_id"), c_model = t.column("model"), c_reg = t.column("regime");
    int c_psnr = t.column("psnr_db"), c_ssim = t.column("ssim"), c_lpips = t.column("lpips");
    int c_iou = t.column("iou"), c_deg = t.column("iou_degenerate");
    std::vector<MetricRecord> out;
    for (const auto& row : t.rows) {
        MetricRecord r;
        r.image_id = row[static_cast<size_t>(c_id)];
        r.model_label = row[static_cast<size_t>(c_model)];
        r.regime = row[static_cast<size_t>(c_reg)];
        std::string ps = row[static_cast<size_t>(c_psnr)];
        r.psnr_db = ps == "inf" ? std::numeric_limits<double>::infinity() : std::stod(ps);
        r.ssim = std::stod(row[static_cast<size_t>(c_ssim)]);
        std::string lp = row[static_cast<size_t>(c_lpips)];
        if (!lp.empty()) r.lpips = std::stod(lp);
        r.iou = std::stod(row[static_cast<size_t>(c_iou)]);
        r.iou_degenerate = row[static_cast<size_t>(c_deg)] == "1";
        out.push_back(std::move(r));
    }
    return out;
}

// ---- statistical comparison -------------------------------------------------

namespace {

struct MetricAccess {
    std::string name;
    bool higher_better;
    std::function<std::optional<double>(const MetricRecord&)> get;
};

std::vector<MetricAccess> metric_accessors() {
    return {
        {"psnr", true, [](const MetricRecord& r) -> std::optional<double> {
             if (std::isinf(r.psnr_db)) return std::nullopt;  // sentinel excluded
             return r.psnr_db;
         }},
        {"ssim", true, [](const MetricRecord& r) -> std::optional<double> { return r.ssim; }},
        {"lpips", false, [](const MetricRecord& r) { return r.lpips; }},
        {"iou", true, [](const MetricRecord& r) -> std::optional<double> { return r.iou; }},
    };
}

}  // namespace

CompareOutputs compare_models(const std::vector<MetricRecord>& records) {
    CompareOutputs out;
    std::vector<std::string> labels;
    std::set<std::string> regimes;
    for (const auto& r : records) {
        if (std::find(labels.begin(), labels.end(), r.model_label) == labels.end())
            labels.push_back(r.model_label);
        regimes.insert(r.regime);
    }
    if (labels.size() < 2) throw ContractError("compare_models: need >= 2 models");

    out.summary_lines.push_back(
        "model,regime,psnr_mean,psnr_std,psnr_inf_count,ssim_mean,ssim_std,lpips_mean,"
        "lpips_std,iou_mean,iou_std");

    auto mean_std = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= v.empty() ? 1.0 : static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        s = v.size() > 1 ? std::sqrt(s / (static_cast<double>(v.size()) - 1.0)) : 0.0;
        return std::make_pair(m, s);
    };

    for (const std::string& regime : regimes) {
        for (const auto& label : labels) {
            std::vector<double> ps, ss, lp, io;
            int inf_count = 0;
            for (const auto& r : records) {
                if (r.model_label != label || r.regime != regime) continue;
                if (std::isinf(r.psnr_db))
                    ++inf_count;
                else
                    ps.push_back(r.psnr_db);
                ss.push_back(r.ssim);
                if (r.lpips) lp.push_back(*r.lpips);
                io.push_back(r.iou);
            }
            auto [pm, pstd] = mean_std(ps);
            auto [sm, sstd] = mean_std(ss);
            auto [lm, lstd] = mean_std(lp);
            auto [im, istd] = mean_std(io);
            std::ostringstream line;
            line << label << "," << regime << "," << fmt(pm) << "," << fmt(pstd) << ","
                 << inf_count << "," << fmt(sm) << "," << fmt(sstd) << ","
                 << (lp.empty() ? "" : fmt(lm)) << "," << (lp.empty() ? "" : fmt(lstd)) << ","
                 << fmt(im) << "," << fmt(istd);
            out.summary_lines.push_back(line.str());
        }

        for (const auto& metric : metric_accessors()) {
            std::vector<std::vector<double>> groups;
            bool missing = false;
            for (const auto& label : labels) {
                std::vector<double> g;
                for (const auto& r : records) {
                    if (r.model_label != label || r.regime != regime) continue;
                    auto v = metric.get(r);
                    if (v) g.push_back(metric.higher_better ? *v : -*v);
                }
                if (g.empty()) missing = true;
                groups.push_back(std::move(g));
            }
            if (missing) {
                out.warnings.push_back("metric " + metric.name + " (" + regime +
                                       "): missing scores, matrix skipped");
                continue;
            }
            DunnBhResult dunn = dunn_bh(groups);
            SignificanceMatrix m;
            m.metric = metric.name;
            m.regime = regime;
            m.labels = labels;
            m.kruskal = kruskal_wallis(groups);
            m.cells.assign(labels.size(), std::vector<std::string>(labels.size(), "---"));
            m.outperformed.assign(labels.size(), 0);
            for (size_t i = 0; i < labels.size(); ++i) {
                for (size_t j = 0; j < labels.size(); ++j) {
                    if (i == j) continue;
                    std::string stars = dunn.stars[i][j];
                    if (stars == "NS") {
                        m.cells[i][j] = "NS";
                        continue;
                    }
                    bool row_better = dunn.z[i][j] > 0;
                    m.cells[i][j] = (row_better ? "+" : "-") + stars;
                    if (row_better) ++m.outperformed[static_cast<size_t>(i)];
                }
            }
            out.matrices.push_back(std::move(m));
        }
    }
    return out;
}

void write_summary_csv(const std::string& path, const CompareOutputs& outputs) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    for (const auto& line : outputs.summary_lines) f << line << "\n";
}

void write_significance_csv(const std::string& dir, const SignificanceMatrix& matrix) {
    std::string path = dir + "/sig_" + matrix.metric + "_" + matrix.regime + ".csv";
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "model";
    for (const auto& l : matrix.labels) f << "," << l;
    f << ",outperformed\n";
    for (size_t i = 0; i < matrix.labels.size(); ++i) {
        f << matrix.labels[i];
        for (size_t j = 0; j < matrix.labels.size(); ++j) f << "," << matrix.cells[i][j];
        f << "," << matrix.outperformed[i] << "\n";
    }
    f << "# kruskal_h," << matrix.kruskal.h << "\n";
    f << "# kruskal_p," << matrix.kruskal.p_value << "\n";
}

void write_violin_csv(const std::string& dir, const std::vector<MetricRecord>& records,
                      const std::string& metric) {
    std::string path = dir + "/violin_" + metric + ".csv";
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "model,regime,image_id,value\n";
    for (const auto& r : records) {
        std::optional<double> v;
        if (metric == "psnr") v = std::isinf(r.psnr_db) ? std::nullopt
                                                        : std::optional<double>(r.psnr_db);
        else if (metric == "ssim") v = r.ssim;
        else if (metric == "lpips") v = r.lpips;
        else if (metric == "iou") v = r.iou;
        else throw ContractError("unknown metric: " + metric);
        if (v) f << r.model_label << "," << r.regime << "," << r.image_id << "," << fmt(*v)
                 << "\n";
    }
}

}  // namespace docsr
