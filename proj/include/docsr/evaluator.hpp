#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "docsr/boxes.hpp"
#include "docsr/image.hpp"
#include "docsr/stats.hpp"
#include "docsr/supervisors.hpp"

namespace docsr {

// ---- fidelity metrics ------------------------------------------------------

// 10*log10(peak^2 / MSE); +infinity for identical images.
double psnr(const Image& a, const Image& b, double peak = 1.0);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double peak = 1.0;
};

// Mean local SSIM over valid Gaussian windows, per channel, averaged.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

// Optional perceptual distance. Backends are loaded from checkpoint
// archives holding a small conv stack; absence degrades to "metric
// absent", never a crash.
class PerceptualBackend {
public:
    virtual ~PerceptualBackend() = default;
    virtual double distance(const Image& a, const Image& b) const = 0;
};

// source: "none" -> nullptr; "checkpoint:<path>" -> conv-feature backend
// (nullptr with a warning when the file is unusable).
std::unique_ptr<PerceptualBackend> load_perceptual_backend(const std::string& source);

// Writes a surrogate perceptual checkpoint (seeded random conv stack);
// used by tests and available for desk-scale experiments.
void write_surrogate_perceptual_checkpoint(const std::string& path, uint64_t seed);

// ---- detection IoU -----------------------------------------------------------

using Detector = std::function<BoxSet(const Image& unit_image)>;

struct IouResult {
    double value = 0.0;
    bool degenerate = false;  // both masks empty
};

// Rasterized union-mask IoU (pixel centers, half-open boxes).
IouResult mask_iou(const BoxSet& a, const BoxSet& b);

IouResult detection_iou(const Image& sr, const Image& hr, const Detector& detector);

// CTPN-style decoding: anchors above the confidence threshold merged into
// per-row line boxes, vertical extent refined by the regression head.
BoxSet detect_text_lines(const CtpnExtractor& ctpn, const Image& unit_image,
                         double threshold = 0.7);

// ---- model evaluation --------------------------------------------------------

struct MetricRecord {
    std::string image_id;
    std::string model_label;
    std::string regime;  // "simulated" or "real"
    double psnr_db = 0.0;
    double ssim = 0.0;
    std::optional<double> lpips;
    double iou = 0.0;
    bool iou_degenerate = false;
};

struct EvalModel {
    std::string label;
    std::function<Image(const Image& lr_unit)> super_resolve;  // unit -> unit (4x)
};

// The bicubic-interpolation baseline every comparison includes.
EvalModel bicubic_baseline();

struct EvalItem {
    std::string id;
    Image lr;  // unit
    Image hr;  // unit, 4x dims
    std::string regime;
};

std::vector<MetricRecord> evaluate_models(const std::vector<EvalModel>& models,
                                          const std::vector<EvalItem>& items,
                                          const Detector& detector,
                                          const PerceptualBackend* lpips_backend);

void write_metrics_csv(const std::string& path, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_metrics_csv(const std::string& path);

// ---- statistical comparison ----------------------------------------------------

struct SignificanceMatrix {
    std::string metric;
    std::string regime;
    std::vector<std::string> labels;
    std::vector<std::vector<std::string>> cells;  // "NS" or +/-stars
    std::vector<int> outperformed;                // per-row count of wins
    KruskalWallisResult kruskal;
};

// Per metric and regime: mean/std summary plus the pairwise Dunn-BH
// significance matrix with direction and row-win counts.
struct CompareOutputs {
    std::vector<std::string> summary_lines;  // csv rows, model x metric
    std::vector<SignificanceMatrix> matrices;
    std::vector<std::string> warnings;
};

CompareOutputs compare_models(const std::vector<MetricRecord>& records);

void write_summary_csv(const std::string& path, const CompareOutputs& outputs);
void write_significance_csv(const std::string& dir, const SignificanceMatrix& matrix);
void write_violin_csv(const std::string& dir, const std::vector<MetricRecord>& records,
                      const std::string& metric);

}  // namespace docsr
