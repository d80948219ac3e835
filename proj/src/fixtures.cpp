#include "docsr/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "docsr/csvio.hpp"
#include "docsr/pngio.hpp"
#include "docsr/rng.hpp"

namespace fs = std::filesystem;

namespace docsr {
namespace {

Tensor crop_tensor(const Tensor& t, int y0, int x0, int h, int w) {
    Tensor out({t.dim(0), h, w});
    for (int c = 0; c < t.dim(0); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, y0 + y, x0 + x);
    return out;
}

}  // namespace

SyntheticPage generate_page(uint64_t seed, int size, double density) {
    if (size < 64) throw ContractError("generate_page: size must be >= 64");
    if (density < 0.0 || density > 1.0) throw ContractError("generate_page: density in [0,1]");
    Rng rng(seed);
    SyntheticPage page;
    page.seed = seed;
    page.hr = Image(Tensor({3, size, size}), ValueRange::Unit);
    page.glyph_boxes.width = size;
    page.glyph_boxes.height = size;

    const double base[3] = {0.93, 0.91, 0.87};
    double bg_sum = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double n = rng.uniform(-0.02, 0.02);
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(base[c] + n + rng.uniform(-0.005, 0.005), 0.0, 1.0);
                page.hr.data.at(c, y, x) = v;
                bg_sum += v;
            }
        }
    page.background_mean = bg_sum / (3.0 * size * size);

    if (density <= 0.0) return page;

    // Text lines on a 2x line-height pitch; each line is a run of dark
    // glyph rectangles with inter-glyph and word gaps.
    int line_h = std::clamp(size / 20, 8, 14);
    int pitch = 2 * line_h + 4;
    int margin = std::max(8, size / 16);
    int rows_available = (size - 2 * margin) / pitch;
    int rows = std::max(1, static_cast<int>(std::lround(rows_available * density)));

    for (int r = 0; r < rows; ++r) {
        int y0 = margin + r * pitch + (pitch - line_h) / 2;
        if (y0 + line_h > size - margin) break;
        int x = margin + rng.uniform_int(0, line_h);
        int x_start = x;
        // Occasional saturated ink keeps the hue losses non-degenerate.
        bool colored = rng.uniform() < 0.2;
        double ink_r = colored ? rng.uniform(0.45, 0.7) : rng.uniform(0.08, 0.25);
        double ink_g = colored ? rng.uniform(0.05, 0.15) : ink_r + rng.uniform(-0.03, 0.03);
        double ink_b = colored ? rng.uniform(0.05, 0.15) : ink_r + rng.uniform(-0.03, 0.03);
        int line_end = size - margin - line_h;
        while (x < line_end) {
            int gw = rng.uniform_int(3, 9);
            if (x + gw > line_end) break;
            int glyph_top = y0 + rng.uniform_int(0, 2);
            int glyph_h = line_h - rng.uniform_int(0, 3);
            for (int yy = glyph_top; yy < std::min(glyph_top + glyph_h, size); ++yy)
                for (int xx = x; xx < x + gw; ++xx) {
                    double jitter = rng.uniform(-0.03, 0.03);
                    page.hr.data.at(0, yy, xx) = std::clamp(ink_r + jitter, 0.0, 1.0);
                    page.hr.data.at(1, yy, xx) = std::clamp(ink_g + jitter, 0.0, 1.0);
                    page.hr.data.at(2, yy, xx) = std::clamp(ink_b + jitter, 0.0, 1.0);
                }
            x += gw + (rng.uniform() < 0.2 ? rng.uniform_int(5, 9) : rng.uniform_int(1, 3));
        }
        if (x - x_start >= 8) {
            Box b;
            b.x0 = x_start;
            b.x1 = x;
            b.y0 = y0;
            b.y1 = y0 + line_h;
            page.glyph_boxes.boxes.push_back(b);
        }
    }
    page.glyph_boxes.validate();

    // Generation-time check: every ground-truth box is darker than the
    // page background.
    for (const auto& b : page.glyph_boxes.boxes) {
        double acc = 0.0;
        int64_t n = 0;
        for (int y = static_cast<int>(b.y0); y < static_cast<int>(b.y1); ++y)
            for (int x = static_cast<int>(b.x0); x < static_cast<int>(b.x1); ++x) {
                for (int c = 0; c < 3; ++c) acc += page.hr.data.at(c, y, x);
                n += 3;
            }
        if (acc / static_cast<double>(n) >= page.background_mean)
            throw Error("generate_page: box not darker than background");
    }
    return page;
}

PairWithTruth make_pair(const SyntheticPage& page, int shift_y, int shift_x, int scale) {
    if (scale != 4) throw ContractError("make_pair: scale fixed at 4");
    if (std::abs(shift_y) > 8 || std::abs(shift_x) > 8)
        throw ContractError("make_pair: |shift| must be <= 8");
    int size = page.hr.height();
    int m = 8;
    int inner = (size - 2 * m) / 4 * 4;
    if (inner < 16) throw InputTooSmallError("make_pair: page too small");

    Tensor hr_view = crop_tensor(page.hr.data, m, m, inner, inner);
    Tensor shifted = crop_tensor(page.hr.data, m - shift_y, m - shift_x, inner, inner);

    PairWithTruth out;
    out.pair.hr = Image(std::move(hr_view), ValueRange::Unit);
    out.pair.lr = simulate_lr(Image(std::move(shifted), ValueRange::Unit), 4);
    out.pair.source = PairSource::Simulated;
    out.expected_ty = -shift_y;
    out.expected_tx = -shift_x;
    return out;
}

std::string write_synthetic_corpus(const std::string& dir, int pages, int hr_size,
                                   uint64_t seed) {
    fs::create_directories(dir);
    // Page placements per shift index (index 0 is the zero-shift scan) and
    // the fixed LR/HR device offset the registration should recover.
    const int placements[9][2] = {{0, 0},  {2, 1},  {-1, 3}, {3, -2}, {-3, -1},
                                  {1, -3}, {-2, 2}, {4, 4},  {-4, 2}};
    const int dev_y = -kCorpusDeviceShiftY;  // content offset producing the target estimate
    const int dev_x = -kCorpusDeviceShiftX;

    CsvTable manifest;
    manifest.header = {"path", "page_id", "dpi", "shift_index", "corpus"};
    int m = 16;
    int inner = (hr_size - 2 * m) / 4 * 4;

    for (int p = 0; p < pages; ++p) {
        SyntheticPage page = generate_page(seed + static_cast<uint64_t>(p) * 977, hr_size, 0.8);
        std::string page_id = "page" + std::to_string(p);
        for (int s = 0; s < 9; ++s) {
            int oy = placements[s][0], ox = placements[s][1];
            Tensor hr_view = crop_tensor(page.hr.data, m + oy, m + ox, inner, inner);
            Tensor lr_src = crop_tensor(page.hr.data, m + oy - dev_y, m + ox - dev_x, inner,
                                        inner);
            Image hr_img(std::move(hr_view), ValueRange::Unit);
            Image lr_img = simulate_lr(Image(std::move(lr_src), ValueRange::Unit), 4);

            std::string hr_name = page_id + "_s" + std::to_string(s) + "_300.png";
            std::string lr_name = page_id + "_s" + std::to_string(s) + "_75.png";
            write_png(dir + "/" + hr_name, hr_img);
            write_png(dir + "/" + lr_name, lr_img);
            manifest.rows.push_back({hr_name, page_id, "300", std::to_string(s), "bulletin"});
            manifest.rows.push_back({lr_name, page_id, "75", std::to_string(s), "bulletin"});
        }
    }
    std::string manifest_path = dir + "/manifest.csv";
    write_csv(manifest_path, manifest);
    return manifest_path;
}

}  // namespace docsr
