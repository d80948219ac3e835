#include "docsr/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "docsr/csvio.hpp"
#include "docsr/fft.hpp"
#include "docsr/pngio.hpp"
#include "docsr/resample.hpp"
#include "docsr/rng.hpp"

namespace fs = std::filesystem;

namespace docsr {
namespace {

Tensor crop_tensor(const Tensor& t, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > t.dim(1) || x0 + w > t.dim(2))
        throw ShapeError("crop out of bounds");
    Tensor out({t.dim(0), h, w});
    for (int c = 0; c < t.dim(0); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, y0 + y, x0 + x);
    return out;
}

}  // namespace

// ---- manifest & splits ------------------------------------------------

std::vector<ScanRecord> load_manifest(const std::string& path) {
    CsvTable table = read_csv(path);
    int c_path = table.column("path");
    int c_page = table.column("page_id");
    int c_dpi = table.column("dpi");
    int c_shift = table.column("shift_index");
    int c_corpus = table.column("corpus");
    std::vector<ScanRecord> records;
    for (const auto& row : table.rows) {
        ScanRecord r;
        r.path = row[static_cast<size_t>(c_path)];
        r.page_id = row[static_cast<size_t>(c_page)];
        r.dpi = std::stoi(row[static_cast<size_t>(c_dpi)]);
        r.shift_index = std::stoi(row[static_cast<size_t>(c_shift)]);
        r.corpus = row[static_cast<size_t>(c_corpus)];
        if (std::find(kSupportedDpi.begin(), kSupportedDpi.end(), r.dpi) == kSupportedDpi.end())
            throw DataIntegrityError("manifest: unsupported dpi " + std::to_string(r.dpi) +
                                     " for " + r.path);
        if (r.shift_index < 0 || r.shift_index > 8)
            throw DataIntegrityError("manifest: shift_index out of range for " + r.path);
        records.push_back(std::move(r));
    }
    return records;
}

SplitResult split_dataset(const std::vector<ScanRecord>& records) {
    std::set<std::string> seen;
    SplitResult out;
    std::map<std::string, std::set<int>> shifts_per_page;
    for (const auto& r : records) {
        std::string key = r.page_id + "|" + std::to_string(r.dpi) + "|" +
                          std::to_string(r.shift_index);
        if (!seen.insert(key).second)
            throw DataIntegrityError("duplicate (page, dpi, shift) record: " + key);
        bool trainable = r.corpus == "bulletin" || r.corpus == "article";
        if (!trainable) {
            out.test.push_back(r);
            continue;
        }
        shifts_per_page[r.page_id + "|" + std::to_string(r.dpi)].insert(r.shift_index);
        if (r.shift_index == 0)
            out.val.push_back(r);
        else
            out.train.push_back(r);
    }
    for (const auto& [key, shifts] : shifts_per_page) {
        if (static_cast<int>(shifts.size()) < 9)
            out.warnings.push_back("page " + key + " has only " +
                                   std::to_string(shifts.size()) + " of 9 shifts");
    }
    return out;
}

// ---- registration ------------------------------------------------------

namespace {

double shift_mse(const Tensor& lr_up, const Tensor& hr, int ty, int tx, int m) {
    int c = hr.dim(0), h = hr.dim(1), w = hr.dim(2);
    double acc = 0.0;
    int64_t n = 0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = m; y < h - m; ++y)
            for (int x = m; x < w - m; ++x) {
                double d = lr_up.at(ch, y - ty, x - tx) - hr.at(ch, y, x);
                acc += d * d;
                ++n;
            }
    return acc / static_cast<double>(n);
}

}  // namespace

TranslationEstimate estimate_translation(const Image& lr, const Image& hr, int margin,
                                         int radius, int samples, uint64_t seed) {
    if (radius < 1) throw ContractError("estimate_translation: radius must be >= 1");
    if (samples < 1) throw ContractError("estimate_translation: samples must be >= 1");
    int th = std::min(hr.height() / 4, lr.height());
    int tw = std::min(hr.width() / 4, lr.width());
    if (th < 1 || tw < 1) throw InputTooSmallError("estimate_translation: empty overlap");
    Tensor lr_t = (th == lr.height() && tw == lr.width())
                      ? lr.data
                      : crop_tensor(lr.data, 0, 0, th, tw);
    Tensor hr_t = (4 * th == hr.height() && 4 * tw == hr.width())
                      ? hr.data
                      : crop_tensor(hr.data, 0, 0, 4 * th, 4 * tw);

    Tensor lr_up = resample_bicubic(lr_t, 4 * th, 4 * tw);
    int m = margin + radius;  // candidates share one valid window
    if (4 * th - 2 * m < 1 || 4 * tw - 2 * m < 1)
        throw InputTooSmallError("estimate_translation: crop region empty after margin");

    std::map<std::pair<int, int>, double> scores;
    auto eval = [&](int ty, int tx) {
        auto key = std::make_pair(ty, tx);
        auto it = scores.find(key);
        if (it != scores.end()) return it->second;
        double s = shift_mse(lr_up, hr_t, ty, tx, m);
        scores.emplace(key, s);
        return s;
    };

    Rng rng(seed);
    int best_y = 0, best_x = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        int ty = rng.uniform_int(-radius, radius);
        int tx = rng.uniform_int(-radius, radius);
        double s = eval(ty, tx);
        if (s < best) {
            best = s;
            best_y = ty;
            best_x = tx;
        }
    }
    // Greedy exhaustive refinement over successive 3x3 neighborhoods.
    bool improved = true;
    while (improved) {
        improved = false;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                int ty = std::clamp(best_y + dy, -radius, radius);
                int tx = std::clamp(best_x + dx, -radius, radius);
                double s = eval(ty, tx);
                if (s < best) {
                    best = s;
                    best_y = ty;
                    best_x = tx;
                    improved = true;
                }
            }
    }
    return {best_y, best_x, best};
}

Image translate_image(const Image& img, int dy, int dx) {
    int h = img.height(), w = img.width();
    if (std::abs(dy) >= h || std::abs(dx) >= w)
        throw ShapeError("translate_image: shift larger than image");
    int src_y = std::max(0, -dy), src_x = std::max(0, -dx);
    return Image(crop_tensor(img.data, src_y, src_x, h - std::abs(dy), w - std::abs(dx)),
                 img.range);
}

RegisteredPair apply_translation(const RegisteredPair& pair) {
    int ty = pair.translation_y, tx = pair.translation_x;
    int hh = pair.hr.height(), hw = pair.hr.width();
    if (std::abs(ty) >= hh || std::abs(tx) >= hw)
        throw ShapeError("apply_translation: shift larger than image");

    // Upsampled-LR pixel (u,v) corresponds to hr(u+ty, v+tx); intersect
    // and round the valid window inward to multiples of 4.
    auto window = [](int t, int size) {
        int lo = std::max(0, -t);
        int hi = std::min(size, size - t);
        lo = (lo + 3) / 4 * 4;
        hi = hi / 4 * 4;
        if (hi <= lo) throw ShapeError("apply_translation: no aligned overlap");
        return std::make_pair(lo, hi);
    };
    auto [y0, y1] = window(ty, hh);
    auto [x0, x1] = window(tx, hw);

    RegisteredPair out;
    out.lr = Image(crop_tensor(pair.lr.data, y0 / 4, x0 / 4, (y1 - y0) / 4, (x1 - x0) / 4),
                   pair.lr.range);
    out.hr = Image(crop_tensor(pair.hr.data, y0 + ty, x0 + tx, y1 - y0, x1 - x0), pair.hr.range);
    out.translation_y = ty;
    out.translation_x = tx;
    out.source = pair.source;
    return out;
}

// ---- patches & simulation ----------------------------------------------

namespace {

std::vector<int> tile_origins(int size, int patch) {
    std::vector<int> origins;
    for (int p = 0; p + patch <= size; p += patch) origins.push_back(p);
    int last = size - patch;
    if (origins.empty() || origins.back() != last) origins.push_back(last);
    return origins;
}

}  // namespace

std::vector<PatchPair> extract_patches(const RegisteredPair& pair, int lr_patch) {
    int lh = pair.lr.height(), lw = pair.lr.width();
    if (lh < lr_patch || lw < lr_patch)
        throw InputTooSmallError("extract_patches: LR smaller than patch size");
    if (pair.hr.height() != 4 * lh || pair.hr.width() != 4 * lw)
        throw ShapeError("extract_patches: pair is not an exact 4x pair");
    std::vector<PatchPair> out;
    for (int oy : tile_origins(lh, lr_patch)) {
        for (int ox : tile_origins(lw, lr_patch)) {
            PatchPair p;
            p.lr_patch = Image(crop_tensor(pair.lr.data, oy, ox, lr_patch, lr_patch),
                               pair.lr.range);
            p.hr_patch = Image(
                crop_tensor(pair.hr.data, 4 * oy, 4 * ox, 4 * lr_patch, 4 * lr_patch),
                pair.hr.range);
            p.origin_y = oy;
            p.origin_x = ox;
            out.push_back(std::move(p));
        }
    }
    return out;
}

Image simulate_lr(const Image& hr, int scale) {
    if (scale < 1) throw ContractError("simulate_lr: scale must be positive");
    if (hr.height() % scale != 0 || hr.width() % scale != 0)
        throw ShapeError("simulate_lr: dims not divisible by scale (crop first)");
    Image out(resample_bicubic(hr.data, hr.height() / scale, hr.width() / scale), hr.range);
    clamp_to_range(out);
    return out;
}

// ---- phase-correlation tile alignment ------------------------------------

namespace {

struct GrayTile {
    std::vector<double> v;  // mean-subtracted, Hann-windowed
    double variance = 0.0;
};

GrayTile gray_tile(const Image& img, int y0, int x0, int size) {
    GrayTile out;
    out.v.resize(static_cast<size_t>(size) * size);
    double mean = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double g = 0.0;
            for (int c = 0; c < img.channels(); ++c) g += img.data.at(c, y0 + y, x0 + x);
            g /= img.channels();
            out.v[static_cast<size_t>(y) * size + x] = g;
            mean += g;
        }
    mean /= static_cast<double>(size) * size;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double& p = out.v[static_cast<size_t>(y) * size + x];
            p -= mean;
            out.variance += p * p;
            double wy = 0.5 - 0.5 * std::cos(2.0 * M_PI * y / (size - 1));
            double wx = 0.5 - 0.5 * std::cos(2.0 * M_PI * x / (size - 1));
            p *= wy * wx;
        }
    out.variance /= static_cast<double>(size) * size;
    return out;
}

// Shift (dy,dx) such that translate(scan, dy, dx) aligns onto ref.
std::pair<std::array<int, 2>, double> phase_peak(const GrayTile& scan, const GrayTile& ref,
                                                 int size) {
    int n = next_pow2(2 * size);  // zero-pad to avoid wrap-around bias
    std::vector<std::complex<double>> fa(static_cast<size_t>(n) * n),
        fb(static_cast<size_t>(n) * n);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            fa[static_cast<size_t>(y) * n + x] = scan.v[static_cast<size_t>(y) * size + x];
            fb[static_cast<size_t>(y) * n + x] = ref.v[static_cast<size_t>(y) * size + x];
        }
    fft2d(fa, n, n, false);
    fft2d(fb, n, n, false);
    for (size_t i = 0; i < fa.size(); ++i) {
        std::complex<double> cross = fb[i] * std::conj(fa[i]);
        double mag = std::abs(cross);
        fa[i] = mag > 1e-12 ? cross / mag : std::complex<double>(0.0, 0.0);
    }
    fft2d(fa, n, n, true);
    int best_y = 0, best_x = 0;
    double best = -1.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double v = fa[static_cast<size_t>(y) * n + x].real();
            if (v > best) {
                best = v;
                best_y = y;
                best_x = x;
            }
        }
    int dy = best_y <= n / 2 ? best_y : best_y - n;
    int dx = best_x <= n / 2 ? best_x : best_x - n;
    return {{dy, dx}, best};
}

}  // namespace

TileAlignResult align_tiles_phase_correlation(const Image& scan, const Image& reference,
                                              int tile) {
    if (scan.height() != reference.height() || scan.width() != reference.width())
        throw ShapeError("align_tiles: scan and reference dims differ");
    int h = scan.height(), w = scan.width();
    int size = std::min({tile, h, w});
    int stride = std::max(1, size / 2);  // 50% overlap

    std::vector<int> oys = [&] {
        std::vector<int> v;
        for (int p = 0; p + size <= h; p += stride) v.push_back(p);
        if (v.empty() || v.back() != h - size) v.push_back(h - size);
        return v;
    }();
    std::vector<int> oxs = [&] {
        std::vector<int> v;
        for (int p = 0; p + size <= w; p += stride) v.push_back(p);
        if (v.empty() || v.back() != w - size) v.push_back(w - size);
        return v;
    }();

    TileAlignResult result;
    Tensor acc({scan.channels(), h, w});
    Tensor wsum({1, h, w});
    int last_dy = 0, last_dx = 0;
    bool have_last = false;

    for (int oy : oys) {
        for (int ox : oxs) {
            GrayTile st = gray_tile(scan, oy, ox, size);
            GrayTile rt = gray_tile(reference, oy, ox, size);
            TileShift ts;
            ts.tile_y = oy;
            ts.tile_x = ox;
            if (st.variance < 1e-12 || rt.variance < 1e-12) {
                ts.flat = true;
                ts.inherited = have_last;
                ts.dy = last_dy;
                ts.dx = last_dx;
            } else {
                auto [shift, peak] = phase_peak(st, rt, size);
                ts.dy = shift[0];
                ts.dx = shift[1];
                ts.peak = peak;
                last_dy = ts.dy;
                last_dx = ts.dx;
                have_last = true;
            }
            result.report.push_back(ts);

            // Feathered accumulation of the shifted tile.
            for (int y = 0; y < size; ++y) {
                int sy = y - ts.dy;  // sample scan at (y - dy) to move content by +dy
                if (sy < 0 || sy >= size) continue;
                for (int x = 0; x < size; ++x) {
                    int sx = x - ts.dx;
                    if (sx < 0 || sx >= size) continue;
                    double wy = 1.0 - std::fabs(2.0 * y / (size - 1) - 1.0);
                    double wx = 1.0 - std::fabs(2.0 * x / (size - 1) - 1.0);
                    double weight = (0.05 + wy) * (0.05 + wx);
                    for (int c = 0; c < scan.channels(); ++c)
                        acc.at(c, oy + y, ox + x) +=
                            weight * scan.data.at(c, oy + sy, ox + sx);
                    wsum.at(0, oy + y, ox + x) += weight;
                }
            }
        }
    }

    Tensor outd({scan.channels(), h, w});
    for (int c = 0; c < scan.channels(); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double ws = wsum.at(0, y, x);
                outd.at(c, y, x) = ws > 0 ? acc.at(c, y, x) / ws : scan.data.at(c, y, x);
            }
    result.aligned = Image(std::move(outd), scan.range);
    clamp_to_range(result.aligned);
    return result;
}

// ---- patch store -----------------------------------------------------------

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw DataIntegrityError("unknown split: " + s);
}

std::string source_name(PairSource s) {
    return s == PairSource::Real ? "real" : "simulated";
}

PairSource parse_source(const std::string& s) {
    if (s == "real") return PairSource::Real;
    if (s == "simulated") return PairSource::Simulated;
    throw DataIntegrityError("unknown source: " + s);
}

void write_patch_store(const std::string& dir, const std::string& page_id, int dpi,
                       int shift_index, PairSource source,
                       const std::vector<PatchPair>& patches,
                       std::vector<PatchStoreEntry>& index) {
    fs::create_directories(dir);
    for (const auto& p : patches) {
        std::string stem = page_id + "_" + std::to_string(dpi) + "_" +
                           std::to_string(shift_index) + "_" + std::to_string(p.origin_y) + "_" +
                           std::to_string(p.origin_x);
        PatchStoreEntry e;
        e.lr_path = stem + "_lr.png";
        e.hr_path = stem + "_hr.png";
        e.page_id = page_id;
        e.dpi = dpi;
        e.shift_index = shift_index;
        e.origin_y = p.origin_y;
        e.origin_x = p.origin_x;
        e.split = p.split;
        e.source = source;
        write_png(dir + "/" + e.lr_path, to_unit(p.lr_patch));
        write_png(dir + "/" + e.hr_path, to_unit(p.hr_patch));
        index.push_back(std::move(e));
    }
}

void write_patch_index(const std::string& dir, const std::vector<PatchStoreEntry>& index) {
    CsvTable table;
    table.header = {"lr_path", "hr_path", "page_id",  "dpi",   "shift_index",
                    "origin_y", "origin_x", "split", "source"};
    for (const auto& e : index)
        table.rows.push_back({e.lr_path, e.hr_path, e.page_id, std::to_string(e.dpi),
                              std::to_string(e.shift_index), std::to_string(e.origin_y),
                              std::to_string(e.origin_x), split_name(e.split),
                              source_name(e.source)});
    write_csv(dir + "/index.csv", table);
}

std::vector<PatchStoreEntry> read_patch_index(const std::string& dir) {
    CsvTable table = read_csv(dir + "/index.csv");
    std::vector<PatchStoreEntry> out;
    int c_lr = table.column("lr_path"), c_hr = table.column("hr_path");
    int c_page = table.column("page_id"), c_dpi = table.column("dpi");
    int c_shift = table.column("shift_index");
    int c_oy = table.column("origin_y"), c_ox = table.column("origin_x");
    int c_split = table.column("split"), c_src = table.column("source");
    for (const auto& row : table.rows) {
        PatchStoreEntry e;
        e.lr_path = row[static_cast<size_t>(c_lr)];
        e.hr_path = row[static_cast<size_t>(c_hr)];
        e.page_id = row[static_cast<size_t>(c_page)];
        e.dpi = std::stoi(row[static_cast<size_t>(c_dpi)]);
        e.shift_index = std::stoi(row[static_cast<size_t>(c_shift)]);
        e.origin_y = std::stoi(row[static_cast<size_t>(c_oy)]);
        e.origin_x = std::stoi(row[static_cast<size_t>(c_ox)]);
        e.split = parse_split(row[static_cast<size_t>(c_split)]);
        e.source = parse_source(row[static_cast<size_t>(c_src)]);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace docsr
