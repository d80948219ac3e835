#pragma once

#include <array>
#include <string>
#include <vector>

#include "docsr/image.hpp"

namespace docsr {

inline constexpr std::array<int, 5> kSupportedDpi = {75, 150, 200, 300, 600};

struct ScanRecord {
    std::string path;
    std::string page_id;
    int dpi = 0;
    int shift_index = 0;  // 0 = zero-shift scan
    std::string corpus;   // bulletin/article train+val; anything else is test
};

enum class Split { Train, Val, Test };
enum class PairSource { Real, Simulated };

struct RegisteredPair {
    Image lr;  // unit range
    Image hr;  // unit range, dims exactly 4x lr
    int translation_y = 0;  // HR pixels, aligns upsampled LR onto HR
    int translation_x = 0;
    int scale = 4;
    PairSource source = PairSource::Real;
};

struct PatchPair {
    Image lr_patch;  // {3, P, P}
    Image hr_patch;  // {3, 4P, 4P}
    int origin_y = 0;  // LR-grid coordinates
    int origin_x = 0;
    Split split = Split::Train;
};

// ---- manifest & splits --------------------------------------------------

// Plain-text table: path, page_id, dpi, shift_index, corpus.
std::vector<ScanRecord> load_manifest(const std::string& path);

struct SplitResult {
    std::vector<ScanRecord> train, val, test;
    std::vector<std::string> warnings;
};

SplitResult split_dataset(const std::vector<ScanRecord>& records);

// ---- registration -------------------------------------------------------

struct TranslationEstimate {
    int dy = 0, dx = 0;
    double score = 0.0;  // central-crop MSE at the chosen shift
};

// Bicubically upsamples LR 4x, then searches integer shifts minimizing the
// central-crop MSE against HR: `samples` uniform draws within `radius`,
// then greedy exhaustive 3x3 refinement from the best draw. Deterministic
// under seed.
TranslationEstimate estimate_translation(const Image& lr, const Image& hr, int margin,
                                         int radius, int samples, uint64_t seed);

// Integer index roll with border crop (a translation realized as a crop of
// the valid region). Output dims shrink by |dy| x |dx|.
Image translate_image(const Image& img, int dy, int dx);

// Crops LR and HR to the aligned common region under the pair's
// translation (4-aligned, exact ratio preserved).
RegisteredPair apply_translation(const RegisteredPair& pair);

// ---- patches & simulation -------------------------------------------------

// Grid tiling with stride = patch size on the LR; the last row/column is
// clamped to end at the border (duplicate origins deduplicated). HR
// patches cut at 4x coordinates.
std::vector<PatchPair> extract_patches(const RegisteredPair& pair, int lr_patch = 256);

// Bicubic downsample by `scale` with the shared resampler (identical to
// the consistency loss's downsampling path).
Image simulate_lr(const Image& hr, int scale = 4);

// ---- phase-correlation tile alignment -------------------------------------

struct TileShift {
    int tile_y = 0, tile_x = 0;  // tile origin in pixels
    int dy = 0, dx = 0;
    double peak = 0.0;
    bool flat = false;       // skipped (zero-variance), shift inherited
    bool inherited = false;
};

struct TileAlignResult {
    Image aligned;
    std::vector<TileShift> report;
};

// Per-tile integer shifts via the phase-correlation peak, re-assembled
// with feathered overlap blending.
TileAlignResult align_tiles_phase_correlation(const Image& scan, const Image& reference,
                                              int tile = 512);

// ---- patch store -----------------------------------------------------------

struct PatchStoreEntry {
    std::string lr_path, hr_path;
    std::string page_id;
    int dpi = 0, shift_index = 0;
    int origin_y = 0, origin_x = 0;
    Split split = Split::Train;
    PairSource source = PairSource::Real;
};

std::string split_name(Split s);
Split parse_split(const std::string& s);
std::string source_name(PairSource s);
PairSource parse_source(const std::string& s);

// Writes `<page>_<dpi>_<shift>_<y>_<x>_{lr,hr}.png` pairs plus index.csv.
void write_patch_store(const std::string& dir, const std::string& page_id, int dpi,
                       int shift_index, PairSource source,
                       const std::vector<PatchPair>& patches,
                       std::vector<PatchStoreEntry>& index);
void write_patch_index(const std::string& dir, const std::vector<PatchStoreEntry>& index);
std::vector<PatchStoreEntry> read_patch_index(const std::string& dir);

}  // namespace docsr
