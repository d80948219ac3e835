#pragma once

#include <string>

#include "docsr/boxes.hpp"
#include "docsr/datasets.hpp"

namespace docsr {

// Synthetic document pages: paper-toned background with mild noise,
// horizontal runs of dark glyph-like rectangles as text lines (plus an
// occasional colored rule so the hue losses see saturated pixels), and
// ground-truth line boxes. Deterministic under seed. These stand in for
// the scan corpora in every property and acceptance test.
struct SyntheticPage {
    Image hr;             // unit range {3,S,S}
    BoxSet glyph_boxes;   // one box per rendered text line
    uint64_t seed = 0;
    double background_mean = 0.0;
};

SyntheticPage generate_page(uint64_t seed, int size, double density);

// LR/HR pair with a known relative shift: the LR is simulated from a
// window displaced by (shift_y, shift_x), so estimate_translation should
// recover (expected_ty, expected_tx) = (-shift_y, -shift_x).
struct PairWithTruth {
    RegisteredPair pair;
    int expected_ty = 0;
    int expected_tx = 0;
};

PairWithTruth make_pair(const SyntheticPage& page, int shift_y, int shift_x, int scale = 4);

// Writes a multi-page, multi-shift synthetic corpus in the manifest/PNG
// layout the datasets module consumes: per page and shift index, an HR
// scan (dpi 300) and an LR scan (dpi 75) displaced by a fixed device
// offset, so registration recovers one consistent translation. Returns
// the manifest path.
std::string write_synthetic_corpus(const std::string& dir, int pages, int hr_size,
                                   uint64_t seed);

// The device offset baked into write_synthetic_corpus, in HR pixels (the
// translation estimate_translation should report).
inline constexpr int kCorpusDeviceShiftY = -5;
inline constexpr int kCorpusDeviceShiftX = -1;

}  // namespace docsr
