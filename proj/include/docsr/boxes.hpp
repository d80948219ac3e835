#pragma once

#include <vector>

#include "docsr/errors.hpp"

namespace docsr {

// Axis-aligned rectangle in pixel units, half-open [x0,x1) x [y0,y1).
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double score = 1.0;
};

struct BoxSet {
    std::vector<Box> boxes;
    int width = 0, height = 0;

    void validate() const {
        for (const auto& b : boxes) {
            if (!(b.x0 < b.x1) || !(b.y0 < b.y1)) throw ContractError("box: empty extent");
            if (b.x0 < 0 || b.y0 < 0 || b.x1 > width || b.y1 > height)
                throw ContractError("box: outside image bounds");
        }
    }
};

}  // namespace docsr
