#pragma once

#include <string>

#include "docsr/image.hpp"

namespace docsr {

// PNG input/output. Reads 8- and 16-bit gray/RGB/RGBA (alpha dropped)
// into unit-range images; writes 8-bit RGB/gray.
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& unit_image);

}  // namespace docsr
