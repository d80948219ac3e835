#pragma once

#include <string>

#include "docsr/config.hpp"
#include "docsr/params.hpp"

namespace docsr {

// Single-file parameter archive: magic + plain-text config block + named
// tensors (shape header, little-endian float32 payload) + CRC32 trailer.
// Generator and supervisor weights share this format.
struct Checkpoint {
    Config config;
    ParamStore params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

uint32_t crc32_bytes(const void* data, size_t len, uint32_t seed = 0);

}  // namespace docsr
