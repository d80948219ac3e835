#include "docsr/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <vector>

namespace docsr {
namespace {

constexpr char kMagic[8] = {'D', 'S', 'R', 'C', 'K', 'P', 'T', '1'};

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> table{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

void put_f32(std::vector<unsigned char>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const unsigned char* p;
    size_t n;
    size_t pos = 0;
    uint32_t u32() {
        if (pos + 4 > n) throw IoError("checkpoint: truncated");
        uint32_t v = static_cast<uint32_t>(p[pos]) | (static_cast<uint32_t>(p[pos + 1]) << 8) |
                     (static_cast<uint32_t>(p[pos + 2]) << 16) |
                     (static_cast<uint32_t>(p[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(size_t len) {
        if (pos + len > n) throw IoError("checkpoint: truncated");
        std::string s(reinterpret_cast<const char*>(p + pos), len);
        pos += len;
        return s;
    }
};

}  // namespace

uint32_t crc32_bytes(const void* data, size_t len, uint32_t seed) {
    static const std::array<uint32_t, 256> table = make_crc_table();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    const unsigned char* b = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) c = table[(c ^ b[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::vector<unsigned char> payload;
    std::string cfg = ckpt.config.to_text();
    put_u32(payload, static_cast<uint32_t>(cfg.size()));
    payload.insert(payload.end(), cfg.begin(), cfg.end());
    put_u32(payload, static_cast<uint32_t>(ckpt.params.count()));
    for (size_t i = 0; i < ckpt.params.count(); ++i) {
        const std::string& name = ckpt.params.name(i);
        const Tensor& t = ckpt.params.tensor(i);
        put_u32(payload, static_cast<uint32_t>(name.size()));
        payload.insert(payload.end(), name.begin(), name.end());
        put_u32(payload, static_cast<uint32_t>(t.rank()));
        for (int d = 0; d < t.rank(); ++d) put_u32(payload, static_cast<uint32_t>(t.dim(d)));
        for (int64_t k = 0; k < t.size(); ++k) put_f32(payload, static_cast<float>(t[k]));
    }
    uint32_t crc = crc32_bytes(payload.data(), payload.size());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    std::vector<unsigned char> trailer;
    put_u32(trailer, crc);
    out.write(reinterpret_cast<const char*>(trailer.data()), 4);
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw IoError("not a checkpoint file: " + path);

    size_t payload_len = bytes.size() - 12;
    uint32_t stored_crc = static_cast<uint32_t>(bytes[bytes.size() - 4]) << 0 |
                          static_cast<uint32_t>(bytes[bytes.size() - 3]) << 8 |
                          static_cast<uint32_t>(bytes[bytes.size() - 2]) << 16 |
                          static_cast<uint32_t>(bytes[bytes.size() - 1]) << 24;
    uint32_t crc = crc32_bytes(bytes.data() + 8, payload_len);
    if (crc != stored_crc) throw IoError("checkpoint checksum mismatch: " + path);

    Reader r{bytes.data() + 8, payload_len};
    Checkpoint ckpt;
    uint32_t cfg_len = r.u32();
    ckpt.config = Config::parse_text(r.str(cfg_len));
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        uint32_t rank = r.u32();
        std::vector<int> shape;
        for (uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32()));
        Tensor t(shape);
        for (int64_t k = 0; k < t.size(); ++k) t[k] = static_cast<double>(r.f32());
        ckpt.params.add(name, std::move(t));
    }
    return ckpt;
}

}  // namespace docsr
