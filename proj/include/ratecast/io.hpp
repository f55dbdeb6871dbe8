#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "ratecast/errors.hpp"

namespace ratecast {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

// FNV-1a, used as the content hash in run manifests and config fingerprints.
inline std::uint64_t fnv64(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 0x100000001b3ULL;
    return h;
}
inline std::uint64_t fnv64(const std::vector<std::uint8_t>& bytes) {
    return fnv64(bytes.data(), bytes.size());
}
inline std::uint64_t fnv64(const std::string& s) { return fnv64(s.data(), s.size()); }

std::string hash_hex(std::uint64_t h);
std::uint64_t hash_file(const std::string& path);

class BinWriter {
public:
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }
    void magic(const char tag[5]) { raw(tag, 4); }
    void str(const std::string& s) {
        u32(std::uint32_t(s.size()));
        raw(s.data(), s.size());
    }
    void f32_array(const float* data, std::size_t n) { raw(data, n * 4); }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class BinReader {
public:
    explicit BinReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint32_t u32() { return scalar<std::uint32_t>(); }
    std::uint64_t u64() { return scalar<std::uint64_t>(); }
    float f32() { return scalar<float>(); }
    double f64() { return scalar<double>(); }
    void expect_magic(const char tag[5]) {
        char got[5] = {0, 0, 0, 0, 0};
        raw(got, 4);
        if (std::memcmp(got, tag, 4) != 0)
            throw IoError(std::string("bad magic, expected '") + tag + "' got '" + got + "'");
    }
    std::string str() {
        const std::uint32_t n = u32();
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    void f32_array(float* data, std::size_t n) { raw(data, n * 4); }
    void raw(void* out, std::size_t n) {
        if (pos_ + n > bytes_.size()) throw IoError("truncated input");
        std::memcpy(out, bytes_.data() + pos_, n);
        pos_ += n;
    }
    bool at_end() const { return pos_ == bytes_.size(); }
    std::size_t position() const { return pos_; }

private:
    template <typename T>
    T scalar() {
        T v;
        raw(&v, sizeof(T));
        return v;
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace ratecast
