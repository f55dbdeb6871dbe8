#include "ratecast/io.hpp"

#include <cstdio>
#include <fstream>

namespace ratecast {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path + " for reading");
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size))
        throw IoError("short read from " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    if (!bytes.empty()) out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    if (!out) throw IoError("short write to " + path);
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::uint64_t hash_file(const std::string& path) { return fnv64(read_file_bytes(path)); }

}  // namespace ratecast
