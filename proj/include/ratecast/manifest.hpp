// Every artifact-producing command drops one manifest next to its outputs:
// the subcommand, the fully resolved configuration, seeds, format versions,
// and content hashes of every input and output file. A run is reproducible
// from its manifest alone.
#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <json.hpp>

#include "ratecast/io.hpp"

namespace ratecast {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kFormatVersion = 1;

class RunManifest {
public:
    explicit RunManifest(std::string command) : start_(std::chrono::steady_clock::now()) {
        doc_["command"] = std::move(command);
        doc_["tool_version"] = kToolVersion;
        doc_["format_version"] = kFormatVersion;
        doc_["inputs"] = nlohmann::json::object();
        doc_["outputs"] = nlohmann::json::object();
    }

    void set_config(nlohmann::json config) { doc_["config"] = std::move(config); }
    void set_seed(std::uint64_t seed) { doc_["seed"] = hash_hex(seed); }

    void add_input(const std::string& path) { doc_["inputs"][path] = hash_hex(hash_file(path)); }
    void add_output(const std::string& path) { doc_["outputs"][path] = hash_hex(hash_file(path)); }

    void write(const std::string& path) {
        const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                           start_)
                                 .count();
        doc_["wall_seconds"] = elapsed;
        const std::string text = doc_.dump(2) + "\n";
        write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
    }

    const nlohmann::json& doc() const { return doc_; }

private:
    nlohmann::json doc_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace ratecast
