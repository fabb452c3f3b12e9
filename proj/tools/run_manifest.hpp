#pragma once

// Run manifests and small helpers shared by the dvpool subcommands.

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dvpool/dvpool.hpp"
#include "dvpool/json_io.hpp"

namespace dvpool::cli {

namespace fs = std::filesystem;

inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw IoError("sha256 failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

/// --threads wins, then DVPOOL_THREADS, then the hardware count.
inline unsigned resolve_threads(int flag) {
    if (flag > 0) return static_cast<unsigned>(flag);
    if (const char* env = std::getenv("DVPOOL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
        throw ContractViolation("DVPOOL_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline Json read_json_file(const fs::path& path) {
    const auto bytes = read_file(path);
    try {
        return Json::parse(bytes.begin(), bytes.end());
    } catch (const Json::parse_error& e) {
        throw IoError(path.string() + ": invalid JSON: " + e.what());
    }
}

inline void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// Collects what a single CLI invocation read and wrote, then emits one
/// manifest JSON at the end of a successful run.
class RunManifest {
public:
    explicit RunManifest(std::string command)
        : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

    void set_config(Json config) { config_ = std::move(config); }

    void add_input(const fs::path& path) {
        inputs_.push_back(Json{{"path", path.string()}, {"sha256", sha256_hex(read_file(path))}});
    }

    /// Writes, reads back and compares before recording the output.
    void write_output(const fs::path& path, std::span<const std::uint8_t> bytes) {
        write_file(path, bytes);
        const auto back = read_file(path);
        if (back.size() != bytes.size() || !std::equal(back.begin(), back.end(), bytes.begin()))
            throw IoError("verification of " + path.string() + " failed");
        outputs_.push_back(path.string());
    }

    void write_npy_output(const fs::path& path, const NpyArray& a) {
        const auto bytes = write_npy(a);
        write_output(path, bytes);
        if (!(read_npy(read_file(path)) == a)) throw IoError("npy round trip failed for " + path.string());
    }

    void write_json_output(const fs::path& path, const Json& j) {
        const std::string text = j.dump(2) + "\n";
        write_output(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                         text.size()));
    }

    void finish(const fs::path& manifest_path) const {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        const Json j{{"command", command_},     {"config", config_},
                     {"inputs", inputs_},       {"outputs", outputs_},
                     {"wall_time_s", wall},     {"timestamp", utc_timestamp()},
                     {"version", kVersion}};
        write_text(manifest_path, j.dump(2) + "\n");
    }

private:
    std::string command_;
    Json config_ = Json::object();
    Json inputs_ = Json::array();
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace dvpool::cli
