#pragma once

// Run manifest: content hashes of inputs, every parameter, tool and library
// versions. No timestamps or hostnames, so identical runs give identical bytes.

#include <openssl/evp.h>

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace downscale {

inline constexpr const char* kVersion = "1.0.0";

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string() + " for hashing");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest initialisation failed");
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), std::streamsize(buf.size()));
        if (in.gcount() > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), std::size_t(in.gcount())) != 1)
            throw std::runtime_error("sha256: digest update failed");
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) throw std::runtime_error("sha256: digest finalisation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

class Manifest {
public:
    explicit Manifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

    /// Hashes the file at call time.
    void add_input(const std::filesystem::path& path) {
        inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
    }
    void add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }
    void set(const std::string& key, nlohmann::json value) { params_[key] = std::move(value); }

    nlohmann::json json() const {
        return {{"tool", "downscale"},
                {"version", kVersion},
                {"subcommand", subcommand_},
                {"parameters", params_},
                {"inputs", inputs_},
                {"outputs", outputs_},
                {"libraries",
                 {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                  {"compiler", __VERSION__}}}};
    }

    void write(const std::filesystem::path& path) const { std::ofstream(path) << json().dump(2) << "\n"; }

private:
    std::string subcommand_;
    nlohmann::json params_ = nlohmann::json::object();
    nlohmann::json inputs_ = nlohmann::json::array();
    std::vector<std::string> outputs_;
};

}  // namespace downscale
