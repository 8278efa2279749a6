#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "simgat/io.hpp"

namespace simgat::cli {

namespace fs = std::filesystem;

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

/// Provenance record written next to every run's outputs.
class Manifest {
public:
    explicit Manifest(std::string subcommand, std::vector<std::string> argv);

    void input(const fs::path& path) { inputs_.push_back(path); }
    void output(const fs::path& path) { outputs_.push_back(path); }
    void seed(std::uint64_t s) { seed_ = s; }
    io::Json& config() { return config_; }

    /// Hashes inputs at call time and stamps the elapsed wall time.
    io::Json to_json() const;
    void write(const fs::path& path) const;

private:
    std::string subcommand_;
    std::vector<std::string> argv_;
    std::vector<fs::path> inputs_;
    std::vector<fs::path> outputs_;
    std::optional<std::uint64_t> seed_;
    io::Json config_ = io::Json::object();
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace simgat::cli
