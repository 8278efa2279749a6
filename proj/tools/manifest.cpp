#include "manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>

#include "simgat/parallel.hpp"

namespace simgat::cli {

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
        if (!in) break;
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

Manifest::Manifest(std::string subcommand, std::vector<std::string> argv)
    : subcommand_(std::move(subcommand)), argv_(std::move(argv)) {}

io::Json Manifest::to_json() const {
    io::Json j;
    j["tool"] = "simgat";
    j["version"] = SIMGAT_VERSION;
    j["subcommand"] = subcommand_;
    j["argv"] = argv_;
    j["seed"] = seed_ ? io::Json(*seed_) : io::Json(nullptr);
    j["config"] = config_;
    j["inputs"] = io::Json::array();
    for (const auto& p : inputs_) j["inputs"].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    j["outputs"] = io::Json::array();
    for (const auto& p : outputs_) j["outputs"].push_back(p.string());
    j["threads"] = default_threads();
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return j;
}

void Manifest::write(const fs::path& path) const { io::write_json(path, to_json()); }

}  // namespace simgat::cli
