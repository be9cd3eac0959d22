#include "vaxopt/artifact.hpp"

#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"
#include "vaxopt/errors.hpp"

namespace vaxopt {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw Error("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[digest[k] >> 4];
        out += hex[digest[k] & 15];
    }
    return out;
}

std::string ArtifactFiles::content_hash() const {
    std::string listing;
    for (const auto& [name, bytes] : files) listing += name + '\t' + sha256_hex(bytes) + '\n';
    return sha256_hex(listing);
}

std::string ArtifactFiles::manifest() const {
    nlohmann::ordered_json m;
    m["content_hash"] = content_hash();
    m["files"] = nlohmann::ordered_json::object();
    for (const auto& [name, bytes] : files) m["files"][name] = sha256_hex(bytes);
    return m.dump(2) + '\n';
}

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void check_name(const std::string& name) {
    const fs::path p(name);
    if (name.empty() || p.is_absolute() || name.find("..") != std::string::npos || name == "manifest.json")
        throw InvalidArgument("bad artifact file name '" + name + "'");
}

}  // namespace

void write_artifact(const fs::path& dir, const ArtifactFiles& artifact) {
    for (const auto& [name, bytes] : artifact.files) check_name(name);
    if (fs::exists(dir / "manifest.json")) {
        if (artifact_hash(dir) == artifact.content_hash()) return;
        throw InvalidArgument("a different artifact already exists at " + dir.string());
    }
    if (!dir.parent_path().empty()) fs::create_directories(dir.parent_path());
    std::random_device rd;
    const fs::path tmp = dir.string() + ".tmp-" + std::to_string(rd());
    fs::create_directories(tmp);
    try {
        for (const auto& [name, bytes] : artifact.files) {
            const fs::path p = tmp / name;
            fs::create_directories(p.parent_path());
            std::ofstream out(p, std::ios::binary);
            out << bytes;
            if (!out) throw Error("cannot write " + p.string());
        }
        std::ofstream(tmp / "manifest.json", std::ios::binary) << artifact.manifest();
        std::error_code ec;
        fs::rename(tmp, dir, ec);
        if (ec) {
            // Lost a race with an identical writer, or a stale empty directory is in the way.
            if (fs::exists(dir / "manifest.json") && artifact_hash(dir) == artifact.content_hash()) {
                fs::remove_all(tmp);
                return;
            }
            throw Error("cannot move artifact into " + dir.string() + ": " + ec.message());
        }
    } catch (...) {
        std::error_code ignored;
        fs::remove_all(tmp, ignored);
        throw;
    }
}

ArtifactFiles read_artifact(const fs::path& dir) {
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    ArtifactFiles a;
    for (const auto& [name, digest] : manifest.at("files").items()) {
        check_name(name);
        std::string bytes = slurp(dir / name);
        if (sha256_hex(bytes) != digest.get<std::string>())
            throw InvalidArgument("artifact file " + name + " does not match its digest");
        a.files.emplace(name, std::move(bytes));
    }
    if (a.content_hash() != manifest.at("content_hash").get<std::string>())
        throw InvalidArgument("artifact content hash does not match its files");
    return a;
}

std::string artifact_hash(const fs::path& dir) {
    return nlohmann::json::parse(slurp(dir / "manifest.json")).at("content_hash").get<std::string>();
}

}  // namespace vaxopt
