#pragma once

// Run artifacts: a directory of JSON and CSV files plus a manifest of their SHA-256 digests.
// The content hash is the digest of the manifest's file list, so it covers every payload byte.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace vaxopt {

std::string sha256_hex(std::string_view bytes);

struct ArtifactFiles {
    std::map<std::string, std::string> files;  // relative name -> contents

    /// sha256 over "name\tdigest\n" lines in name order.
    std::string content_hash() const;
    /// {"content_hash": ..., "files": {name: digest}}, pretty-printed.
    std::string manifest() const;
};

/// Writes into `dir` through a sibling temporary directory and a rename, so a reader never
/// sees a half-written artifact. An existing artifact with the same content hash is left as is;
/// a different one is an error.
void write_artifact(const std::filesystem::path& dir, const ArtifactFiles& artifact);

/// Reads every file listed in the manifest and checks the digests and the content hash.
ArtifactFiles read_artifact(const std::filesystem::path& dir);

/// Content hash recorded in the manifest, without reading the payload files.
std::string artifact_hash(const std::filesystem::path& dir);

}  // namespace vaxopt
