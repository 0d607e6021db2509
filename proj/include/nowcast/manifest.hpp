#pragma once

#include <string>
#include <vector>

namespace nowcast {

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_file(const std::string& path);

// Run provenance: every produced artifact traces back to one of these.
struct RunManifest {
    std::string command;
    std::vector<std::string> arguments;
    std::uint64_t seed = 0;
    std::string tool_version;
    std::string created_at;  // ISO 8601 UTC

    struct Artifact {
        std::string path;
        std::string sha256;
    };
    std::vector<Artifact> artifacts;

    void add_artifact(const std::string& path);
    void save(const std::string& path) const;
};

// Exclusive-use marker for an output directory; throws if already locked.
class DirLock {
public:
    explicit DirLock(const std::string& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::string path_;
};

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace nowcast
