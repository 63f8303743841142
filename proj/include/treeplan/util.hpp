#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace treeplan {

/// 128-bit hash value. Wide enough that distinct states never collide in
/// practice (state keys, dedup hashes, config hashes all use this).
struct Hash128 {
    uint64_t hi = 0;
    uint64_t lo = 0;

    bool operator==(const Hash128&) const = default;
    std::string hex() const;
};

/// MurmurHash3 x64 128-bit variant.
Hash128 hash128(const void* data, size_t len, uint64_t seed = 0);
Hash128 hash128(std::string_view s, uint64_t seed = 0);

/// Deterministic RNG (splitmix64-seeded xoroshiro128++). All randomized
/// behavior in the engine routes through this so artifacts are reproducible
/// across platforms and standard-library versions.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    /// Uniform integer in [0, n). n must be > 0.
    uint64_t uniform(uint64_t n);
    /// Uniform double in [0, 1).
    double uniform01();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Derive an independent stream, e.g. one per task or iteration.
    Rng fork(uint64_t stream) const;

private:
    uint64_t s0_;
    uint64_t s1_;
};

std::string read_text_file(const std::string& path);
/// Write via temp file + rename so readers never observe partial content.
void write_text_file_atomic(const std::string& path, std::string_view content);
bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

std::vector<std::string> split_ws(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Unix time used in artifact manifests. Honors SOURCE_DATE_EPOCH so runs
/// can be made byte-reproducible.
int64_t manifest_timestamp();

}  // namespace treeplan
