#pragma once

// Storage and read-time comparison of precomputed grids against UDF datasets
// that compute the same values on read.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "udfvault/container.hpp"
#include "udfvault/filters.hpp"

namespace udfvault::bench {

/// SplitMix64: advances `state` and returns the next output.
std::uint64_t splitmix64_next(std::uint64_t& state) noexcept;

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;

inline constexpr std::uint64_t kDefaultSeed = 42;

struct Bands {
    std::uint64_t n = 0;
    std::vector<std::int16_t> red; // Band4
    std::vector<std::int16_t> nir; // Band5
};

/// One SplitMix64 stream per seed: the first N*N outputs fill Red, the next
/// N*N fill NIR, each mapped to 1 + (z mod 10000).
Bands generate_bands(std::uint64_t n, std::uint64_t seed = kDefaultSeed);
/// /Band4 (Red) and /Band5 (NIR) as int16 N x N contiguous datasets.
void write_bands(Container& container, const Bands& bands);
void gen_bands(Container& container, std::uint64_t n, std::uint64_t seed = kDefaultSeed);

/// The expressions the UDF datasets carry, and their direct counterparts.
inline constexpr std::string_view kNdviExpr = "(nir - red) / (nir + red)";
inline constexpr std::string_view kGridExpr = "10000 * (nir - red) / (nir + red)";
double ndvi(std::int16_t nir, std::int16_t red) noexcept;
std::int32_t grid_value(std::int16_t nir, std::int16_t red) noexcept;

struct BenchRow {
    std::string scenario;
    std::uint64_t n = 0;
    std::string layout;
    std::uint64_t stored_bytes = 0;
    std::uint64_t wall_time_ns = 0;
    std::uint64_t checksum = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    /// Value-equivalence failures; empty when every check passed.
    std::vector<std::string> mismatches;

    std::string to_csv() const;
    const BenchRow* find(std::string_view scenario, std::uint64_t n, std::string_view layout) const;
};

struct BenchConfig {
    std::vector<std::uint64_t> sizes{1000, 2000, 4000, 8000, 16000};
    /// Sizes above this are skipped; 0 = no cap.
    std::uint64_t max_n = 0;
    std::uint64_t seed = kDefaultSeed;
    /// Columns per chunk of the compressed reference; chunks span all N rows.
    std::uint64_t chunk_cols = 100;
    int deflate_level = 1;
    /// Huffman-only suits the shuffled byte planes of these grids: the high
    /// planes are near constant and the low ones are noise without repeats.
    filters::DeflateStrategy deflate_strategy = filters::DeflateStrategy::HuffmanOnly;
    std::filesystem::path scratch_dir;
    bool keep_files = false;
    /// Progress lines, or null.
    std::ostream* log = nullptr;
};

/// Shape of one compressed-reference chunk for an N x N grid.
Shape chunk_shape(std::uint64_t n, std::uint64_t chunk_cols);

/// Bytes of scratch space a run at size `n` needs at its peak.
std::uint64_t scratch_bytes_needed(std::uint64_t n) noexcept;

/// Per N: bands, a precomputed int32 grid stored contiguous and chunked with
/// shuffle+deflate, a precomputed float64 NDVI, and UDF datasets computing
/// both. Every dataset is read back from a freshly opened container and timed.
/// Throws InsufficientSpace before writing anything when scratch is short.
BenchReport run_bench(const BenchConfig& config);

} // namespace udfvault::bench
