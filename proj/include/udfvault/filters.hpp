#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "udfvault/buffer.hpp"

namespace udfvault::filters {

/// Filter ids are part of the container format and never change.
enum class FilterId : std::uint32_t {
    Shuffle = 1,
    Deflate = 2,
    Udf = 500,
};

struct FilterSpec {
    FilterId id;
    std::vector<std::int64_t> params;

    friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

using FilterChain = std::vector<FilterSpec>;

/// Optional second deflate parameter. Only the encoder looks at it; every
/// strategy produces a plain raw deflate stream.
enum class DeflateStrategy : std::int64_t {
    Default = 0,
    HuffmanOnly = 1,
    Rle = 2,
};

FilterSpec shuffle(std::size_t element_size);
/// Default strategy keeps the single-parameter form.
FilterSpec deflate(int level = 6, DeflateStrategy strategy = DeflateStrategy::Default);
FilterSpec udf();

bool is_known_filter(std::uint32_t id) noexcept;
bool contains_udf(const FilterChain& chain) noexcept;

/// Throws UnknownFilter for ids outside the registry and FilterFailure for
/// duplicate ids, bad parameters, or a UDF filter sharing the chain.
void validate_chain(const FilterChain& chain);

/// Applies the chain left to right.
Bytes apply_write_chain(const FilterChain& chain, std::span<const std::uint8_t> bytes);
/// Applies inverses right to left; the result must be exactly `expected_len` bytes.
Bytes apply_read_chain(const FilterChain& chain, std::span<const std::uint8_t> bytes, std::size_t expected_len);

// Individual transforms, exposed for tests.
Bytes shuffle_bytes(std::span<const std::uint8_t> in, std::size_t element_size);
Bytes unshuffle_bytes(std::span<const std::uint8_t> in, std::size_t element_size);
Bytes deflate_bytes(std::span<const std::uint8_t> in, int level, DeflateStrategy strategy = DeflateStrategy::Default);
/// Raw inflate producing at most `max_len` bytes; longer output is a LengthMismatch.
Bytes inflate_bytes(std::span<const std::uint8_t> in, std::size_t max_len);

} // namespace udfvault::filters
