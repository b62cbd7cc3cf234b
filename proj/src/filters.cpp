#include "udfvault/filters.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <string>

#include <zlib.h>

#include "udfvault/error.hpp"

namespace udfvault::filters {

FilterSpec shuffle(std::size_t element_size)
{
    return {FilterId::Shuffle, {static_cast<std::int64_t>(element_size)}};
}

FilterSpec deflate(int level, DeflateStrategy strategy)
{
    if (strategy == DeflateStrategy::Default)
        return {FilterId::Deflate, {level}};
    return {FilterId::Deflate, {level, static_cast<std::int64_t>(strategy)}};
}

FilterSpec udf()
{
    return {FilterId::Udf, {}};
}

bool is_known_filter(std::uint32_t id) noexcept
{
    return id == 1 || id == 2 || id == 500;
}

bool contains_udf(const FilterChain& chain) noexcept
{
    return std::any_of(chain.begin(), chain.end(), [](const FilterSpec& f) { return f.id == FilterId::Udf; });
}

void validate_chain(const FilterChain& chain)
{
    std::set<std::uint32_t> seen;
    for (const auto& f : chain) {
        auto raw = static_cast<std::uint32_t>(f.id);
        if (!is_known_filter(raw))
            fail(Errc::UnknownFilter, "unknown filter id " + std::to_string(raw));
        if (!seen.insert(raw).second)
            fail(Errc::FilterFailure, "filter id " + std::to_string(raw) + " appears twice in chain");
        switch (f.id) {
        case FilterId::Shuffle:
            if (f.params.size() != 1 || f.params[0] < 1)
                fail(Errc::FilterFailure, "shuffle needs one positive element-size parameter");
            break;
        case FilterId::Deflate:
            if (f.params.empty() || f.params.size() > 2 || f.params[0] < 1 || f.params[0] > 9)
                fail(Errc::FilterFailure, "deflate needs a level parameter in 1..9");
            if (f.params.size() == 2 && (f.params[1] < 0 || f.params[1] > 2))
                fail(Errc::FilterFailure, "deflate strategy must be 0, 1 or 2");
            break;
        case FilterId::Udf:
            if (!f.params.empty() || chain.size() != 1)
                fail(Errc::FilterFailure, "UDF filter takes no parameters and must be alone in its chain");
            break;
        }
    }
}

// Byte-plane transpose: byte j of element i moves to plane j, slot i.
// Trailing bytes that do not fill an element are copied unchanged.
Bytes shuffle_bytes(std::span<const std::uint8_t> in, std::size_t element_size)
{
    Bytes out(in.begin(), in.end());
    if (element_size <= 1)
        return out;
    const std::size_t count = in.size() / element_size;
    for (std::size_t j = 0; j < element_size; ++j) {
        auto* plane = out.data() + j * count;
        for (std::size_t i = 0; i < count; ++i)
            plane[i] = in[i * element_size + j];
    }
    return out;
}

Bytes unshuffle_bytes(std::span<const std::uint8_t> in, std::size_t element_size)
{
    Bytes out(in.begin(), in.end());
    if (element_size <= 1)
        return out;
    const std::size_t count = in.size() / element_size;
    for (std::size_t j = 0; j < element_size; ++j) {
        const auto* plane = in.data() + j * count;
        for (std::size_t i = 0; i < count; ++i)
            out[i * element_size + j] = plane[i];
    }
    return out;
}

namespace {

constexpr std::size_t kZlibStep = std::numeric_limits<uInt>::max() / 2;

} // namespace

Bytes deflate_bytes(std::span<const std::uint8_t> in, int level, DeflateStrategy strategy)
{
    const int zstrategy = strategy == DeflateStrategy::HuffmanOnly ? Z_HUFFMAN_ONLY
                          : strategy == DeflateStrategy::Rle       ? Z_RLE
                                                                   : Z_DEFAULT_STRATEGY;
    z_stream zs{};
    // Negative window bits select raw deflate (RFC 1951) with no zlib wrapper.
    if (deflateInit2(&zs, level, Z_DEFLATED, -15, 8, zstrategy) != Z_OK)
        fail(Errc::FilterFailure, "deflateInit2 failed");

    Bytes out(deflateBound(&zs, static_cast<uLong>(in.size())));
    std::size_t in_pos = 0;
    int rc = Z_OK;
    do {
        if (zs.avail_in == 0 && in_pos < in.size()) {
            auto n = std::min(kZlibStep, in.size() - in_pos);
            zs.next_in = const_cast<Bytef*>(in.data() + in_pos);
            zs.avail_in = static_cast<uInt>(n);
            in_pos += n;
        }
        if (zs.total_out == out.size())
            out.resize(out.size() * 2 + 64);
        zs.next_out = out.data() + zs.total_out;
        zs.avail_out = static_cast<uInt>(std::min(kZlibStep, out.size() - zs.total_out));
        rc = ::deflate(&zs, in_pos == in.size() ? Z_FINISH : Z_NO_FLUSH);
        if (rc == Z_STREAM_ERROR) {
            deflateEnd(&zs);
            fail(Errc::FilterFailure, "deflate stream error");
        }
    } while (rc != Z_STREAM_END);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

Bytes inflate_bytes(std::span<const std::uint8_t> in, std::size_t max_len)
{
    z_stream zs{};
    if (inflateInit2(&zs, -15) != Z_OK)
        fail(Errc::FilterFailure, "inflateInit2 failed");

    // One spare byte detects streams that decode past the expected length.
    Bytes out(max_len + 1);
    std::size_t in_pos = 0;
    int rc = Z_OK;
    while (true) {
        if (zs.avail_in == 0 && in_pos < in.size()) {
            auto n = std::min(kZlibStep, in.size() - in_pos);
            zs.next_in = const_cast<Bytef*>(in.data() + in_pos);
            zs.avail_in = static_cast<uInt>(n);
            in_pos += n;
        }
        zs.next_out = out.data() + zs.total_out;
        zs.avail_out = static_cast<uInt>(std::min(kZlibStep, out.size() - zs.total_out));
        rc = ::inflate(&zs, Z_NO_FLUSH);
        if (rc == Z_STREAM_END)
            break;
        if (rc == Z_DATA_ERROR || rc == Z_NEED_DICT || rc == Z_MEM_ERROR) {
            inflateEnd(&zs);
            fail(Errc::CorruptStream, "invalid deflate stream");
        }
        if (zs.total_out == out.size()) {
            inflateEnd(&zs);
            fail(Errc::LengthMismatch, "inflated data exceeds expected " + std::to_string(max_len) + " bytes");
        }
        if (rc == Z_BUF_ERROR && zs.avail_in == 0 && in_pos == in.size()) {
            inflateEnd(&zs);
            fail(Errc::CorruptStream, "truncated deflate stream");
        }
    }
    const bool trailing = zs.avail_in != 0 || in_pos != in.size();
    const auto produced = zs.total_out;
    inflateEnd(&zs);
    if (trailing)
        fail(Errc::CorruptStream, "trailing bytes after deflate stream");
    if (produced > max_len)
        fail(Errc::LengthMismatch, "inflated data exceeds expected " + std::to_string(max_len) + " bytes");
    out.resize(produced);
    return out;
}

Bytes apply_write_chain(const FilterChain& chain, std::span<const std::uint8_t> bytes)
{
    validate_chain(chain);
    Bytes data(bytes.begin(), bytes.end());
    for (const auto& f : chain) {
        switch (f.id) {
        case FilterId::Shuffle:
            data = shuffle_bytes(data, static_cast<std::size_t>(f.params[0]));
            break;
        case FilterId::Deflate:
            data = deflate_bytes(data, static_cast<int>(f.params[0]),
                                 f.params.size() == 2 ? static_cast<DeflateStrategy>(f.params[1]) : DeflateStrategy::Default);
            break;
        case FilterId::Udf:
            // The payload is produced by the UDF engine; storage passes it through.
            break;
        }
    }
    return data;
}

Bytes apply_read_chain(const FilterChain& chain, std::span<const std::uint8_t> bytes, std::size_t expected_len)
{
    validate_chain(chain);
    Bytes data(bytes.begin(), bytes.end());
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        switch (it->id) {
        case FilterId::Shuffle:
            data = unshuffle_bytes(data, static_cast<std::size_t>(it->params[0]));
            break;
        case FilterId::Deflate:
            // Every other registered filter preserves length, so the inflated
            // size is bounded by the final expected length.
            data = inflate_bytes(data, expected_len);
            break;
        case FilterId::Udf:
            break;
        }
    }
    if (data.size() != expected_len)
        fail(Errc::LengthMismatch, "filter chain produced " + std::to_string(data.size()) + " bytes, expected " +
                                       std::to_string(expected_len));
    return data;
}

} // namespace udfvault::filters
