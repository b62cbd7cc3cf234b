#pragma once

// SDC1: a small self-describing hierarchical container.
//
//   offset 0        "SDC1" + u16 format version
//   offset 6        data region (chunk records, in write order)
//   index_offset    serialized index (canonical JSON)
//   tail - 12       u64 index_offset + "SDC1"
//
// All integers are little-endian. The index is rewritten at the end of the
// data region after every mutation, so a truncated write is detectable from
// the footer.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "udfvault/buffer.hpp"
#include "udfvault/dtype.hpp"
#include "udfvault/filters.hpp"

namespace udfvault {

inline constexpr std::string_view kContainerMagic = "SDC1";
inline constexpr std::uint16_t kContainerVersion = 1;

enum class Layout { Contiguous, Chunked };

struct ChunkRecord {
    std::uint64_t file_offset = 0;
    std::uint64_t stored_length = 0;
    /// Unfiltered length; differs from extent x element size only when the chunk carries a string heap.
    std::uint64_t raw_length = 0;

    friend bool operator==(const ChunkRecord&, const ChunkRecord&) = default;
};

struct DatasetMeta {
    std::string path;
    DType dtype;
    Shape shape;
    Layout layout = Layout::Contiguous;
    Shape chunk_shape;
    filters::FilterChain filters;
    /// Filled in by the container; one entry for contiguous layouts.
    std::vector<ChunkRecord> chunks;

    bool is_udf() const noexcept { return filters::contains_udf(filters); }
    std::uint64_t stored_bytes() const noexcept;

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

using AttributeValue = std::variant<std::int64_t, double, std::string, std::vector<double>>;

enum class EntryKind { Group, Dataset };

struct ListEntry {
    std::string path;
    EntryKind kind;
    std::optional<DatasetMeta> meta;
};

/// Absolute, slash-separated, no empty/"."/".." components. "a/b" becomes "/a/b".
std::string normalize_path(std::string_view path);
std::string parent_path(std::string_view normalized);

/// Row-major chunk tiling of `shape`; edge chunks are clipped to the extent.
struct ChunkTile {
    Shape origin;
    Shape extent;
};
std::vector<ChunkTile> chunk_tiles(const Shape& shape, const Shape& chunk_shape);

class Container;

/// Produces the values of a UDF dataset; installed by the UDF engine.
using UdfDecoder = std::function<DataBuffer(Container&, const DatasetMeta&)>;

class Container {
public:
    enum class Mode { ReadOnly, ReadWrite };

    /// Creates (truncating) a new container file.
    static Container create(const std::filesystem::path& file);
    static Container open(const std::filesystem::path& file, Mode mode = Mode::ReadOnly);

    Container(Container&&) noexcept = default;
    Container& operator=(Container&&) noexcept = default;
    Container(const Container&) = delete;
    Container& operator=(const Container&) = delete;

    const std::filesystem::path& file() const noexcept { return file_; }

    /// Creates the group and any missing ancestors.
    void create_group(std::string_view path);

    /// Writes `data` through the dataset's filter chain, one chunk at a time.
    /// Throws DuplicatePath, ShapeMismatch, UnknownFilter.
    void create_dataset(DatasetMeta meta, const DataBuffer& data);

    /// Stores a UDF payload as a single block with filter chain [UDF]; the
    /// meta records the declared output dtype and shape.
    void store_udf_dataset(DatasetMeta meta, std::span<const std::uint8_t> payload);

    /// Throws NotFound, CorruptChunk; UDF datasets go through the installed decoder.
    DataBuffer read_dataset(std::string_view path);
    /// The stored block of a UDF dataset, unmodified.
    Bytes read_udf_payload(std::string_view path);

    bool exists(std::string_view path) const;
    bool is_group(std::string_view path) const;
    const DatasetMeta* find(std::string_view path) const;
    /// Throws NotFound.
    const DatasetMeta& dataset(std::string_view path) const;

    /// Sorted listing of everything at or below `prefix`.
    std::vector<ListEntry> list(std::string_view prefix = "/") const;

    void set_attribute(std::string_view path, std::string key, AttributeValue value);
    std::optional<AttributeValue> attribute(std::string_view path, const std::string& key) const;

    void set_udf_decoder(UdfDecoder decoder) { decoder_ = std::move(decoder); }

    /// Number of chunk reads issued so far.
    std::uint64_t read_count() const noexcept { return read_count_; }

    /// Offset and serialized bytes of the current index section.
    std::uint64_t index_offset() const noexcept { return data_end_; }
    std::string serialize_index() const;

private:
    Container() = default;

    void require_writable() const;
    void ensure_parents(const std::string& path);
    std::uint64_t append_block(std::span<const std::uint8_t> bytes);
    void write_index();
    void parse_index(std::string_view text);
    Bytes read_block(const ChunkRecord& rec);

    std::filesystem::path file_;
    std::fstream stream_;
    Mode mode_ = Mode::ReadOnly;
    std::uint64_t data_end_ = 0;
    std::set<std::string> groups_;
    std::vector<DatasetMeta> datasets_;
    std::map<std::pair<std::string, std::string>, AttributeValue> attributes_;
    UdfDecoder decoder_;
    std::uint64_t read_count_ = 0;
};

} // namespace udfvault
