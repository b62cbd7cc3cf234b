#include "udfvault/container.hpp"

#include <algorithm>
#include <charconv>
#include <system_error>

#include "json_codec.hpp"
#include "udfvault/error.hpp"

namespace udfvault {

namespace fs = std::filesystem;
using nlohmann::json;

namespace detail {

namespace {

constexpr std::pair<TypeKind, std::string_view> kKindNames[] = {
    {TypeKind::Int8, "int8"},       {TypeKind::Int16, "int16"},     {TypeKind::Int32, "int32"},
    {TypeKind::Int64, "int64"},     {TypeKind::UInt8, "uint8"},     {TypeKind::UInt16, "uint16"},
    {TypeKind::UInt32, "uint32"},   {TypeKind::UInt64, "uint64"},   {TypeKind::Float32, "float32"},
    {TypeKind::Float64, "float64"}, {TypeKind::FixedString, "fixed_string"},
    {TypeKind::VarString, "var_string"}, {TypeKind::Compound, "compound"},
};

} // namespace

json dtype_to_json(const DType& dtype)
{
    json j;
    for (const auto& [kind, name] : kKindNames)
        if (kind == dtype.kind())
            j["kind"] = name;
    if (dtype.kind() == TypeKind::FixedString)
        j["length"] = dtype.size();
    if (dtype.kind() == TypeKind::Compound) {
        j["size"] = dtype.size();
        json members = json::array();
        for (const auto& m : dtype.members())
            members.push_back({{"name", m.raw_name}, {"offset", m.offset}, {"dtype", dtype_to_json(m.dtype)}});
        j["members"] = std::move(members);
    }
    return j;
}

DType dtype_from_json(const json& j)
{
    const auto kind_name = j.at("kind").get<std::string>();
    for (const auto& [kind, name] : kKindNames) {
        if (name != kind_name)
            continue;
        switch (kind) {
        case TypeKind::FixedString:
            return DType::fixed_string(j.at("length").get<std::size_t>());
        case TypeKind::VarString:
            return DType::var_string();
        case TypeKind::Compound: {
            std::vector<CompoundMember> members;
            for (const auto& m : j.at("members"))
                members.push_back({m.at("name").get<std::string>(), dtype_from_json(m.at("dtype")),
                                   m.at("offset").get<std::size_t>()});
            return DType::compound(std::move(members), j.at("size").get<std::size_t>());
        }
        default:
            return DType::scalar(kind);
        }
    }
    fail(Errc::InvalidArgument, "unknown dtype kind '" + kind_name + "'");
}

} // namespace detail

namespace {

std::string encode_attribute(const AttributeValue& value, std::string& kind)
{
    auto fmt_double = [](double d) {
        char buf[64];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
        return std::string(buf, ptr);
    };
    if (auto* i = std::get_if<std::int64_t>(&value)) {
        kind = "int";
        return std::to_string(*i);
    }
    if (auto* d = std::get_if<double>(&value)) {
        kind = "float";
        return fmt_double(*d);
    }
    if (auto* s = std::get_if<std::string>(&value)) {
        kind = "text";
        return *s;
    }
    kind = "float_array";
    std::string out;
    for (auto d : std::get<std::vector<double>>(value)) {
        if (!out.empty())
            out += ',';
        out += fmt_double(d);
    }
    return out;
}

double parse_double(std::string_view text)
{
    double d = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
    if (ec != std::errc() || ptr != text.data() + text.size())
        fail(Errc::BadContainer, "malformed attribute number '" + std::string(text) + "'");
    return d;
}

AttributeValue decode_attribute(const std::string& kind, const std::string& text)
{
    if (kind == "int") {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size())
            fail(Errc::BadContainer, "malformed integer attribute '" + text + "'");
        return v;
    }
    if (kind == "float")
        return parse_double(text);
    if (kind == "text")
        return text;
    if (kind == "float_array") {
        std::vector<double> values;
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto next = std::min(text.find(',', pos), text.size());
            values.push_back(parse_double(std::string_view(text).substr(pos, next - pos)));
            pos = next + 1;
        }
        return values;
    }
    fail(Errc::BadContainer, "unknown attribute kind '" + kind + "'");
}

std::vector<std::uint64_t> strides_of(const Shape& shape)
{
    std::vector<std::uint64_t> strides(shape.size(), 1);
    for (std::size_t d = shape.size(); d-- > 1;)
        strides[d - 1] = strides[d] * shape[d];
    return strides;
}

// Calls fn(dataset_element_index, chunk_element_index, run_length) for every
// contiguous innermost run of the tile.
template <class F>
void for_each_run(const Shape& shape, const ChunkTile& tile, F&& fn)
{
    const std::size_t rank = shape.size();
    const auto strides = strides_of(shape);
    const std::uint64_t run = tile.extent[rank - 1];
    std::vector<std::uint64_t> idx(rank, 0);
    std::uint64_t chunk_pos = 0;
    while (true) {
        std::uint64_t base = 0;
        for (std::size_t d = 0; d < rank; ++d)
            base += (tile.origin[d] + idx[d]) * strides[d];
        fn(base, chunk_pos, run);
        chunk_pos += run;
        std::size_t d = rank - 1;
        while (d > 0) {
            --d;
            if (++idx[d] < tile.extent[d])
                break;
            idx[d] = 0;
            if (d == 0)
                return;
        }
        if (rank == 1)
            return;
    }
}

void rewrite_heap_refs(std::uint8_t* elements, std::uint64_t count, const DType& dtype,
                       std::span<const std::uint8_t> from_heap, Bytes& to_heap)
{
    const auto refs = dtype.heap_ref_offsets();
    for (std::uint64_t i = 0; i < count; ++i) {
        auto* element = elements + i * dtype.size();
        for (auto off : refs) {
            auto text = heap_string(from_heap, load_le<std::uint32_t>(element + off));
            store_le<std::uint32_t>(element + off, heap_append(to_heap, text));
        }
    }
}

Bytes extract_chunk(const DataBuffer& data, const DType& dtype, const Shape& shape, const ChunkTile& tile)
{
    const auto esize = dtype.size();
    const auto count = element_count(tile.extent);
    Bytes raw(count * esize);
    for_each_run(shape, tile, [&](std::uint64_t src, std::uint64_t dst, std::uint64_t run) {
        std::memcpy(raw.data() + dst * esize, data.bytes.data() + src * esize, run * esize);
    });
    if (dtype.has_heap_refs()) {
        Bytes heap;
        rewrite_heap_refs(raw.data(), count, dtype, data.heap, heap);
        raw.insert(raw.end(), heap.begin(), heap.end());
    }
    return raw;
}

void insert_chunk(Bytes& raw, DataBuffer& out, const DType& dtype, const Shape& shape, const ChunkTile& tile)
{
    const auto esize = dtype.size();
    const auto count = element_count(tile.extent);
    const auto stream_len = count * esize;
    if (raw.size() < stream_len || (!dtype.has_heap_refs() && raw.size() != stream_len))
        fail(Errc::CorruptChunk, "chunk length does not match its extent");
    if (dtype.has_heap_refs()) {
        std::span<const std::uint8_t> heap(raw.data() + stream_len, raw.size() - stream_len);
        rewrite_heap_refs(raw.data(), count, dtype, heap, out.heap);
    }
    for_each_run(shape, tile, [&](std::uint64_t dst, std::uint64_t src, std::uint64_t run) {
        std::memcpy(out.bytes.data() + dst * esize, raw.data() + src * esize, run * esize);
    });
}

void canonicalize_heap(DataBuffer& buffer, const DType& dtype)
{
    Bytes heap;
    heap.reserve(buffer.heap.size());
    rewrite_heap_refs(buffer.bytes.data(), buffer.bytes.size() / dtype.size(), dtype, buffer.heap, heap);
    buffer.heap = std::move(heap);
}

} // namespace

std::uint64_t DatasetMeta::stored_bytes() const noexcept
{
    std::uint64_t total = 0;
    for (const auto& c : chunks)
        total += c.stored_length;
    return total;
}

std::string normalize_path(std::string_view path)
{
    std::string out;
    std::size_t pos = 0;
    while (pos <= path.size()) {
        auto next = std::min(path.find('/', pos), path.size());
        auto part = path.substr(pos, next - pos);
        if (part == "." || part == "..")
            fail(Errc::InvalidArgument, "relative component in path '" + std::string(path) + "'");
        if (!part.empty()) {
            out += '/';
            out += part;
        }
        pos = next + 1;
    }
    return out.empty() ? "/" : out;
}

std::string parent_path(std::string_view normalized)
{
    auto slash = normalized.rfind('/');
    if (slash == 0 || slash == std::string_view::npos)
        return "/";
    return std::string(normalized.substr(0, slash));
}

std::vector<ChunkTile> chunk_tiles(const Shape& shape, const Shape& chunk_shape)
{
    const std::size_t rank = shape.size();
    Shape grid(rank);
    for (std::size_t d = 0; d < rank; ++d)
        grid[d] = (shape[d] + chunk_shape[d] - 1) / chunk_shape[d];
    std::vector<ChunkTile> tiles;
    tiles.reserve(element_count(grid));
    Shape idx(rank, 0);
    while (true) {
        ChunkTile t{Shape(rank), Shape(rank)};
        for (std::size_t d = 0; d < rank; ++d) {
            t.origin[d] = idx[d] * chunk_shape[d];
            t.extent[d] = std::min(chunk_shape[d], shape[d] - t.origin[d]);
        }
        tiles.push_back(std::move(t));
        std::size_t d = rank;
        while (d > 0) {
            --d;
            if (++idx[d] < grid[d])
                break;
            idx[d] = 0;
            if (d == 0)
                return tiles;
        }
    }
}

Container Container::create(const fs::path& file)
{
    Container c;
    c.file_ = file;
    c.mode_ = Mode::ReadWrite;
    {
        std::ofstream init(file, std::ios::binary | std::ios::trunc);
        if (!init)
            fail(Errc::IoError, "cannot create " + file.string());
        Bytes header(kContainerMagic.begin(), kContainerMagic.end());
        append_le<std::uint16_t>(header, kContainerVersion);
        init.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
    }
    c.stream_.open(file, std::ios::binary | std::ios::in | std::ios::out);
    if (!c.stream_)
        fail(Errc::IoError, "cannot open " + file.string());
    c.data_end_ = kContainerMagic.size() + sizeof(std::uint16_t);
    c.write_index();
    return c;
}

Container Container::open(const fs::path& file, Mode mode)
{
    Container c;
    c.file_ = file;
    c.mode_ = mode;
    auto flags = std::ios::binary | std::ios::in;
    if (mode == Mode::ReadWrite)
        flags |= std::ios::out;
    c.stream_.open(file, flags);
    if (!c.stream_)
        fail(Errc::IoError, "cannot open " + file.string());

    std::error_code ec;
    const auto size = fs::file_size(file, ec);
    constexpr std::uint64_t header_len = 6, footer_len = 12;
    if (ec || size < header_len + footer_len)
        fail(Errc::BadContainer, file.string() + " is too small to be a container");

    std::uint8_t header[header_len];
    c.stream_.read(reinterpret_cast<char*>(header), header_len);
    if (std::string_view(reinterpret_cast<char*>(header), 4) != kContainerMagic)
        fail(Errc::BadContainer, file.string() + ": bad header magic");
    if (load_le<std::uint16_t>(header + 4) != kContainerVersion)
        fail(Errc::BadContainer, file.string() + ": unsupported format version");

    std::uint8_t footer[footer_len];
    c.stream_.seekg(static_cast<std::streamoff>(size - footer_len));
    c.stream_.read(reinterpret_cast<char*>(footer), footer_len);
    if (!c.stream_ || std::string_view(reinterpret_cast<char*>(footer + 8), 4) != kContainerMagic)
        fail(Errc::BadContainer, file.string() + ": missing footer (truncated write?)");
    const auto index_offset = load_le<std::uint64_t>(footer);
    if (index_offset < header_len || index_offset > size - footer_len)
        fail(Errc::BadContainer, file.string() + ": footer points outside the file");

    std::string text(size - footer_len - index_offset, '\0');
    c.stream_.seekg(static_cast<std::streamoff>(index_offset));
    c.stream_.read(text.data(), static_cast<std::streamsize>(text.size()));
    if (!c.stream_)
        fail(Errc::BadContainer, file.string() + ": short read of index");
    c.data_end_ = index_offset;
    c.parse_index(text);
    return c;
}

void Container::require_writable() const
{
    if (mode_ != Mode::ReadWrite)
        fail(Errc::IoError, file_.string() + " is open read-only");
}

bool Container::is_group(std::string_view path) const
{
    auto p = normalize_path(path);
    return p == "/" || groups_.count(p) != 0;
}

const DatasetMeta* Container::find(std::string_view path) const
{
    auto p = normalize_path(path);
    for (const auto& d : datasets_)
        if (d.path == p)
            return &d;
    return nullptr;
}

const DatasetMeta& Container::dataset(std::string_view path) const
{
    if (const auto* d = find(path))
        return *d;
    fail(Errc::NotFound, "no dataset at '" + std::string(path) + "'");
}

bool Container::exists(std::string_view path) const
{
    return is_group(path) || find(path) != nullptr;
}

void Container::ensure_parents(const std::string& path)
{
    std::vector<std::string> missing;
    for (auto p = parent_path(path); p != "/"; p = parent_path(p)) {
        if (find(p))
            fail(Errc::InvalidArgument, "'" + p + "' is a dataset, not a group");
        if (!groups_.count(p))
            missing.push_back(p);
    }
    groups_.insert(missing.begin(), missing.end());
}

void Container::create_group(std::string_view path)
{
    require_writable();
    auto p = normalize_path(path);
    if (p == "/" || groups_.count(p))
        return;
    if (find(p))
        fail(Errc::DuplicatePath, "'" + p + "' already exists");
    ensure_parents(p);
    groups_.insert(p);
    write_index();
}

std::uint64_t Container::append_block(std::span<const std::uint8_t> bytes)
{
    const auto offset = data_end_;
    stream_.seekp(static_cast<std::streamoff>(offset));
    stream_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!stream_)
        fail(Errc::IoError, "write failed on " + file_.string());
    data_end_ += bytes.size();
    return offset;
}

void Container::create_dataset(DatasetMeta meta, const DataBuffer& data)
{
    require_writable();
    meta.path = normalize_path(meta.path);
    if (meta.path == "/" || exists(meta.path))
        fail(Errc::DuplicatePath, "'" + meta.path + "' already exists");
    if (meta.shape.empty() || std::find(meta.shape.begin(), meta.shape.end(), 0) != meta.shape.end())
        fail(Errc::ShapeMismatch, "dataset shape needs at least one dimension, all extents >= 1");
    filters::validate_chain(meta.filters);
    if (meta.is_udf())
        fail(Errc::InvalidArgument, "UDF datasets are created through the UDF engine");
    if (!meta.filters.empty() && meta.layout != Layout::Chunked)
        fail(Errc::InvalidArgument, "filters require a chunked layout");
    if (meta.layout == Layout::Chunked) {
        if (meta.chunk_shape.size() != meta.shape.size())
            fail(Errc::ShapeMismatch, "chunk rank differs from dataset rank");
        for (std::size_t d = 0; d < meta.shape.size(); ++d)
            if (meta.chunk_shape[d] < 1 || meta.chunk_shape[d] > meta.shape[d])
                fail(Errc::ShapeMismatch, "chunk extent outside 1..shape in dimension " + std::to_string(d));
    } else {
        meta.chunk_shape.clear();
    }
    const auto expected = element_count(meta.shape) * meta.dtype.size();
    if (data.bytes.size() != expected)
        fail(Errc::ShapeMismatch, "buffer holds " + std::to_string(data.bytes.size()) + " bytes, shape needs " +
                                      std::to_string(expected));
    ensure_parents(meta.path);

    meta.chunks.clear();
    const auto start = data_end_;
    try {
        if (meta.layout == Layout::Contiguous && !meta.dtype.has_heap_refs()) {
            auto offset = append_block(data.bytes);
            meta.chunks.push_back({offset, data.bytes.size(), data.bytes.size()});
        } else {
            const auto tiles = meta.layout == Layout::Chunked ? chunk_tiles(meta.shape, meta.chunk_shape)
                                                              : std::vector<ChunkTile>{{Shape(meta.shape.size(), 0), meta.shape}};
            for (const auto& tile : tiles) {
                auto raw = extract_chunk(data, meta.dtype, meta.shape, tile);
                auto stored = filters::apply_write_chain(meta.filters, raw);
                auto offset = append_block(stored);
                meta.chunks.push_back({offset, stored.size(), raw.size()});
            }
        }
    } catch (...) {
        // Restore the previous index over whatever was partially written.
        data_end_ = start;
        write_index();
        throw;
    }
    datasets_.push_back(std::move(meta));
    write_index();
}

void Container::store_udf_dataset(DatasetMeta meta, std::span<const std::uint8_t> payload)
{
    require_writable();
    meta.path = normalize_path(meta.path);
    if (meta.path == "/" || exists(meta.path))
        fail(Errc::DuplicatePath, "'" + meta.path + "' already exists");
    if (meta.shape.empty() || std::find(meta.shape.begin(), meta.shape.end(), 0) != meta.shape.end())
        fail(Errc::ShapeMismatch, "UDF output shape needs extents >= 1");
    ensure_parents(meta.path);
    meta.layout = Layout::Contiguous;
    meta.chunk_shape.clear();
    meta.filters = {filters::udf()};
    const auto offset = append_block(payload);
    meta.chunks = {{offset, payload.size(), payload.size()}};
    datasets_.push_back(std::move(meta));
    write_index();
}

Bytes Container::read_block(const ChunkRecord& rec)
{
    ++read_count_;
    Bytes out(rec.stored_length);
    stream_.clear();
    stream_.seekg(static_cast<std::streamoff>(rec.file_offset));
    stream_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!stream_)
        fail(Errc::CorruptChunk, "short read of chunk at offset " + std::to_string(rec.file_offset));
    return out;
}

DataBuffer Container::read_dataset(std::string_view path)
{
    const DatasetMeta meta = dataset(path);
    if (meta.is_udf()) {
        if (!decoder_)
            fail(Errc::UnknownFilter, "'" + meta.path + "' is a UDF dataset and no UDF decoder is installed");
        return decoder_(*this, meta);
    }

    DataBuffer out;
    if (meta.layout == Layout::Contiguous && meta.filters.empty() && !meta.dtype.has_heap_refs()) {
        out.bytes = read_block(meta.chunks.at(0));
        if (out.bytes.size() != element_count(meta.shape) * meta.dtype.size())
            fail(Errc::CorruptChunk, "contiguous block length does not match shape");
        return out;
    }

    out.bytes.resize(element_count(meta.shape) * meta.dtype.size());
    const auto tiles = meta.layout == Layout::Chunked ? chunk_tiles(meta.shape, meta.chunk_shape)
                                                      : std::vector<ChunkTile>{{Shape(meta.shape.size(), 0), meta.shape}};
    if (tiles.size() != meta.chunks.size())
        fail(Errc::CorruptChunk, "chunk index does not cover '" + meta.path + "'");
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        auto stored = read_block(meta.chunks[i]);
        Bytes raw;
        try {
            raw = filters::apply_read_chain(meta.filters, stored, meta.chunks[i].raw_length);
        } catch (const Error& e) {
            fail(Errc::CorruptChunk, "chunk " + std::to_string(i) + " of '" + meta.path + "': " +
                                         std::string(errc_name(e.code())) + ": " + e.what());
        }
        insert_chunk(raw, out, meta.dtype, meta.shape, tiles[i]);
    }
    if (meta.dtype.has_heap_refs())
        canonicalize_heap(out, meta.dtype);
    return out;
}

Bytes Container::read_udf_payload(std::string_view path)
{
    const auto& meta = dataset(path);
    if (!meta.is_udf())
        fail(Errc::InvalidArgument, "'" + meta.path + "' is not a UDF dataset");
    return read_block(meta.chunks.at(0));
}

std::vector<ListEntry> Container::list(std::string_view prefix) const
{
    const auto p = normalize_path(prefix);
    auto matches = [&](const std::string& path) {
        if (p == "/")
            return true;
        return path == p || (path.size() > p.size() && path.compare(0, p.size(), p) == 0 && path[p.size()] == '/');
    };
    std::vector<ListEntry> out;
    for (const auto& g : groups_)
        if (matches(g))
            out.push_back({g, EntryKind::Group, std::nullopt});
    for (const auto& d : datasets_)
        if (matches(d.path))
            out.push_back({d.path, EntryKind::Dataset, d});
    std::sort(out.begin(), out.end(), [](const ListEntry& a, const ListEntry& b) { return a.path < b.path; });
    return out;
}

void Container::set_attribute(std::string_view path, std::string key, AttributeValue value)
{
    require_writable();
    auto p = normalize_path(path);
    if (!exists(p))
        fail(Errc::NotFound, "no object at '" + p + "'");
    attributes_[{p, std::move(key)}] = std::move(value);
    write_index();
}

std::optional<AttributeValue> Container::attribute(std::string_view path, const std::string& key) const
{
    auto it = attributes_.find({normalize_path(path), key});
    if (it == attributes_.end())
        return std::nullopt;
    return it->second;
}

std::string Container::serialize_index() const
{
    json datasets = json::array();
    for (const auto& d : datasets_) {
        json chunks = json::array();
        for (const auto& c : d.chunks)
            chunks.push_back({c.file_offset, c.stored_length, c.raw_length});
        json chain = json::array();
        for (const auto& f : d.filters)
            chain.push_back({{"id", static_cast<std::uint32_t>(f.id)}, {"params", f.params}});
        json entry = {
            {"path", d.path},
            {"dtype", detail::dtype_to_json(d.dtype)},
            {"shape", d.shape},
            {"layout", d.layout == Layout::Chunked ? "chunked" : "contiguous"},
            {"filters", std::move(chain)},
            {"chunks", std::move(chunks)},
        };
        if (d.layout == Layout::Chunked)
            entry["chunk_shape"] = d.chunk_shape;
        datasets.push_back(std::move(entry));
    }
    json attributes = json::array();
    for (const auto& [where, value] : attributes_) {
        std::string kind;
        auto text = encode_attribute(value, kind);
        attributes.push_back({{"path", where.first}, {"key", where.second}, {"kind", kind}, {"value", text}});
    }
    json index = {
        {"magic", kContainerMagic},
        {"format_version", kContainerVersion},
        {"groups", groups_},
        {"datasets", std::move(datasets)},
        {"attributes", std::move(attributes)},
    };
    return index.dump();
}

void Container::parse_index(std::string_view text)
{
    try {
        const auto index = json::parse(text);
        if (index.at("magic").get<std::string>() != kContainerMagic ||
            index.at("format_version").get<int>() != kContainerVersion)
            fail(Errc::BadContainer, "index magic/version mismatch");
        for (const auto& g : index.at("groups"))
            groups_.insert(g.get<std::string>());
        for (const auto& d : index.at("datasets")) {
            DatasetMeta meta;
            meta.path = d.at("path").get<std::string>();
            meta.dtype = detail::dtype_from_json(d.at("dtype"));
            meta.shape = d.at("shape").get<Shape>();
            meta.layout = d.at("layout").get<std::string>() == "chunked" ? Layout::Chunked : Layout::Contiguous;
            if (meta.layout == Layout::Chunked)
                meta.chunk_shape = d.at("chunk_shape").get<Shape>();
            for (const auto& f : d.at("filters")) {
                const auto id = f.at("id").get<std::uint32_t>();
                if (!filters::is_known_filter(id))
                    fail(Errc::UnknownFilter, "dataset '" + meta.path + "' uses unknown filter " + std::to_string(id));
                meta.filters.push_back({static_cast<filters::FilterId>(id), f.at("params").get<std::vector<std::int64_t>>()});
            }
            for (const auto& c : d.at("chunks"))
                meta.chunks.push_back({c.at(0).get<std::uint64_t>(), c.at(1).get<std::uint64_t>(), c.at(2).get<std::uint64_t>()});
            for (const auto& c : meta.chunks)
                if (c.file_offset + c.stored_length > data_end_)
                    fail(Errc::BadContainer, "chunk of '" + meta.path + "' extends past the data region");
            datasets_.push_back(std::move(meta));
        }
        for (const auto& a : index.at("attributes"))
            attributes_[{a.at("path").get<std::string>(), a.at("key").get<std::string>()}] =
                decode_attribute(a.at("kind").get<std::string>(), a.at("value").get<std::string>());
    } catch (const json::exception& e) {
        fail(Errc::BadContainer, std::string("malformed index: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::BadContainer || e.code() == Errc::UnknownFilter)
            throw;
        fail(Errc::BadContainer, std::string("malformed index: ") + e.what());
    }
}

void Container::write_index()
{
    const auto text = serialize_index();
    Bytes tail(text.begin(), text.end());
    append_le<std::uint64_t>(tail, data_end_);
    tail.insert(tail.end(), kContainerMagic.begin(), kContainerMagic.end());
    stream_.clear();
    stream_.seekp(static_cast<std::streamoff>(data_end_));
    stream_.write(reinterpret_cast<const char*>(tail.data()), static_cast<std::streamsize>(tail.size()));
    stream_.flush();
    if (!stream_)
        fail(Errc::IoError, "index write failed on " + file_.string());
    std::error_code ec;
    fs::resize_file(file_, data_end_ + tail.size(), ec);
    if (ec)
        fail(Errc::IoError, "cannot truncate " + file_.string() + ": " + ec.message());
}

} // namespace udfvault
