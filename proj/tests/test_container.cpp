#include <doctest.h>

#include <random>

#include "support.hpp"
#include "udfvault/filters.hpp"

using namespace udfvault;
using testing::TempDir;

namespace {

Bytes unhex(std::string_view hex)
{
    Bytes out;
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
        out.push_back(static_cast<std::uint8_t>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
    return out;
}

Bytes file_range(const std::filesystem::path& file, std::uint64_t offset, std::uint64_t length)
{
    const std::string all = testing::slurp(file);
    return Bytes(all.begin() + static_cast<std::ptrdiff_t>(offset),
                 all.begin() + static_cast<std::ptrdiff_t>(offset + length));
}

} // namespace

TEST_SUITE("container")
{
    TEST_CASE("2x2 int32 contiguous stores 16 bytes at the recorded offset and reads back")
    {
        TempDir dir;
        const auto file = dir / "a.sdc";
        const std::vector<std::int32_t> values{1, 2, 3, 4};
        {
            auto c = Container::create(file);
            c.create_dataset(testing::meta("/x", DType::scalar(TypeKind::Int32), {2, 2}), make_buffer(values));
        }
        auto c = Container::open(file);
        const auto& m = c.dataset("/x");
        REQUIRE(m.chunks.size() == 1);
        CHECK(m.chunks[0].file_offset == 6); // first block starts right after the header
        CHECK(m.chunks[0].stored_length == 16);
        CHECK(m.stored_bytes() == 16);
        const Bytes expect{1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0};
        CHECK(file_range(file, m.chunks[0].file_offset, 16) == expect);
        const auto back = c.read_dataset("/x");
        CHECK(std::vector<std::int32_t>(back.view<std::int32_t>().begin(), back.view<std::int32_t>().end()) == values);
    }

    TEST_CASE("1000x1000 int32 contiguous occupies 4,000,000 data bytes")
    {
        TempDir dir;
        auto c = Container::create(dir / "big.sdc");
        DataBuffer b;
        b.bytes.resize(4'000'000);
        c.create_dataset(testing::meta("/grid", DType::scalar(TypeKind::Int32), {1000, 1000}), b);
        CHECK(c.dataset("/grid").stored_bytes() == 4'000'000);
    }

    TEST_CASE("chunked 4x4 with chunk 2x4 and deflate stores two chunks matching an independent deflate")
    {
        // Raw deflate (level 6, 32 KiB window) of each 2x4 band of int32 0..15,
        // produced by Python's zlib binding and frozen here.
        const Bytes first = unhex("6360606060046226206606621620660562362066076200");
        const Bytes second = unhex("e3606060e004622e20e606621e20e605623e20e6076200");
        TempDir dir;
        const auto file = dir / "c.sdc";
        std::vector<std::int32_t> values(16);
        for (int i = 0; i < 16; ++i)
            values[i] = i;
        {
            auto c = Container::create(file);
            c.create_dataset(testing::chunked("/c", DType::scalar(TypeKind::Int32), {4, 4}, {2, 4}, {filters::deflate(6)}),
                             make_buffer(values));
        }
        auto c = Container::open(file);
        const auto& m = c.dataset("/c");
        REQUIRE(m.chunks.size() == 2);
        CHECK(m.chunks[0].stored_length == first.size());
        CHECK(m.chunks[1].stored_length == second.size());
        CHECK(m.chunks[0].raw_length == 32);
        CHECK(file_range(file, m.chunks[0].file_offset, m.chunks[0].stored_length) == first);
        CHECK(file_range(file, m.chunks[1].file_offset, m.chunks[1].stored_length) == second);
        CHECK(c.read_dataset("/c") == make_buffer(values));
    }

    TEST_CASE("shuffle+deflate dataset reads back the original bytes")
    {
        TempDir dir;
        auto c = Container::create(dir / "s.sdc");
        std::vector<std::uint16_t> values(300);
        for (std::size_t i = 0; i < values.size(); ++i)
            values[i] = static_cast<std::uint16_t>(i * 37);
        c.create_dataset(testing::chunked("/s", DType::scalar(TypeKind::UInt16), {20, 15}, {7, 4},
                                          {filters::shuffle(2), filters::deflate(9)}),
                         make_buffer(values));
        CHECK(c.read_dataset("/s") == make_buffer(values));
        CHECK(c.dataset("/s").chunks.size() == 3 * 4);
    }

    TEST_CASE("list: empty, sorted datasets, group before its children")
    {
        TempDir dir;
        auto c = Container::create(dir / "l.sdc");
        CHECK(c.list("/").empty());

        const DType i16 = DType::scalar(TypeKind::Int16);
        c.create_dataset(testing::meta("/Band5", i16, {1}), make_buffer(std::vector<std::int16_t>{5}));
        c.create_dataset(testing::meta("/Band4", i16, {1}), make_buffer(std::vector<std::int16_t>{4}));
        auto all = c.list("/");
        REQUIRE(all.size() == 2);
        CHECK(all[0].path == "/Band4");
        CHECK(all[1].path == "/Band5");
        CHECK(all[0].kind == EntryKind::Dataset);
        REQUIRE(all[0].meta.has_value());
        CHECK(all[0].meta->dtype == i16);

        c.create_group("/g");
        c.create_dataset(testing::meta("/g/x", i16, {1}), make_buffer(std::vector<std::int16_t>{1}));
        auto g = c.list("/g");
        REQUIRE(g.size() == 2);
        CHECK(g[0].path == "/g");
        CHECK(g[0].kind == EntryKind::Group);
        CHECK(g[1].path == "/g/x");
        CHECK(g[1].kind == EntryKind::Dataset);
    }

    TEST_CASE("missing parent groups are created and paths are normalized")
    {
        TempDir dir;
        auto c = Container::create(dir / "p.sdc");
        c.create_dataset(testing::meta("a/b/c", DType::scalar(TypeKind::UInt8), {1}), make_buffer(std::vector<std::uint8_t>{7}));
        CHECK(c.is_group("/a"));
        CHECK(c.is_group("/a/b"));
        CHECK(c.exists("/a/b/c"));
        CHECK(testing::error_of([&] { normalize_path("/a/../b"); }) == Errc::InvalidArgument);
    }

    TEST_CASE("create_dataset rejects bad requests")
    {
        TempDir dir;
        auto c = Container::create(dir / "e.sdc");
        const DType i32 = DType::scalar(TypeKind::Int32);
        const auto four = make_buffer(std::vector<std::int32_t>{1, 2, 3, 4});
        c.create_dataset(testing::meta("/x", i32, {4}), four);
        CHECK(testing::error_of([&] { c.create_dataset(testing::meta("/x", i32, {4}), four); }) == Errc::DuplicatePath);
        CHECK(testing::error_of([&] { c.create_dataset(testing::meta("/y", i32, {5}), four); }) == Errc::ShapeMismatch);
        CHECK(testing::error_of([&] { c.create_dataset(testing::meta("/y", i32, {0}), {}); }) == Errc::ShapeMismatch);
        CHECK(testing::error_of([&] {
                  c.create_dataset(testing::chunked("/y", i32, {4}, {8}), four);
              }) == Errc::ShapeMismatch);
        auto filtered = testing::meta("/y", i32, {4});
        filtered.filters = {filters::deflate(1)};
        CHECK(testing::error_of([&] { c.create_dataset(filtered, four); }) == Errc::InvalidArgument);
        CHECK(testing::error_of([&] {
                  c.create_dataset(testing::chunked("/y", i32, {4}, {2}, {{static_cast<filters::FilterId>(77), {}}}), four);
              }) == Errc::UnknownFilter);
        CHECK(testing::error_of([&] { c.read_dataset("/nope"); }) == Errc::NotFound);
    }

    TEST_CASE("read-only handles refuse writes")
    {
        TempDir dir;
        Container::create(dir / "r.sdc");
        auto c = Container::open(dir / "r.sdc");
        CHECK(testing::error_of([&] { c.create_group("/g"); }) == Errc::IoError);
    }

    TEST_CASE("round trip over random dtypes, shapes and layouts")
    {
        std::mt19937_64 rng(7);
        std::vector<DType> types;
        for (auto k : {TypeKind::Int8, TypeKind::Int16, TypeKind::Int32, TypeKind::Int64, TypeKind::UInt8,
                       TypeKind::UInt16, TypeKind::UInt32, TypeKind::UInt64, TypeKind::Float32, TypeKind::Float64})
            types.push_back(DType::scalar(k));
        types.push_back(DType::fixed_string(5));
        types.push_back(DType::var_string());
        types.push_back(DType::compound({{"a", DType::scalar(TypeKind::Int16), 0},
                                         {"s", DType::var_string(), 4},
                                         {"f", DType::scalar(TypeKind::Float64), 8}},
                                        24));

        TempDir dir;
        const auto file = dir / "rt.sdc";
        std::vector<std::pair<DatasetMeta, DataBuffer>> written;
        {
            auto c = Container::create(file);
            for (int trial = 0; trial < 120; ++trial) {
                const DType t = types[trial % types.size()];
                const std::size_t rank = 1 + rng() % 3;
                Shape shape;
                std::uint64_t count = 1;
                for (std::size_t d = 0; d < rank; ++d) {
                    shape.push_back(1 + rng() % (d == 0 ? 8 : 4));
                    count *= shape.back();
                }
                REQUIRE(count <= 128);
                DataBuffer data;
                data.bytes.resize(count * t.size());
                for (auto& b : data.bytes)
                    b = static_cast<std::uint8_t>(rng());
                if (t.is_compound() || t.kind() == TypeKind::VarString) {
                    const std::size_t ref = t.is_compound() ? 4 : 0;
                    for (std::uint64_t i = 0; i < count; ++i)
                        store_le(data.bytes.data() + i * t.size() + ref,
                                 heap_append(data.heap, "v" + std::to_string(rng() % 1000)));
                }
                DatasetMeta m = testing::meta("/d" + std::to_string(trial), t, shape);
                if (rng() % 2) {
                    m.layout = Layout::Chunked;
                    for (auto e : shape)
                        m.chunk_shape.push_back(1 + rng() % e);
                    if (rng() % 2)
                        m.filters = {filters::shuffle(t.size()), filters::deflate(1 + static_cast<int>(rng() % 9))};
                }
                c.create_dataset(m, data);
                written.emplace_back(m, data);
            }
        }
        auto c = Container::open(file);
        for (const auto& [m, data] : written) {
            CAPTURE(m.path);
            const auto back = c.read_dataset(m.path);
            if (!m.dtype.has_heap_refs()) {
                CHECK(back == data);
                continue;
            }
            // Heaps are re-laid out per chunk; compare the values they encode.
            const std::uint64_t count = element_count(m.shape);
            REQUIRE(back.bytes.size() == data.bytes.size());
            const std::size_t ref = m.dtype.is_compound() ? 4 : 0;
            for (std::uint64_t i = 0; i < count; ++i) {
                const auto* p = back.bytes.data() + i * m.dtype.size();
                const auto* q = data.bytes.data() + i * m.dtype.size();
                CHECK(heap_string(back.heap, load_le<std::uint32_t>(p + ref)) ==
                      heap_string(data.heap, load_le<std::uint32_t>(q + ref)));
                if (m.dtype.is_compound()) {
                    CHECK(std::equal(p, p + 2, q));
                    CHECK(std::equal(p + 8, p + 24, q + 8));
                }
            }
        }
    }

    TEST_CASE("same writes in the same order give byte-identical files")
    {
        TempDir dir;
        auto write = [&](const std::string& name) {
            auto c = Container::create(dir / name);
            c.create_dataset(testing::meta("/a/x", DType::scalar(TypeKind::Float32), {3}),
                             make_buffer(std::vector<float>{1.5f, -2.f, 0.f}));
            c.create_dataset(testing::chunked("/b", DType::scalar(TypeKind::Int64), {4}, {3}, {filters::deflate(6)}),
                             make_buffer(std::vector<std::int64_t>{9, 8, 7, 6}));
            c.set_attribute("/a/x", "units", std::string("K"));
            c.set_attribute("/b", "scale", 0.25);
            return c.serialize_index();
        };
        const auto i1 = write("one.sdc");
        const auto i2 = write("two.sdc");
        CHECK(i1 == i2);
        CHECK(testing::slurp(dir / "one.sdc") == testing::slurp(dir / "two.sdc"));
    }

    TEST_CASE("chunk tiles cover the shape exactly once")
    {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t rank = 1 + rng() % 3;
            Shape shape, chunk;
            for (std::size_t d = 0; d < rank; ++d) {
                shape.push_back(1 + rng() % 9);
                chunk.push_back(1 + rng() % shape.back());
            }
            std::vector<int> hits(element_count(shape), 0);
            for (const auto& t : chunk_tiles(shape, chunk)) {
                std::vector<std::uint64_t> idx(rank, 0);
                for (;;) {
                    std::uint64_t flat = 0;
                    for (std::size_t d = 0; d < rank; ++d) {
                        REQUIRE(t.origin[d] + idx[d] < shape[d]);
                        flat = flat * shape[d] + t.origin[d] + idx[d];
                    }
                    ++hits[flat];
                    std::size_t d = rank;
                    while (d-- > 0 && ++idx[d] == t.extent[d])
                        idx[d] = 0;
                    if (d == static_cast<std::size_t>(-1))
                        break;
                }
            }
            CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
        }
    }

    TEST_CASE("attributes persist across reopen")
    {
        TempDir dir;
        {
            auto c = Container::create(dir / "at.sdc");
            c.create_dataset(testing::meta("/Band4", DType::scalar(TypeKind::Int16), {1}),
                             make_buffer(std::vector<std::int16_t>{1}));
            c.set_attribute("/Band4", "long_name", std::string("Red"));
            c.set_attribute("/Band4", "count", std::int64_t{-3});
            c.set_attribute("/Band4", "range", std::vector<double>{0.5, 1e300});
        }
        auto c = Container::open(dir / "at.sdc");
        CHECK(std::get<std::string>(*c.attribute("/Band4", "long_name")) == "Red");
        CHECK(std::get<std::int64_t>(*c.attribute("/Band4", "count")) == -3);
        CHECK(std::get<std::vector<double>>(*c.attribute("/Band4", "range")) == std::vector<double>{0.5, 1e300});
        CHECK_FALSE(c.attribute("/Band4", "missing").has_value());
    }

    TEST_CASE("damaged files are reported")
    {
        TempDir dir;
        const auto file = dir / "d.sdc";
        {
            auto c = Container::create(file);
            c.create_dataset(testing::chunked("/z", DType::scalar(TypeKind::Int32), {64}, {64}, {filters::deflate(6)}),
                             make_buffer(std::vector<std::int32_t>(64, 5)));
        }
        std::string bytes = testing::slurp(file);

        testing::spit(dir / "trunc.sdc", bytes.substr(0, bytes.size() - 3));
        CHECK(testing::error_of([&] { Container::open(dir / "trunc.sdc"); }) == Errc::BadContainer);

        std::string magic = bytes;
        magic[0] = 'X';
        testing::spit(dir / "magic.sdc", magic);
        CHECK(testing::error_of([&] { Container::open(dir / "magic.sdc"); }) == Errc::BadContainer);

        std::string chunk = bytes;
        chunk[7] = static_cast<char>(chunk[7] ^ 0x5a); // inside the deflate stream
        testing::spit(dir / "chunk.sdc", chunk);
        auto c = Container::open(dir / "chunk.sdc");
        CHECK(testing::error_of([&] { c.read_dataset("/z"); }) == Errc::CorruptChunk);
    }
}
