#include "udfvault/bench.hpp"

#include <bit>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "udfvault/error.hpp"
#include "udfvault/numeric.hpp"
#include "udfvault/trust.hpp"
#include "udfvault/udf/engine.hpp"

namespace udfvault::bench {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kProfile = "bench";

DatasetMeta contiguous(std::string path, DType dtype, Shape shape)
{
    DatasetMeta m;
    m.path = std::move(path);
    m.dtype = dtype;
    m.shape = std::move(shape);
    return m;
}

std::uint64_t now_ns()
{
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch()).count());
}

void say(const BenchConfig& config, const std::string& line)
{
    if (config.log)
        *config.log << line << '\n' << std::flush;
}

// Timed read from a freshly opened handle, so no state carries over between
// measurements.
struct TimedRead {
    DataBuffer data;
    std::uint64_t ns = 0;
};

TimedRead timed_read(const fs::path& file, std::string_view path, udf::Engine& engine)
{
    const auto t0 = now_ns();
    auto c = Container::open(file);
    engine.bind(c);
    TimedRead r;
    r.data = c.read_dataset(path);
    r.ns = now_ns() - t0;
    return r;
}

trust::Identity bench_identity(std::uint64_t seed)
{
    trust::Seed key_seed{};
    std::uint64_t state = seed ^ 0x6265'6e63'685f'6b65ull;
    for (std::size_t i = 0; i < key_seed.size(); i += 8) {
        const auto z = splitmix64_next(state);
        for (std::size_t b = 0; b < 8; ++b)
            key_seed[i + b] = static_cast<std::uint8_t>(z >> (8 * b));
    }
    trust::Identity id{{}, trust::SigningKey::from_seed(key_seed)};
    id.record.public_key = id.key.public_key();
    id.record.owner_name = "udfvault bench";
    id.record.owner_email = "bench@localhost";
    return id;
}

// The bench signer lives in its own profile with limits sized for the
// largest grids; nothing else is granted.
trust::TrustStore bench_store(const fs::path& root, const trust::Identity& id)
{
    auto store = trust::TrustStore::open(root);
    trust::Rules rules;
    rules.limits.memory_cap = 64ull << 30;
    rules.limits.wall_timeout = std::chrono::minutes(30);
    fs::create_directories(root / "profiles" / std::string(kProfile) / "keys");
    std::ofstream(root / "profiles" / std::string(kProfile) / "rules.json") << rules.to_json();
    if (!store.profile_of(id.record.public_key))
        store.import_key(id.record, kProfile);
    return store;
}

} // namespace

std::uint64_t splitmix64_next(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

Bands generate_bands(std::uint64_t n, std::uint64_t seed)
{
    if (n == 0)
        fail(Errc::InvalidArgument, "band size must be >= 1");
    Bands b;
    b.n = n;
    const std::uint64_t count = n * n;
    std::uint64_t state = seed;
    b.red.resize(count);
    b.nir.resize(count);
    for (auto& v : b.red)
        v = static_cast<std::int16_t>(1 + splitmix64_next(state) % 10000);
    for (auto& v : b.nir)
        v = static_cast<std::int16_t>(1 + splitmix64_next(state) % 10000);
    return b;
}

void write_bands(Container& container, const Bands& bands)
{
    const DType i16 = DType::scalar(TypeKind::Int16);
    container.create_dataset(contiguous("/Band4", i16, {bands.n, bands.n}), make_buffer(bands.red));
    container.set_attribute("/Band4", "long_name", std::string("Red"));
    container.create_dataset(contiguous("/Band5", i16, {bands.n, bands.n}), make_buffer(bands.nir));
    container.set_attribute("/Band5", "long_name", std::string("Near-Infrared (NIR)"));
}

void gen_bands(Container& container, std::uint64_t n, std::uint64_t seed)
{
    write_bands(container, generate_bands(n, seed));
}

double ndvi(std::int16_t nir, std::int16_t red) noexcept
{
    const double n = nir;
    const double r = red;
    return (n - r) / (n + r);
}

std::int32_t grid_value(std::int16_t nir, std::int16_t red) noexcept
{
    const double n = nir;
    const double r = red;
    return cast_from_double<std::int32_t>(10000.0 * (n - r) / (n + r));
}

std::string BenchReport::to_csv() const
{
    std::ostringstream out;
    out << "scenario,N,layout,stored_bytes,wall_time_ns,checksum\n";
    for (const auto& r : rows) {
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(r.checksum));
        out << r.scenario << ',' << r.n << ',' << r.layout << ',' << r.stored_bytes << ',' << r.wall_time_ns << ',' << hex
            << '\n';
    }
    return out.str();
}

const BenchRow* BenchReport::find(std::string_view scenario, std::uint64_t n, std::string_view layout) const
{
    for (const auto& r : rows)
        if (r.scenario == scenario && r.n == n && r.layout == layout)
            return &r;
    return nullptr;
}

Shape chunk_shape(std::uint64_t n, std::uint64_t chunk_cols)
{
    return {n, std::min(n, std::max<std::uint64_t>(1, chunk_cols))};
}

std::uint64_t scratch_bytes_needed(std::uint64_t n) noexcept
{
    // Bands 4, int32 grids 4 + up to ~4 compressed, float64 NDVI 8 bytes per
    // element, plus slack for deflate expansion and the index.
    return n * n * 21 + (16ull << 20);
}

BenchReport run_bench(const BenchConfig& config)
{
    std::vector<std::uint64_t> sizes;
    for (auto n : config.sizes)
        if (config.max_n == 0 || n <= config.max_n)
            sizes.push_back(n);
    if (sizes.empty())
        fail(Errc::InvalidArgument, "no grid sizes left after applying the size cap");

    const fs::path scratch = config.scratch_dir.empty() ? fs::temp_directory_path() / "udfvault-bench" : config.scratch_dir;
    fs::create_directories(scratch);
    std::uint64_t needed = 0;
    for (auto n : sizes)
        needed = std::max(needed, scratch_bytes_needed(n));
    const auto space = fs::space(scratch);
    if (space.available < needed)
        fail(Errc::InsufficientSpace, "bench needs " + std::to_string(needed) + " bytes under " + scratch.string() + ", " +
                                          std::to_string(space.available) + " available");

    const auto identity = bench_identity(config.seed);
    udf::Engine engine(udf::BackendRegistry::with_defaults(std::make_shared<udf::HostedRegistry>()),
                       bench_store(scratch / "store", identity));
    const DType i32 = DType::scalar(TypeKind::Int32);
    const DType f64 = DType::scalar(TypeKind::Float64);

    BenchReport report;
    auto record = [&](std::string scenario, std::uint64_t n, std::string layout, std::uint64_t stored, const TimedRead& r) {
        report.rows.push_back({std::move(scenario), n, std::move(layout), stored, r.ns, fnv1a64(r.data.bytes)});
        const auto& row = report.rows.back();
        say(config, "  " + row.scenario + " " + row.layout + ": " + std::to_string(row.stored_bytes) + " bytes, " +
                        std::to_string(row.wall_time_ns / 1000000) + " ms");
        return row.checksum;
    };
    auto expect_same = [&](std::uint64_t a, std::uint64_t b, const std::string& what) {
        if (a != b)
            report.mismatches.push_back(what);
    };

    for (auto n : sizes) {
        say(config, "N=" + std::to_string(n));
        const fs::path file = scratch / ("bench_" + std::to_string(n) + ".sdc");
        const Shape shape{n, n};
        std::uint64_t phase = now_ns();
        auto lap = [&](const char* what) {
            const auto t = now_ns();
            say(config, std::string("  ") + what + ": " + std::to_string((t - phase) / 1000000) + " ms");
            phase = t;
        };
        {
            auto c = Container::create(file);
            {
                const Bands bands = generate_bands(n, config.seed);
                write_bands(c, bands);
                lap("bands written");
                {
                    DataBuffer grid;
                    grid.bytes.resize(n * n * sizeof(std::int32_t));
                    auto g = grid.view<std::int32_t>();
                    for (std::size_t i = 0; i < g.size(); ++i)
                        g[i] = grid_value(bands.nir[i], bands.red[i]);
                    c.create_dataset(contiguous("/grid_contiguous", i32, shape), grid);
                    lap("contiguous grid written");
                    DatasetMeta chunked = contiguous("/grid_chunked", i32, shape);
                    chunked.layout = Layout::Chunked;
                    chunked.chunk_shape = chunk_shape(n, config.chunk_cols);
                    chunked.filters = {filters::shuffle(sizeof(std::int32_t)), filters::deflate(config.deflate_level, config.deflate_strategy)};
                    c.create_dataset(chunked, grid);
                    lap("chunked grid written");
                }
                DataBuffer nd;
                nd.bytes.resize(n * n * sizeof(double));
                auto v = nd.view<double>();
                for (std::size_t i = 0; i < v.size(); ++i)
                    v[i] = ndvi(bands.nir[i], bands.red[i]);
                c.create_dataset(contiguous("/ndvi_contiguous", f64, shape), nd);
                lap("NDVI written");
            }
            udf::AttachRequest req;
            req.backend = "expr";
            req.output_shape = shape;
            req.inputs = {{"nir", "/Band5"}, {"red", "/Band4"}};
            req.source = std::string(kGridExpr);
            req.output_path = "/grid_udf";
            req.output_dtype = i32;
            engine.attach(c, req, identity);
            req.source = std::string(kNdviExpr);
            req.output_path = "/ndvi_udf";
            req.output_dtype = f64;
            engine.attach(c, req, identity);
        }

        std::uint64_t stored_grid = 0, stored_chunked = 0, stored_grid_udf = 0, stored_ndvi = 0, stored_ndvi_udf = 0;
        {
            auto c = Container::open(file);
            stored_grid = c.dataset("/grid_contiguous").stored_bytes();
            stored_chunked = c.dataset("/grid_chunked").stored_bytes();
            stored_grid_udf = c.dataset("/grid_udf").stored_bytes();
            stored_ndvi = c.dataset("/ndvi_contiguous").stored_bytes();
            stored_ndvi_udf = c.dataset("/ndvi_udf").stored_bytes();
        }
        const std::string tag = " at N=" + std::to_string(n);
        const auto grid_ref = record("grid", n, "contiguous", stored_grid, timed_read(file, "/grid_contiguous", engine));
        expect_same(grid_ref, record("grid", n, "chunked", stored_chunked, timed_read(file, "/grid_chunked", engine)),
                    "chunked grid differs from the contiguous grid" + tag);
        expect_same(grid_ref, record("grid", n, "udf", stored_grid_udf, timed_read(file, "/grid_udf", engine)),
                    "UDF grid differs from the contiguous grid" + tag);
        const auto ndvi_ref = record("ndvi", n, "contiguous", stored_ndvi, timed_read(file, "/ndvi_contiguous", engine));
        {
            const TimedRead udf = timed_read(file, "/ndvi_udf", engine);
            expect_same(ndvi_ref, record("ndvi", n, "udf", stored_ndvi_udf, udf), "UDF NDVI differs from the stored NDVI" + tag);
            // Element-by-element against the formula over freshly read bands,
            // so equality does not rest on the checksum alone.
            auto c = Container::open(file);
            const DataBuffer red = c.read_dataset("/Band4");
            const DataBuffer nir = c.read_dataset("/Band5");
            const auto r = red.view<std::int16_t>();
            const auto ni = nir.view<std::int16_t>();
            const auto out = udf.data.view<double>();
            std::uint64_t bad = 0;
            for (std::size_t i = 0; i < out.size(); ++i)
                bad += std::bit_cast<std::uint64_t>(out[i]) != std::bit_cast<std::uint64_t>(ndvi(ni[i], r[i]));
            if (bad != 0 || out.size() != n * n)
                report.mismatches.push_back(std::to_string(bad) + " UDF NDVI elements differ from the formula" + tag);
        }
        if (!config.keep_files)
            fs::remove(file);
    }
    return report;
}

} // namespace udfvault::bench
