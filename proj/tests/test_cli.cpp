#include <doctest.h>

#include <json.hpp>

#include <sstream>

#include "cli.hpp"
#include "support.hpp"
#include "udfvault/bench.hpp"
#include "udfvault/csv_output.hpp"

using namespace udfvault;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    Run r;
    r.code = cli::run(std::move(args), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

/// Band4/Band5 of a non-square 1440 x 720 grid, and the NDVI a direct
/// loop computes from them.
DataBuffer write_landsat_like(const std::filesystem::path& file)
{
    const std::uint64_t rows = 1440, cols = 720;
    std::vector<std::int16_t> red(rows * cols), nir(rows * cols);
    std::uint64_t state = 7;
    for (auto& v : red)
        v = static_cast<std::int16_t>(1 + bench::splitmix64_next(state) % 10000);
    for (auto& v : nir)
        v = static_cast<std::int16_t>(1 + bench::splitmix64_next(state) % 10000);
    auto c = Container::create(file);
    c.create_dataset(testing::meta("/Band4", DType::scalar(TypeKind::Int16), {rows, cols}), make_buffer(red));
    c.create_dataset(testing::meta("/Band5", DType::scalar(TypeKind::Int16), {rows, cols}), make_buffer(nir));
    std::vector<double> ndvi(rows * cols);
    for (std::size_t i = 0; i < ndvi.size(); ++i) {
        const double n = nir[i], r = red[i];
        ndvi[i] = (n - r) / (n + r);
    }
    return make_buffer(ndvi);
}

std::string first_key_id(const std::string& keys_list)
{
    return keys_list.substr(0, keys_list.find('\t'));
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("attach then read --format csv reproduces the precomputed NDVI")
    {
        testing::TempDir dir;
        const auto file = (dir / "landsat.sdc").string();
        const auto store = (dir / "store").string();
        const DataBuffer expected = write_landsat_like(file);
        testing::spit(dir / "ndvi.expr", "(nir - red) / (nir + red)\n");

        const auto a = run({"--store", store, "attach", file, "--backend", "expr", "--source", (dir / "ndvi.expr").string(),
                            "--output", "/NDVI", "--dtype", "float64", "--shape", "1440x720", "--input", "nir=/Band5",
                            "--input", "red=/Band4"});
        CHECK_MESSAGE(a.code == cli::kOk, a.err);
        CHECK(a.out.rfind("attached /NDVI (expr, ", 0) == 0);

        const auto r = run({"--store", store, "read", file, "/NDVI", "--format", "csv"});
        REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
        const auto oracle = format_csv(expected, DType::scalar(TypeKind::Float64), {1440, 720});
        CHECK(r.out.size() == oracle.size());
        CHECK(r.out == oracle);
        CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1440);

        const auto raw = run({"--store", store, "read", file, "/NDVI", "--format", "raw"});
        CHECK(raw.out == std::string(expected.bytes.begin(), expected.bytes.end()));
    }

    TEST_CASE("inspect prints the header and verification without running")
    {
        testing::TempDir dir;
        const auto file = (dir / "i.sdc").string();
        const auto store = (dir / "store").string();
        CHECK(run({"create-sample", file, "--n", "4"}).code == cli::kOk);
        testing::spit(dir / "src.expr", "nir * 2 - red");
        CHECK(run({"--store", store, "attach", file, "--backend", "expr", "--source", (dir / "src.expr").string(), "--output",
                   "derived/x", "--dtype", "int32", "--shape", "4x4", "--input", "nir=/Band5", "--input", "red=/Band4",
                   "--embed-source"})
                  .code == cli::kOk);
        const auto r = run({"--store", store, "inspect", file, "/derived/x"});
        REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
        const auto doc = nlohmann::json::parse(r.out);
        CHECK(doc["dataset"] == "/derived/x");
        CHECK(doc["header"]["backend"] == "expr");
        CHECK(doc["header"]["input_datasets"] == nlohmann::json::array({"/Band5", "/Band4"}));
        CHECK(doc["header"]["output_datatype"] == "int32");
        CHECK(doc["header"]["output_resolution"] == nlohmann::json::array({4, 4}));
        CHECK(doc["header"]["source_code"] == "nir * 2 - red");
        CHECK(doc["bytecode_size"] == doc["header"]["bytecode_size"]);
        CHECK(doc["verification"]["signature_valid"] == true);
        CHECK(doc["verification"]["status"] == "valid");
        // Never read, so never imported.
        CHECK(doc["verification"]["profile"].is_null());
        CHECK(run({"--store", store, "keys", "list"}).out.empty());
    }

    TEST_CASE("moving the signer to trusted lets a hosted UDF run")
    {
        testing::TempDir dir;
        const auto file = (dir / "h.sdc").string();
        const auto store = dir / "store";
        CHECK(run({"create-sample", file, "--n", "2"}).code == cli::kOk);
        testing::spit(dir / "table.csv", "v\n1.5\n2.5\n");
        testing::spit(dir / "hosted.json", R"({"function":"csv_project","args":{"path":")" + (dir / "table.csv").string() +
                                               R"("}})");
        CHECK(run({"--store", store.string(), "attach", file, "--backend", "hosted", "--source", (dir / "hosted.json").string(),
                   "--output", "/col", "--dtype", "float64", "--shape", "2"})
                  .code == cli::kOk);
        // The trusted profile gets read access to the table.
        {
            trust::Rules rules;
            rules.capabilities.hosted_allowed = true;
            rules.capabilities.fs_read = {dir.path().string()};
            testing::spit(store / "profiles" / "trusted" / "rules.json", rules.to_json());
        }

        const auto denied = run({"--store", store.string(), "read", file, "/col"});
        CHECK(denied.code == cli::kOperational);
        CHECK(denied.err.rfind("error: TrustViolation: ", 0) == 0);

        const auto listed = run({"--store", store.string(), "keys", "list"});
        CHECK(listed.out.find("\tuntrusted\t") != std::string::npos);
        const auto moved = run({"--store", store.string(), "keys", "move", first_key_id(listed.out).substr(0, 8), "trusted"});
        CHECK_MESSAGE(moved.code == cli::kOk, moved.err);

        const auto ok = run({"--store", store.string(), "read", file, "/col"});
        CHECK_MESSAGE(ok.code == cli::kOk, ok.err);
        CHECK(ok.out == "1.5\n2.5\n");
    }

    TEST_CASE("keys import into a named profile")
    {
        testing::TempDir dir;
        const auto store = (dir / "store").string();
        const auto id = testing::test_identity(70, "Grace", "grace@example.org");
        testing::spit(dir / "grace.json", id.record.to_json());
        const auto r = run({"--store", store, "keys", "import", (dir / "grace.json").string(), "--profile", "lab"});
        CHECK_MESSAGE(r.code == cli::kOk, r.err);
        CHECK(r.out == "imported " + id.record.id() + " into lab\n");
        CHECK(run({"--store", store, "keys", "list"}).out == id.record.id() + "\tlab\tGrace <grace@example.org>\n");
        const auto again = run({"--store", store, "keys", "import", (dir / "grace.json").string()});
        CHECK(again.code == cli::kOperational);
        CHECK(again.err.rfind("error: DuplicateKey: ", 0) == 0);
    }

    TEST_CASE("create-sample matches the deterministic generator")
    {
        testing::TempDir dir;
        const auto file = (dir / "s.sdc").string();
        CHECK(run({"create-sample", file, "--n", "2", "--seed", "42"}).code == cli::kOk);
        const auto r = run({"--store", (dir / "store").string(), "read", file, "/Band4"});
        CHECK(r.out == "5414,2292\n3859,5765\n");
        CHECK(run({"--store", (dir / "store").string(), "read", file, "/Band5"}).out == "3251,9063\n4926,5909\n");
    }

    TEST_CASE("exit codes: 0 success, 1 usage, 2 operational")
    {
        testing::TempDir dir;
        CHECK(run({"--help"}).code == cli::kOk);
        CHECK(run({"--help"}).out.find("attach") != std::string::npos);
        CHECK(run({}).code == cli::kUsage);
        CHECK(run({"frobnicate"}).code == cli::kUsage);
        CHECK(run({"read"}).code == cli::kUsage);
        CHECK(run({"read", "a", "b", "--format", "xml"}).code == cli::kUsage);
        CHECK(run({"create-sample", "x", "--n", "0"}).code == cli::kUsage);
        const auto missing = run({"--store", (dir / "store").string(), "read", (dir / "nope.sdc").string(), "/x"});
        CHECK(missing.code == cli::kOperational);
        CHECK(missing.err.rfind("error: ", 0) == 0);

        const auto file = (dir / "f.sdc").string();
        run({"create-sample", file, "--n", "2"});
        const auto bad_input = run({"--store", (dir / "store").string(), "attach", file, "--backend", "expr", "--source", file,
                                    "--output", "/o", "--dtype", "float64", "--shape", "2x2", "--input", "novalue"});
        CHECK(bad_input.code == cli::kOperational);
        CHECK(bad_input.err.find("InvalidArgument") != std::string::npos);
        testing::spit(dir / "broken.expr", "min(nir, red");
        const auto compile = run({"--store", (dir / "store").string(), "attach", file, "--backend", "expr", "--source",
                                  (dir / "broken.expr").string(), "--output", "/o", "--dtype", "float64", "--shape", "2x2",
                                  "--input", "nir=/Band5", "--input", "red=/Band4"});
        CHECK(compile.code == cli::kOperational);
        CHECK(compile.err.rfind("error: CompileError: ", 0) == 0);
        CHECK(compile.err.find("offset 12") != std::string::npos);
        const auto ds = run({"--store", (dir / "store").string(), "read", file, "/missing"});
        CHECK(ds.code == cli::kOperational);
        CHECK(ds.err.rfind("error: NotFound: ", 0) == 0);
    }

    TEST_CASE("bench subcommand writes the report schema")
    {
        testing::TempDir dir;
        const auto r = run({"--store", (dir / "store").string(), "bench", "--sizes", "64,32", "--scratch", dir.path().string(),
                            "--chunk-cols", "16"});
        REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
        CHECK(r.out.rfind("scenario,N,layout,stored_bytes,wall_time_ns,checksum\n", 0) == 0);
        CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1 + 2 * 5);
        CHECK(r.out.find("grid,64,udf,") != std::string::npos);
    }
}
