#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include "support.hpp"
#include "udfvault/runtime.hpp"

using namespace udfvault;
using namespace udfvault::runtime;
using namespace std::chrono_literals;

namespace {

const DType i16 = DType::scalar(TypeKind::Int16);
const DType f32 = DType::scalar(TypeKind::Float32);

InputSlot slot(std::string alias, std::string path, DType dtype, Shape shape, DataBuffer data)
{
    return {std::move(alias), std::move(path), dtype, std::move(shape), std::make_shared<const DataBuffer>(std::move(data))};
}

/// Red/NIR int16 bands and a float NDVI output.
ExecutionEnv ndvi_env(std::uint64_t rows = 1440, std::uint64_t cols = 720)
{
    ExecutionEnv env;
    const std::uint64_t n = rows * cols;
    env.inputs.push_back(slot("Red", "/Band4", i16, {rows, cols}, make_buffer(std::vector<std::int16_t>(n, 2))));
    env.inputs.push_back(slot("NIR", "/Band5", i16, {rows, cols}, make_buffer(std::vector<std::int16_t>(n, 6))));
    env.output.path = "/NDVI";
    env.output.dtype = f32;
    env.output.shape = {rows, cols};
    return env;
}

DType station_compound()
{
    return DType::compound({{"Serial number", DType::scalar(TypeKind::Int64), 0},
                            {"Temperature (F)", DType::scalar(TypeKind::Float64), 24},
                            {"Pressure (inHg)", DType::scalar(TypeKind::Float64), 32}},
                           40);
}

} // namespace

TEST_SUITE("runtime")
{
    TEST_CASE("get_data resolves the output writable and inputs read-only")
    {
        auto env = ndvi_env(4, 2);
        env.output.data.bytes.resize(8 * 4);
        auto out = lib::get_data(env, "NDVI");
        CHECK(out.output);
        CHECK(out.writable.size() == 32);
        CHECK(out.writable.data() == env.output.data.bytes.data());
        auto red = lib::get_data(env, "Red");
        CHECK_FALSE(red.output);
        CHECK(red.writable.empty());
        CHECK(red.as<std::int16_t>()[0] == 2);
        CHECK(lib::get_data(env, "/Band5").as<std::int16_t>()[3] == 6);
        CHECK(lib::get_data(env, "/NDVI").output);
        CHECK(testing::error_of([&] { lib::get_data(env, "Bogus"); }) == Errc::UnknownName);
    }

    TEST_CASE("get_dims and get_type")
    {
        auto env = ndvi_env();
        CHECK(lib::get_dims(env, "NDVI") == Shape{1440, 720});
        CHECK(lib::get_type(env, "Red") == "int16");
        ExecutionEnv scalar;
        scalar.output.path = "/s";
        scalar.output.dtype = f32;
        scalar.output.shape = {1};
        CHECK(lib::get_dims(scalar, "s") == Shape{1});
        CHECK(testing::error_of([&] { lib::get_dims(env, "nope"); }) == Errc::UnknownName);
    }

    TEST_CASE("weather-station compound maps to members and a 16 byte pad")
    {
        const auto view = build_compound_view(station_compound());
        REQUIRE(view.members.size() == 4);
        CHECK(view.members[0].name == "serial_number");
        CHECK(view.members[0].offset == 0);
        CHECK(view.members[0].length == 8);
        CHECK(view.members[1].name == "_pad0");
        CHECK(view.members[1].is_pad());
        CHECK(view.members[1].offset == 8);
        CHECK(view.members[1].length == 16);
        CHECK(view.members[2].name == "temperature");
        CHECK(view.members[2].offset == 24);
        CHECK(view.members[3].name == "pressure");
        CHECK(view.members[3].offset == 32);
        CHECK(view.record_size == 40);
        CHECK(view.member("pressure").raw_name == "Pressure (inHg)");
        CHECK(testing::error_of([&] { view.member("humidity"); }) == Errc::UnknownName);
    }

    TEST_CASE("sanitization vectors")
    {
        CHECK(sanitize_member_name("Serial number") == "serial_number");
        CHECK(sanitize_member_name("Temperature (F)") == "temperature");
        CHECK(sanitize_member_name("Pressure (inHg)") == "pressure");
        CHECK(sanitize_member_name("  Wind-Speed [m/s]") == "wind_speed");
        CHECK(sanitize_member_name("x{1}") == "x");
    }

    TEST_CASE("members that sanitize alike collide")
    {
        const DType t = DType::compound({{"A(x)", DType::scalar(TypeKind::Float64), 0},
                                         {"A[y]", DType::scalar(TypeKind::Float64), 8}},
                                        16);
        CHECK(testing::error_of([&] { build_compound_view(t); }) == Errc::NameCollision);
        const DType empty = DType::compound({{"(only units)", DType::scalar(TypeKind::Int8), 0}}, 1);
        CHECK(testing::error_of([&] { build_compound_view(empty); }) == Errc::InvalidArgument);
    }

    TEST_CASE("trailing storage becomes a pad too")
    {
        const DType t = DType::compound({{"a", DType::scalar(TypeKind::Int8), 0}, {"b", DType::scalar(TypeKind::Int8), 4}}, 12);
        const auto view = build_compound_view(t);
        REQUIRE(view.members.size() == 4);
        CHECK(view.members[1].name == "_pad0");
        CHECK(view.members[3].name == "_pad1");
        CHECK(view.members[3].offset == 5);
        CHECK(view.members[3].length == 7);
    }

    TEST_CASE("sanitize is idempotent")
    {
        std::mt19937_64 rng(17);
        const std::string alphabet = "aB z-_([{)]}\t9Q.";
        for (int k = 0; k < 3000; ++k) {
            std::string s;
            for (std::size_t n = rng() % 14; n > 0; --n)
                s.push_back(alphabet[rng() % alphabet.size()]);
            const auto once = sanitize_member_name(s);
            CHECK(sanitize_member_name(once) == once);
        }
    }

    TEST_CASE("views account for every byte of random compounds")
    {
        std::mt19937_64 rng(23);
        const std::vector<DType> scalars{DType::scalar(TypeKind::Int8), DType::scalar(TypeKind::Int32),
                                         DType::scalar(TypeKind::Float64), DType::fixed_string(3)};
        for (int k = 0; k < 300; ++k) {
            std::vector<CompoundMember> members;
            std::size_t offset = 0;
            for (std::size_t m = 0, n = 1 + rng() % 5; m < n; ++m) {
                offset += rng() % 4;
                const DType t = scalars[rng() % scalars.size()];
                members.push_back({"Field " + std::to_string(m) + " (unit)", t, offset});
                offset += t.size();
            }
            const std::size_t size = offset + rng() % 5;
            const auto view = build_compound_view(DType::compound(members, size));
            std::size_t total = 0, cursor = 0;
            for (const auto& vm : view.members) {
                CHECK(vm.offset == cursor);
                cursor += vm.length;
                total += vm.length;
            }
            CHECK(total == size);
        }
    }

    TEST_CASE("string access")
    {
        ExecutionEnv env;
        env.inputs.push_back(slot("names", "/names", DType::fixed_string(8), {2}, make_fixed_string_buffer({"Red", "NIR"}, 8)));
        // Heap laid out by hand: "Band" at offset 0, "Red" at 8, "NIR" at 15.
        DataBuffer var;
        CHECK(heap_append(var.heap, "Band") == 0);
        CHECK(heap_append(var.heap, "Red") == 8);
        CHECK(heap_append(var.heap, "NIR") == 15);
        for (std::uint32_t off : {0u, 8u, 15u})
            append_le(var.bytes, off);
        env.inputs.push_back(slot("labels", "/labels", DType::var_string(), {3}, var));
        env.output.path = "/out";
        env.output.dtype = DType::fixed_string(8);
        env.output.shape = {2};
        env.output.data.bytes.resize(16);

        CHECK(lib::string_get(env, "names", 0) == "Red");
        CHECK(lib::string_get(env, "labels", 2) == "NIR");
        CHECK(testing::error_of([&] { lib::string_get(env, "labels", 3); }) == Errc::OutOfBounds);

        lib::string_set(env, "out", 1, "Hendrix");
        CHECK(lib::string_get(env, "out", 1) == "Hendrix");
        CHECK(testing::error_of([&] { lib::string_set(env, "out", 0, "Electric Ladyland"); }) == Errc::StringTooLong);
        CHECK(lib::string_get(env, "out", 0).empty());
        CHECK(testing::error_of([&] { lib::string_set(env, "names", 0, "x"); }) == Errc::CapabilityDenied);

        ExecutionEnv venv;
        venv.output.path = "/v";
        venv.output.dtype = DType::var_string();
        venv.output.shape = {1};
        venv.output.data.bytes.resize(4);
        CHECK(testing::error_of([&] { lib::string_set(venv, "v", 0, "x"); }) == Errc::VarStringWriteUnsupported);
    }

    TEST_CASE("compound string members")
    {
        const DType rec = DType::compound({{"Id", DType::scalar(TypeKind::Int32), 0}, {"Label (text)", DType::fixed_string(6), 4}}, 10);
        ExecutionEnv env;
        env.output.path = "/r";
        env.output.dtype = rec;
        env.output.shape = {2};
        env.output.data.bytes.resize(20);
        lib::string_set(env, "r", 1, "abc", "label");
        CHECK(lib::string_get(env, "r", 1, "label") == "abc");
        CHECK(testing::error_of([&] { lib::string_set(env, "r", 0, "abcdefg", "label"); }) == Errc::StringTooLong);
        CHECK(testing::error_of([&] { lib::string_get(env, "r", 0, "id"); }) == Errc::InputDTypeUnsupported);
    }

    TEST_CASE("file and network capabilities")
    {
        testing::TempDir dir;
        testing::spit(dir / "ok.txt", "hello");
        testing::spit(dir / "secret.txt", "no");
        std::filesystem::create_directories(dir / "allowed");
        testing::spit(dir / "allowed" / "a.txt", "yes");

        ExecutionEnv env;
        env.capabilities.fs_read = {(dir / "allowed").string()};
        env.capabilities.fs_write = {(dir / "allowed").string()};
        CHECK(lib::read_file(env, dir / "allowed" / "a.txt") == "yes");
        try {
            lib::read_file(env, dir / "secret.txt");
            FAIL("expected CapabilityDenied");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::CapabilityDenied);
            CHECK(std::string(e.what()).find("secret.txt") != std::string::npos);
        }
        CHECK(testing::error_of([&] { lib::read_file(env, dir / "allowed" / ".." / "secret.txt"); }) == Errc::CapabilityDenied);
        lib::write_file(env, dir / "allowed" / "w.txt", "written");
        CHECK(testing::slurp(dir / "allowed" / "w.txt") == "written");
        CHECK(testing::error_of([&] { lib::write_file(env, dir / "w.txt", "x"); }) == Errc::CapabilityDenied);
        env.capabilities.network = true;
        CHECK(testing::error_of([&] { lib::connect(env, "example.org:80"); }) == Errc::CapabilityDenied);

        CHECK(path_allowed("/data/in/x.csv", {"/data/in"}));
        CHECK_FALSE(path_allowed("/data/input/x.csv", {"/data/in"}));
        CHECK_FALSE(path_allowed("/data/in/../etc/passwd", {"/data/in"}));
        CHECK_FALSE(path_allowed("/x", {}));
    }

    TEST_CASE("sandbox returns output only on success")
    {
        auto env = ndvi_env(4, 4);
        const auto ok = run_sandboxed(env, [](ExecutionEnv& e) {
            auto out = lib::get_data(e, "NDVI").as_mut<float>();
            const auto red = lib::get_data(e, "Red").as<std::int16_t>();
            const auto nir = lib::get_data(e, "NIR").as<std::int16_t>();
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = static_cast<float>(nir[i] - red[i]) / static_cast<float>(nir[i] + red[i]);
        });
        REQUIRE(ok.bytes.size() == 64);
        CHECK(ok.view<float>()[15] == 0.5f);
        CHECK(env.output.data.bytes.empty()); // the caller's env is never the one written
    }

    TEST_CASE("sandbox error mapping")
    {
        auto env = ndvi_env(2, 2);
        CHECK(testing::error_of([&] { run_sandboxed(env, [](ExecutionEnv&) { throw std::runtime_error("boom"); }); }) ==
              Errc::UdfRuntimeError);
        CHECK(testing::error_of([&] { run_sandboxed(env, [](ExecutionEnv&) { throw 42; }); }) == Errc::UdfPanic);
        CHECK(testing::error_of([&] { run_sandboxed(env, [](ExecutionEnv&) { throw std::bad_alloc(); }); }) ==
              Errc::MemoryCapExceeded);
        CHECK(testing::error_of([&] { run_sandboxed(env, [](ExecutionEnv& e) { lib::get_data(e, "Bogus"); }); }) ==
              Errc::UnknownName);
        CHECK(testing::error_of([&] { run_sandboxed(env, [](ExecutionEnv& e) { lib::reserve(e, 4ull << 30); }); }) ==
              Errc::MemoryCapExceeded);
    }

    TEST_CASE("inputs and output are charged against memory_cap before starting")
    {
        auto env = ndvi_env(4, 4);
        CHECK(materialized_bytes(env) == 16 * 2 + 16 * 2 + 16 * 4);
        env.limits.memory_cap = materialized_bytes(env) - 1;
        bool ran = false;
        CHECK(testing::error_of([&] { run_sandboxed(env, [&](ExecutionEnv&) { ran = true; }); }) == Errc::MemoryCapExceeded);
        CHECK_FALSE(ran);
    }

    TEST_CASE("sleeping past wall_timeout is a Timeout with nothing delivered")
    {
        auto env = ndvi_env(2, 2);
        env.limits.wall_timeout = 100ms;
        std::atomic<bool> wrote{false};
        const auto t0 = std::chrono::steady_clock::now();
        CHECK(testing::error_of([&] {
                  run_sandboxed(env, [&](ExecutionEnv& e) {
                      lib::get_data(e, "NDVI").as_mut<float>()[0] = 1.0f;
                      wrote = true;
                      lib::sleep_for(e, 10s);
                  });
              }) == Errc::Timeout);
        CHECK(wrote);
        CHECK(std::chrono::steady_clock::now() - t0 < 2s);
    }

    TEST_CASE("a thunk ignoring the stop request is abandoned after the grace period")
    {
        auto env = ndvi_env(2, 2);
        env.limits.wall_timeout = 50ms;
        auto spinning = std::make_shared<std::atomic<bool>>(true);
        const auto t0 = std::chrono::steady_clock::now();
        SandboxOptions opts;
        opts.grace = 50ms;
        CHECK(testing::error_of([&] {
                  run_sandboxed(
                      env,
                      [spinning](ExecutionEnv&) {
                          while (spinning->load())
                              std::this_thread::sleep_for(1ms);
                      },
                      opts);
              }) == Errc::Timeout);
        CHECK(std::chrono::steady_clock::now() - t0 < 1s);
        spinning->store(false);
    }

    TEST_CASE("process isolation: success, library errors and timeouts")
    {
        SandboxOptions iso;
        iso.process_isolation = true;
        auto env = ndvi_env(2, 2);
        const auto out = run_sandboxed(
            env, [](ExecutionEnv& e) { lib::get_data(e, "NDVI").as_mut<float>()[3] = 7.0f; }, iso);
        CHECK(out.view<float>()[3] == 7.0f);
        CHECK(testing::error_of([&] {
                  run_sandboxed(env, [](ExecutionEnv& e) { lib::read_file(e, "/etc/hostname"); }, iso);
              }) == Errc::CapabilityDenied);
        CHECK(testing::error_of([&] { run_sandboxed(env, [](ExecutionEnv&) { throw 1; }, iso); }) == Errc::UdfPanic);
        env.limits.wall_timeout = 100ms;
        CHECK(testing::error_of([&] {
                  run_sandboxed(
                      env, [](ExecutionEnv&) {
                          for (;;)
                              std::this_thread::sleep_for(1ms);
                      },
                      iso);
              }) == Errc::Timeout);
    }
}
