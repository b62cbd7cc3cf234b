#pragma once

// Shared fixtures for the test binaries.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <random>
#include <string>

#include "udfvault/container.hpp"
#include "udfvault/error.hpp"
#include "udfvault/hosted.hpp"
#include "udfvault/trust.hpp"
#include "udfvault/udf/engine.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        std::random_device rd;
        std::mt19937_64 rng(rd());
        for (;;) {
            path_ = fs::temp_directory_path() / ("udfvault-test-" + std::to_string(rng()));
            if (fs::create_directory(path_))
                break;
        }
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// Deterministic signer: seed bytes are `tag`, `tag`+1, ...
inline udfvault::trust::Identity test_identity(std::uint8_t tag = 1, std::string name = "Test Signer",
                                               std::string email = "signer@example.org")
{
    udfvault::trust::Seed seed{};
    for (std::size_t i = 0; i < seed.size(); ++i)
        seed[i] = static_cast<std::uint8_t>(tag + i);
    udfvault::trust::Identity id{{}, udfvault::trust::SigningKey::from_seed(seed)};
    id.record.public_key = id.key.public_key();
    id.record.owner_name = std::move(name);
    id.record.owner_email = std::move(email);
    return id;
}

inline std::shared_ptr<udfvault::udf::HostedRegistry> builtin_hosted()
{
    auto reg = std::make_shared<udfvault::udf::HostedRegistry>();
    udfvault::hosted::register_builtins(*reg);
    return reg;
}

inline udfvault::udf::Engine make_engine(const fs::path& store_root,
                                         std::shared_ptr<const udfvault::udf::HostedRegistry> hosted = builtin_hosted(),
                                         udfvault::udf::EngineOptions options = {})
{
    return udfvault::udf::Engine(udfvault::udf::BackendRegistry::with_defaults(std::move(hosted), 2),
                                 udfvault::trust::TrustStore::open(store_root), options);
}

inline udfvault::DatasetMeta meta(std::string path, udfvault::DType dtype, udfvault::Shape shape)
{
    udfvault::DatasetMeta m;
    m.path = std::move(path);
    m.dtype = dtype;
    m.shape = std::move(shape);
    return m;
}

inline udfvault::DatasetMeta chunked(std::string path, udfvault::DType dtype, udfvault::Shape shape,
                                     udfvault::Shape chunk, udfvault::filters::FilterChain chain = {})
{
    auto m = meta(std::move(path), dtype, std::move(shape));
    m.layout = udfvault::Layout::Chunked;
    m.chunk_shape = std::move(chunk);
    m.filters = std::move(chain);
    return m;
}

inline udfvault::udf::AttachRequest request(std::string source, std::string backend, std::string output,
                                            udfvault::DType dtype, udfvault::Shape shape,
                                            std::vector<std::pair<std::string, std::string>> inputs)
{
    udfvault::udf::AttachRequest r;
    r.source = std::move(source);
    r.backend = std::move(backend);
    r.output_path = std::move(output);
    r.output_dtype = dtype;
    r.output_shape = std::move(shape);
    r.inputs = std::move(inputs);
    return r;
}

inline std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const fs::path& p, std::string_view text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

/// Error code thrown by `f`, or nullopt when it returns normally.
template <class F>
std::optional<udfvault::Errc> error_of(F&& f)
{
    try {
        f();
    } catch (const udfvault::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

inline std::string errc_str(std::optional<udfvault::Errc> e)
{
    return e ? std::string(udfvault::errc_name(*e)) : std::string("no error");
}

} // namespace testing
