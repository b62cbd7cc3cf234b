#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "udfvault/buffer.hpp"
#include "udfvault/dtype.hpp"
#include "udfvault/runtime.hpp"

namespace udfvault::udf {

/// What a backend learns about the dataset it compiles for.
struct CompileContext {
    std::vector<std::string> input_aliases;
    std::vector<std::string> input_paths;
    std::vector<DType> input_dtypes;
    std::vector<Shape> input_shapes;
    std::string output_path;
    DType output_dtype;
    Shape output_shape;
};

/// A language runtime. Implementations must be safe to call concurrently and
/// must touch the outside world only through the ExecutionEnv and lib::.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string name() const = 0;
    /// Backends that can reach resources need a profile with hosted_allowed.
    virtual bool requires_trust() const = 0;
    /// Throws CompileError with the language's own diagnostic.
    virtual Bytes compile(std::string_view source, const CompileContext& ctx) const = 0;
    /// Static checks run before the sandbox starts (e.g. the op budget).
    virtual void prepare(std::span<const std::uint8_t> object, const runtime::ExecutionEnv& env) const;
    virtual void execute(std::span<const std::uint8_t> object, runtime::ExecutionEnv& env) const = 0;
};

/// The elementwise expression language compiled to UXB1 bytecode.
class ExprBackend final : public Backend {
public:
    /// `workers` = 0 picks the hardware concurrency.
    explicit ExprBackend(unsigned workers = 0) : workers_(workers) {}

    std::string name() const override { return "expr"; }
    bool requires_trust() const override { return false; }
    Bytes compile(std::string_view source, const CompileContext& ctx) const override;
    void prepare(std::span<const std::uint8_t> object, const runtime::ExecutionEnv& env) const override;
    void execute(std::span<const std::uint8_t> object, runtime::ExecutionEnv& env) const override;

private:
    unsigned workers_;
};

using HostedArgs = std::map<std::string, std::string>;
using HostedFunction = std::function<void(runtime::ExecutionEnv&, const HostedArgs&)>;

/// Functions a host program exposes to hosted UDFs by name.
class HostedRegistry {
public:
    /// Throws InvalidArgument on a duplicate name.
    void add(std::string name, HostedFunction fn);
    /// Throws UnknownHostedFunction.
    const HostedFunction& find(std::string_view name) const;
    bool contains(std::string_view name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, HostedFunction, std::less<>> functions_;
};

/// Object code is the canonical JSON {"args": {...}, "function": name}, args
/// omitted when empty. Source is either a bare function name or that JSON.
class HostedBackend final : public Backend {
public:
    explicit HostedBackend(std::shared_ptr<const HostedRegistry> registry) : registry_(std::move(registry)) {}

    std::string name() const override { return "hosted"; }
    bool requires_trust() const override { return true; }
    Bytes compile(std::string_view source, const CompileContext& ctx) const override;
    void prepare(std::span<const std::uint8_t> object, const runtime::ExecutionEnv& env) const override;
    void execute(std::span<const std::uint8_t> object, runtime::ExecutionEnv& env) const override;

    struct Call {
        std::string function;
        HostedArgs args;
    };
    /// Throws UdfRuntimeError on a malformed object.
    static Call decode(std::span<const std::uint8_t> object);

private:
    std::shared_ptr<const HostedRegistry> registry_;
};

class BackendRegistry {
public:
    /// Throws DuplicateBackend.
    void add(std::shared_ptr<const Backend> backend);
    /// Throws UnknownBackend.
    std::shared_ptr<const Backend> find(std::string_view name) const;
    std::vector<std::string> names() const;

    /// "expr" plus "hosted" over `hosted`.
    static BackendRegistry with_defaults(std::shared_ptr<const HostedRegistry> hosted, unsigned workers = 0);

private:
    std::map<std::string, std::shared_ptr<const Backend>, std::less<>> backends_;
};

} // namespace udfvault::udf
