#include <algorithm>
#include <cctype>
#include <thread>

#include <json.hpp>

#include "udfvault/error.hpp"
#include "udfvault/exprlang/program.hpp"
#include "udfvault/exprlang/vm.hpp"
#include "udfvault/udf/backend.hpp"

namespace udfvault::udf {

using nlohmann::json;

namespace {

std::vector<exprlang::InputView> input_views(const runtime::ExecutionEnv& env)
{
    std::vector<exprlang::InputView> views;
    views.reserve(env.inputs.size());
    for (const auto& in : env.inputs)
        views.push_back({in.data ? std::span<const std::uint8_t>(in.data->bytes) : std::span<const std::uint8_t>{}, in.dtype});
    return views;
}

bool is_identifier(std::string_view s)
{
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
        return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

} // namespace

void Backend::prepare(std::span<const std::uint8_t>, const runtime::ExecutionEnv&) const {}

Bytes ExprBackend::compile(std::string_view source, const CompileContext& ctx) const
{
    if (!ctx.output_dtype.is_numeric())
        fail(Errc::InputDTypeUnsupported, "the expr backend produces numeric outputs only, not " + ctx.output_dtype.name());
    for (std::size_t k = 0; k < ctx.input_dtypes.size(); ++k) {
        if (!ctx.input_dtypes[k].is_numeric())
            fail(Errc::InputDTypeUnsupported,
                 "input " + ctx.input_paths[k] + " has type " + ctx.input_dtypes[k].name() + "; the expr backend reads numbers only");
        if (ctx.input_shapes[k] != ctx.output_shape)
            fail(Errc::ShapeMismatch, "input " + ctx.input_paths[k] + " has shape " + shape_to_string(ctx.input_shapes[k]) +
                                          ", output has " + shape_to_string(ctx.output_shape));
    }
    try {
        return exprlang::serialize(exprlang::compile(source, ctx.input_aliases));
    } catch (const Error& e) {
        std::string where = e.offset() ? " at offset " + std::to_string(*e.offset()) : "";
        throw Error(Errc::CompileError, std::string(errc_name(e.code())) + where + ": " + e.what(), e.offset());
    }
}

void ExprBackend::prepare(std::span<const std::uint8_t> object, const runtime::ExecutionEnv& env) const
{
    const auto program = exprlang::deserialize(object);
    const auto views = input_views(env);
    exprlang::validate(program, views, env.output.shape, env.output.dtype, env.limits.op_budget);
}

void ExprBackend::execute(std::span<const std::uint8_t> object, runtime::ExecutionEnv& env) const
{
    const auto program = exprlang::deserialize(object);
    const auto views = input_views(env);
    exprlang::EvalOptions options;
    options.op_budget = env.limits.op_budget;
    options.workers = workers_ ? workers_ : std::max(1u, std::thread::hardware_concurrency());
    options.stop = env.stop;
    exprlang::evaluate_into(program, views, env.output.shape, env.output.dtype, env.output.data.bytes, options);
}

void HostedRegistry::add(std::string name, HostedFunction fn)
{
    if (!is_identifier(name))
        fail(Errc::InvalidArgument, "hosted function name '" + name + "' is not an identifier");
    if (!functions_.emplace(name, std::move(fn)).second)
        fail(Errc::InvalidArgument, "hosted function '" + name + "' registered twice");
}

const HostedFunction& HostedRegistry::find(std::string_view name) const
{
    auto it = functions_.find(name);
    if (it == functions_.end())
        fail(Errc::UnknownHostedFunction, "no hosted function named '" + std::string(name) + "' is registered");
    return it->second;
}

bool HostedRegistry::contains(std::string_view name) const
{
    return functions_.find(name) != functions_.end();
}

std::vector<std::string> HostedRegistry::names() const
{
    std::vector<std::string> out;
    for (const auto& [name, fn] : functions_)
        out.push_back(name);
    return out;
}

Bytes HostedBackend::compile(std::string_view source, const CompileContext&) const
{
    auto first = source.find_first_not_of(" \t\r\n");
    auto last = source.find_last_not_of(" \t\r\n");
    const std::string_view text = first == std::string_view::npos ? std::string_view{} : source.substr(first, last - first + 1);
    Call call;
    if (!text.empty() && text.front() == '{') {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            fail(Errc::CompileError, std::string("hosted source is not valid JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("function") || !j["function"].is_string())
            fail(Errc::CompileError, "hosted source needs a \"function\" string");
        call.function = j["function"].get<std::string>();
        for (const auto& [k, v] : j.items()) {
            if (k != "function" && k != "args")
                fail(Errc::CompileError, "unexpected field \"" + k + "\" in hosted source");
        }
        if (j.contains("args")) {
            if (!j["args"].is_object())
                fail(Errc::CompileError, "\"args\" must be an object");
            for (const auto& [k, v] : j["args"].items()) {
                if (v.is_structured() || v.is_null())
                    fail(Errc::CompileError, "argument \"" + k + "\" must be a string, number or boolean");
                call.args[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
        }
    } else {
        call.function = std::string(text);
    }
    if (!is_identifier(call.function))
        fail(Errc::CompileError, "hosted function name '" + call.function + "' is not an identifier");
    if (!registry_->contains(call.function))
        fail(Errc::CompileError, "no hosted function named '" + call.function + "' is registered");
    json object{{"function", call.function}};
    if (!call.args.empty())
        object["args"] = call.args;
    const std::string out = object.dump();
    return Bytes(out.begin(), out.end());
}

HostedBackend::Call HostedBackend::decode(std::span<const std::uint8_t> object)
{
    Call call;
    try {
        const json j = json::parse(object.begin(), object.end());
        call.function = j.at("function").get<std::string>();
        if (j.contains("args"))
            call.args = j["args"].get<HostedArgs>();
    } catch (const json::exception& e) {
        fail(Errc::UdfRuntimeError, std::string("malformed hosted object: ") + e.what());
    }
    return call;
}

void HostedBackend::prepare(std::span<const std::uint8_t> object, const runtime::ExecutionEnv&) const
{
    registry_->find(decode(object).function);
}

void HostedBackend::execute(std::span<const std::uint8_t> object, runtime::ExecutionEnv& env) const
{
    const Call call = decode(object);
    registry_->find(call.function)(env, call.args);
}

void BackendRegistry::add(std::shared_ptr<const Backend> backend)
{
    auto name = backend->name();
    if (!backends_.emplace(name, std::move(backend)).second)
        fail(Errc::DuplicateBackend, "backend '" + name + "' is already registered");
}

std::shared_ptr<const Backend> BackendRegistry::find(std::string_view name) const
{
    auto it = backends_.find(name);
    if (it == backends_.end())
        fail(Errc::UnknownBackend, "no backend named '" + std::string(name) + "' is registered");
    return it->second;
}

std::vector<std::string> BackendRegistry::names() const
{
    std::vector<std::string> out;
    for (const auto& [name, b] : backends_)
        out.push_back(name);
    return out;
}

BackendRegistry BackendRegistry::with_defaults(std::shared_ptr<const HostedRegistry> hosted, unsigned workers)
{
    BackendRegistry r;
    r.add(std::make_shared<ExprBackend>(workers));
    r.add(std::make_shared<HostedBackend>(std::move(hosted)));
    return r;
}

} // namespace udfvault::udf
