#include "udfvault/udf/engine.hpp"

#include <algorithm>

#include "udfvault/error.hpp"

namespace udfvault::udf {

namespace {

// UDF datasets currently being materialized on this thread, outermost first.
thread_local std::vector<std::string> t_active;

class ActiveGuard {
public:
    explicit ActiveGuard(const std::string& path)
    {
        if (std::find(t_active.begin(), t_active.end(), path) != t_active.end()) {
            std::string chain;
            for (const auto& p : t_active)
                chain += p + " -> ";
            fail(Errc::CyclicDependency, "UDF inputs form a cycle: " + chain + path);
        }
        t_active.push_back(path);
    }
    ~ActiveGuard() { t_active.pop_back(); }
    ActiveGuard(const ActiveGuard&) = delete;
    ActiveGuard& operator=(const ActiveGuard&) = delete;
};

[[noreturn]] void unauthentic(const std::string& why)
{
    fail(Errc::SignatureInvalid, "payload signature check failed: " + why);
}

} // namespace

struct Engine::Verified {
    UdfMetadata meta;
    std::shared_ptr<const Bytes> object;
    trust::PublicKey key{};
};

Engine::Engine(BackendRegistry backends, trust::TrustStore store, EngineOptions options)
    : backends_(std::move(backends)), store_(std::move(store)), options_(options)
{
}

UdfMetadata Engine::attach(Container& container, const AttachRequest& request, const trust::Identity& signer) const
{
    const std::string out_path = normalize_path(request.output_path);
    if (container.exists(out_path))
        fail(Errc::DuplicatePath, out_path + " already exists");
    if (request.output_dtype.has_heap_refs() || request.output_dtype.is_compound())
        fail(Errc::InputDTypeUnsupported, "UDF outputs must be numeric or fixed-length strings, not " +
                                              request.output_dtype.name());
    if (request.output_shape.empty() ||
        std::any_of(request.output_shape.begin(), request.output_shape.end(), [](auto e) { return e == 0; }))
        fail(Errc::ShapeMismatch, "output extents must all be >= 1");
    const auto backend = backends_.find(request.backend);

    CompileContext ctx;
    ctx.output_path = out_path;
    ctx.output_dtype = request.output_dtype;
    ctx.output_shape = request.output_shape;
    UdfMetadata meta;
    for (const auto& [alias, raw_path] : request.inputs) {
        const std::string path = normalize_path(raw_path);
        const DatasetMeta* in = container.find(path);
        if (!in)
            fail(Errc::MissingInput, "input " + path + " does not exist");
        ctx.input_aliases.push_back(alias);
        ctx.input_paths.push_back(path);
        ctx.input_dtypes.push_back(in->dtype);
        ctx.input_shapes.push_back(in->shape);
        meta.input_datasets.push_back(path);
        meta.input_aliases.push_back(alias);
    }

    const Bytes object = backend->compile(request.source, ctx);
    meta.backend = backend->name();
    meta.bytecode_size = object.size();
    meta.output_dataset = out_path;
    meta.output_datatype = request.output_dtype.name();
    meta.output_resolution = request.output_shape;
    meta.signature.name = signer.record.owner_name;
    meta.signature.email = signer.record.owner_email;
    meta.signature.public_key = trust::base64_encode(signer.key.public_key());
    if (request.embed_source)
        meta.source_code = request.source;
    meta.signature.payload_signature = trust::base64_encode(signer.key.sign(signed_bytes(meta, object)));

    DatasetMeta dm;
    dm.path = out_path;
    dm.dtype = request.output_dtype;
    dm.shape = request.output_shape;
    container.store_udf_dataset(std::move(dm), build_payload(meta, object));
    return meta;
}

Engine::Verified Engine::verify_payload(std::span<const std::uint8_t> payload) const
{
    // A header that cannot even be parsed back into the signed form is as
    // unauthenticated as one whose signature does not match.
    ParsedPayload parsed;
    try {
        parsed = parse_payload(payload);
    } catch (const Error& e) {
        unauthentic(e.what());
    }
    if (parsed.header != header_json(parsed.meta))
        unauthentic("header is not in canonical form");
    Verified v;
    Bytes signature;
    try {
        v.key = trust::public_key_from_base64(parsed.meta.signature.public_key);
        signature = trust::base64_decode(parsed.meta.signature.payload_signature);
    } catch (const Error& e) {
        unauthentic(e.what());
    }
    if (!trust::verify(v.key, signed_bytes(parsed.meta, parsed.object), signature))
        unauthentic("signature does not match the header and object");
    v.meta = std::move(parsed.meta);
    v.object = std::make_shared<const Bytes>(parsed.object.begin(), parsed.object.end());
    return v;
}

DataBuffer Engine::decode_and_execute(Container& container, std::string_view path)
{
    const DatasetMeta& meta = container.dataset(path);
    if (!meta.is_udf())
        fail(Errc::InvalidArgument, meta.path + " is not a UDF dataset");
    const DatasetMeta copy = meta;
    return execute_payload(container, copy, container.read_udf_payload(copy.path));
}

DataBuffer Engine::execute_payload(Container& container, const DatasetMeta& meta, std::span<const std::uint8_t> payload)
{
    ActiveGuard guard(meta.path);
    const Verified v = verify_payload(payload);
    return execute_verified(container, meta, v);
}

DataBuffer Engine::execute_verified(Container& container, const DatasetMeta& meta, const Verified& v)
{
    if (DType::from_name(v.meta.output_datatype) != meta.dtype || v.meta.output_resolution != meta.shape)
        fail(Errc::MalformedHeader, "payload of " + meta.path + " declares " + v.meta.output_datatype + " " +
                                        shape_to_string(v.meta.output_resolution) + " but the index records " +
                                        meta.dtype.name() + " " + shape_to_string(meta.shape));
    const auto backend = backends_.find(v.meta.backend);

    trust::KeyRecord signer;
    signer.public_key = v.key;
    signer.owner_name = v.meta.signature.name;
    signer.owner_email = v.meta.signature.email;
    const trust::TrustProfile profile = store_.resolve_profile(signer);
    if (backend->requires_trust() && !profile.rules.capabilities.hosted_allowed)
        fail(Errc::TrustViolation, "backend '" + backend->name() + "' needs a trusted signer; key " + signer.id() +
                                       " belongs to profile '" + profile.name + "'");

    runtime::ExecutionEnv env;
    env.limits = profile.rules.limits;
    env.capabilities = profile.rules.capabilities;
    env.output.path = v.meta.output_dataset;
    env.output.dtype = meta.dtype;
    env.output.shape = meta.shape;
    // Every input is materialized here, before the backend starts.
    for (std::size_t k = 0; k < v.meta.input_datasets.size(); ++k) {
        const std::string path = normalize_path(v.meta.input_datasets[k]);
        const DatasetMeta* in = container.find(path);
        if (!in)
            fail(Errc::MissingInput, "input " + path + " of " + meta.path + " does not exist");
        runtime::InputSlot slot;
        slot.alias = k < v.meta.input_aliases.size() ? v.meta.input_aliases[k] : path;
        slot.path = path;
        slot.dtype = in->dtype;
        slot.shape = in->shape;
        const DatasetMeta in_meta = *in;
        slot.data = std::make_shared<const DataBuffer>(in_meta.is_udf() ? decode_and_execute(container, path)
                                                                        : container.read_dataset(path));
        env.inputs.push_back(std::move(slot));
    }

    backend->prepare(*v.object, env);
    auto object = v.object;
    auto hooks = hooks_;
    const std::string path = meta.path;
    return runtime::run_sandboxed(
        env,
        [backend, object, hooks, path](runtime::ExecutionEnv& e) {
            if (hooks.before_execute)
                hooks.before_execute(path);
            backend->execute(*object, e);
            if (hooks.after_execute)
                hooks.after_execute(path);
        },
        options_.sandbox);
}

InspectResult Engine::inspect(Container& container, std::string_view path) const
{
    const DatasetMeta& meta = container.dataset(path);
    if (!meta.is_udf())
        fail(Errc::InvalidArgument, meta.path + " is not a UDF dataset");
    const Bytes payload = container.read_udf_payload(meta.path);
    ParsedPayload parsed = parse_payload(payload);
    InspectResult r;
    r.meta = parsed.meta;
    r.header = parsed.header;
    try {
        const auto v = verify_payload(payload);
        r.signature_valid = true;
        r.verification = "valid";
        r.key_id = trust::key_id(v.key);
        r.profile = store_.profile_of(v.key);
    } catch (const Error& e) {
        r.verification = e.what();
        try {
            const auto key = trust::public_key_from_base64(parsed.meta.signature.public_key);
            r.key_id = trust::key_id(key);
            r.profile = store_.profile_of(key);
        } catch (const Error&) {
        }
    }
    return r;
}

void Engine::bind(Container& container)
{
    container.set_udf_decoder([this](Container& c, const DatasetMeta& m) {
        return execute_payload(c, m, c.read_udf_payload(m.path));
    });
}

} // namespace udfvault::udf
