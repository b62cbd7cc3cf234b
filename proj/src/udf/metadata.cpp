#include "udfvault/udf/metadata.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include <json.hpp>

#include "udfvault/dtype.hpp"
#include "udfvault/error.hpp"

namespace udfvault::udf {

using nlohmann::json;

namespace {

constexpr std::size_t kExtentWidth = 20;

[[noreturn]] void malformed(const std::string& why)
{
    fail(Errc::MalformedHeader, "malformed UDF header: " + why);
}

std::string default_alias(const std::string& path)
{
    auto pos = path.rfind('/');
    return pos == std::string::npos ? path : path.substr(pos + 1);
}

const json& field(const json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end())
        malformed(std::string("missing \"") + key + "\"");
    return *it;
}

std::string text_field(const json& j, const char* key)
{
    const json& v = field(j, key);
    if (!v.is_string())
        malformed(std::string("\"") + key + "\" must be a string");
    return v.get<std::string>();
}

std::vector<std::string> text_list(const json& j, const char* key)
{
    const json& v = field(j, key);
    if (!v.is_array())
        malformed(std::string("\"") + key + "\" must be an array");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string())
            malformed(std::string("\"") + key + "\" must hold strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* where)
{
    for (const auto& [k, v] : j.items())
        if (!allowed.contains(k))
            malformed("unexpected field \"" + k + "\" in " + where);
}

} // namespace

std::string resolution_reserve(const Shape& resolution)
{
    std::size_t pad = 0;
    for (auto extent : resolution)
        pad += kExtentWidth - std::to_string(extent).size();
    return std::string(pad, ' ');
}

std::string header_json(const UdfMetadata& meta, bool include_payload_signature)
{
    json sig{{"name", meta.signature.name}, {"email", meta.signature.email}, {"public_key", meta.signature.public_key}};
    if (include_payload_signature)
        sig["payload_signature"] = meta.signature.payload_signature;
    json j{
        {"backend", meta.backend},
        {"bytecode_size", meta.bytecode_size},
        {"input_datasets", meta.input_datasets},
        {"input_aliases", meta.input_aliases},
        {"output_dataset", meta.output_dataset},
        {"output_datatype", meta.output_datatype},
        {"output_resolution", meta.output_resolution},
        {"output_resolution_reserve", resolution_reserve(meta.output_resolution)},
        {"signature", sig},
        {"source_code", meta.source_code},
    };
    try {
        return j.dump();
    } catch (const json::exception& e) {
        fail(Errc::InvalidArgument, std::string("UDF metadata is not valid UTF-8: ") + e.what());
    }
}

UdfMetadata parse_header(std::string_view json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        malformed(e.what());
    }
    if (!j.is_object())
        malformed("header is not a JSON object");
    reject_unknown(j,
                   {"backend", "bytecode_size", "input_datasets", "input_aliases", "output_dataset", "output_datatype",
                    "output_resolution", "output_resolution_reserve", "signature", "source_code"},
                   "header");

    UdfMetadata m;
    m.backend = text_field(j, "backend");
    const json& size = field(j, "bytecode_size");
    if (!size.is_number_unsigned())
        malformed("\"bytecode_size\" must be a non-negative integer");
    m.bytecode_size = size.get<std::uint64_t>();
    m.input_datasets = text_list(j, "input_datasets");
    if (j.contains("input_aliases")) {
        m.input_aliases = text_list(j, "input_aliases");
        if (m.input_aliases.size() != m.input_datasets.size())
            malformed("\"input_aliases\" and \"input_datasets\" differ in length");
    } else {
        for (const auto& p : m.input_datasets)
            m.input_aliases.push_back(default_alias(p));
    }
    m.output_dataset = text_field(j, "output_dataset");
    m.output_datatype = text_field(j, "output_datatype");
    try {
        DType::from_name(m.output_datatype);
    } catch (const Error&) {
        malformed("unknown output_datatype \"" + m.output_datatype + "\"");
    }
    const json& res = field(j, "output_resolution");
    if (!res.is_array() || res.empty())
        malformed("\"output_resolution\" must be a non-empty array");
    for (const auto& e : res) {
        if (!e.is_number_unsigned() || e.get<std::uint64_t>() == 0)
            malformed("\"output_resolution\" extents must be integers >= 1");
        m.output_resolution.push_back(e.get<std::uint64_t>());
    }
    if (j.contains("output_resolution_reserve")) {
        const json& r = j["output_resolution_reserve"];
        if (!r.is_string() || r.get<std::string>() != resolution_reserve(m.output_resolution))
            malformed("\"output_resolution_reserve\" does not match the resolution");
    }

    const json& sig = field(j, "signature");
    if (!sig.is_object())
        malformed("\"signature\" must be an object");
    reject_unknown(sig, {"name", "email", "public_key", "payload_signature"}, "signature");
    m.signature.public_key = text_field(sig, "public_key");
    m.signature.name = sig.contains("name") ? text_field(sig, "name") : "";
    m.signature.email = sig.contains("email") ? text_field(sig, "email") : "";
    m.signature.payload_signature = sig.contains("payload_signature") ? text_field(sig, "payload_signature") : "";
    m.source_code = j.contains("source_code") ? text_field(j, "source_code") : "";
    return m;
}

Bytes build_payload(const UdfMetadata& meta, std::span<const std::uint8_t> object)
{
    if (meta.bytecode_size != object.size())
        fail(Errc::InvalidArgument, "bytecode_size does not match the object length");
    const std::string header = header_json(meta);
    Bytes out(header.begin(), header.end());
    out.push_back(0);
    out.insert(out.end(), object.begin(), object.end());
    return out;
}

ParsedPayload parse_payload(std::span<const std::uint8_t> payload)
{
    const auto nul = std::find(payload.begin(), payload.end(), std::uint8_t{0});
    if (nul == payload.end())
        malformed("no NUL separator after the header");
    ParsedPayload p;
    p.header.assign(payload.begin(), nul);
    p.meta = parse_header(p.header);
    p.object = payload.subspan(p.header.size() + 1);
    if (p.meta.bytecode_size != p.object.size())
        malformed("bytecode_size " + std::to_string(p.meta.bytecode_size) + " but " + std::to_string(p.object.size()) +
                  " bytes follow the header");
    return p;
}

Bytes signed_bytes(const UdfMetadata& meta, std::span<const std::uint8_t> object)
{
    const std::string header = header_json(meta, false);
    Bytes out(header.begin(), header.end());
    out.push_back(0);
    out.insert(out.end(), object.begin(), object.end());
    return out;
}

} // namespace udfvault::udf
