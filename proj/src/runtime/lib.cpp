#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "udfvault/error.hpp"
#include "udfvault/runtime.hpp"

namespace udfvault::runtime {

namespace {

std::string_view basename_of(std::string_view path)
{
    auto pos = path.rfind('/');
    return pos == std::string_view::npos ? path : path.substr(pos + 1);
}

const InputSlot* find_input(const ExecutionEnv& env, std::string_view name)
{
    for (const auto& in : env.inputs)
        if (in.alias == name)
            return &in;
    for (const auto& in : env.inputs)
        if (in.path == name)
            return &in;
    return nullptr;
}

bool is_output_name(const ExecutionEnv& env, std::string_view name)
{
    return name == env.output.path || (!name.empty() && name == basename_of(env.output.path));
}

struct Target {
    const DataBuffer* data;
    const DType* dtype;
    const Shape* shape;
    bool output;
};

Target resolve(const ExecutionEnv& env, std::string_view name)
{
    if (const auto* in = find_input(env, name))
        return {in->data.get(), &in->dtype, &in->shape, false};
    if (is_output_name(env, name))
        return {&env.output.data, &env.output.dtype, &env.output.shape, true};
    fail(Errc::UnknownName, "no input or output named '" + std::string(name) + "'");
}

// Locates the string field addressed by (name, index, member).
struct StringField {
    DType dtype;
    std::size_t byte_offset;
};

StringField string_field(const Target& t, std::string_view name, std::uint64_t index, std::string_view member)
{
    const std::uint64_t count = element_count(*t.shape);
    if (index >= count)
        fail(Errc::OutOfBounds,
             "index " + std::to_string(index) + " outside '" + std::string(name) + "' (" + std::to_string(count) + " elements)");
    const std::size_t base = static_cast<std::size_t>(index) * t.dtype->size();
    if (member.empty()) {
        if (!t.dtype->is_string())
            fail(Errc::InputDTypeUnsupported, "'" + std::string(name) + "' has type " + t.dtype->name() + ", not a string type");
        return {*t.dtype, base};
    }
    if (!t.dtype->is_compound())
        fail(Errc::UnknownName, "'" + std::string(name) + "' is not a compound; it has no member '" + std::string(member) + "'");
    const auto view = build_compound_view(*t.dtype);
    const auto& m = view.member(member);
    if (m.is_pad() || !m.dtype->is_string())
        fail(Errc::InputDTypeUnsupported, "member '" + std::string(member) + "' is not a string");
    return {*m.dtype, base + m.offset};
}

} // namespace

namespace lib {

DataHandle get_data(ExecutionEnv& env, std::string_view name)
{
    const Target t = resolve(env, name);
    DataHandle h;
    h.bytes = t.data->bytes;
    h.dtype = t.dtype;
    h.shape = t.shape;
    h.output = t.output;
    if (t.output)
        h.writable = env.output.data.bytes;
    return h;
}

Shape get_dims(const ExecutionEnv& env, std::string_view name)
{
    return *resolve(env, name).shape;
}

std::string get_type(const ExecutionEnv& env, std::string_view name)
{
    return resolve(env, name).dtype->name();
}

std::string string_get(const ExecutionEnv& env, std::string_view name, std::uint64_t index, std::string_view member)
{
    const Target t = resolve(env, name);
    const auto f = string_field(t, name, index, member);
    const std::uint8_t* p = t.data->bytes.data() + f.byte_offset;
    if (f.dtype.kind() == TypeKind::VarString)
        return std::string(heap_string(t.data->heap, load_le<std::uint32_t>(p)));
    const auto* c = reinterpret_cast<const char*>(p);
    return std::string(c, strnlen(c, f.dtype.size()));
}

void string_set(ExecutionEnv& env, std::string_view name, std::uint64_t index, std::string_view text,
                std::string_view member)
{
    const Target t = resolve(env, name);
    if (!t.output)
        fail(Errc::CapabilityDenied, "input '" + std::string(name) + "' is read-only");
    const auto f = string_field(t, name, index, member);
    if (f.dtype.kind() == TypeKind::VarString)
        fail(Errc::VarStringWriteUnsupported, "variable-length string targets cannot be written");
    if (text.size() > f.dtype.size())
        fail(Errc::StringTooLong, std::to_string(text.size()) + " bytes do not fit in " + f.dtype.name());
    std::uint8_t* p = env.output.data.bytes.data() + f.byte_offset;
    std::memset(p, 0, f.dtype.size());
    std::memcpy(p, text.data(), text.size());
}

std::string read_file(const ExecutionEnv& env, const std::filesystem::path& path)
{
    if (!path_allowed(path, env.capabilities.fs_read))
        throw Error(Errc::CapabilityDenied, "read access denied: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const ExecutionEnv& env, const std::filesystem::path& path, std::string_view contents)
{
    if (!path_allowed(path, env.capabilities.fs_write))
        throw Error(Errc::CapabilityDenied, "write access denied: " + path.string());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out)
        fail(Errc::IoError, "cannot write " + path.string());
}

void connect(const ExecutionEnv&, std::string_view endpoint)
{
    fail(Errc::CapabilityDenied, "network access denied: " + std::string(endpoint));
}

void sleep_for(const ExecutionEnv& env, std::chrono::milliseconds d)
{
    const auto until = std::chrono::steady_clock::now() + d;
    while (!env.stop.stop_requested()) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= until)
            return;
        std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(until - now, std::chrono::milliseconds(5)));
    }
}

bool stop_requested(const ExecutionEnv& env) noexcept
{
    return env.stop.stop_requested();
}

void reserve(ExecutionEnv& env, std::uint64_t bytes)
{
    const auto used = materialized_bytes(env) + env.reserved;
    if (bytes > env.limits.memory_cap || used > env.limits.memory_cap - bytes)
        fail(Errc::MemoryCapExceeded, "reserving " + std::to_string(bytes) + " bytes exceeds the memory cap of " +
                                          std::to_string(env.limits.memory_cap));
    env.reserved += bytes;
}

} // namespace lib

bool path_allowed(const std::filesystem::path& path, const std::vector<std::string>& prefixes)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    // Canonical form resolves symlinks, so a link inside an allowed tree
    // cannot reach outside it.
    const fs::path target = fs::weakly_canonical(fs::absolute(path), ec);
    if (ec)
        return false;
    for (const auto& prefix : prefixes) {
        const fs::path root = fs::weakly_canonical(fs::absolute(prefix), ec);
        if (ec)
            continue;
        auto [r, t] = std::mismatch(root.begin(), root.end(), target.begin(), target.end());
        // A trailing separator leaves an empty final component in `root`.
        if (r == root.end() || (r->empty() && std::next(r) == root.end()))
            return true;
    }
    return false;
}

std::uint64_t materialized_bytes(const ExecutionEnv& env)
{
    std::uint64_t total = 0;
    for (const auto& in : env.inputs)
        if (in.data)
            total += in.data->bytes.size() + in.data->heap.size();
    total += element_count(env.output.shape) * env.output.dtype.size();
    return total;
}

} // namespace udfvault::runtime
