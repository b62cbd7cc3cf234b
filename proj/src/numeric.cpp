#include "udfvault/numeric.hpp"

#include <cstring>

namespace udfvault {

namespace {

template <class T>
double load(const std::uint8_t* p) noexcept
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
}

template <class T>
void store(std::uint8_t* p, double v) noexcept
{
    const T out = cast_from_double<T>(v);
    std::memcpy(p, &out, sizeof(T));
}

} // namespace

double load_as_double(const std::uint8_t* p, TypeKind kind) noexcept
{
    switch (kind) {
    case TypeKind::Int8: return load<std::int8_t>(p);
    case TypeKind::Int16: return load<std::int16_t>(p);
    case TypeKind::Int32: return load<std::int32_t>(p);
    case TypeKind::Int64: return load<std::int64_t>(p);
    case TypeKind::UInt8: return load<std::uint8_t>(p);
    case TypeKind::UInt16: return load<std::uint16_t>(p);
    case TypeKind::UInt32: return load<std::uint32_t>(p);
    case TypeKind::UInt64: return load<std::uint64_t>(p);
    case TypeKind::Float32: return load<float>(p);
    case TypeKind::Float64: return load<double>(p);
    default: return 0.0;
    }
}

void store_from_double(std::uint8_t* p, TypeKind kind, double v) noexcept
{
    switch (kind) {
    case TypeKind::Int8: store<std::int8_t>(p, v); break;
    case TypeKind::Int16: store<std::int16_t>(p, v); break;
    case TypeKind::Int32: store<std::int32_t>(p, v); break;
    case TypeKind::Int64: store<std::int64_t>(p, v); break;
    case TypeKind::UInt8: store<std::uint8_t>(p, v); break;
    case TypeKind::UInt16: store<std::uint16_t>(p, v); break;
    case TypeKind::UInt32: store<std::uint32_t>(p, v); break;
    case TypeKind::UInt64: store<std::uint64_t>(p, v); break;
    case TypeKind::Float32: store<float>(p, v); break;
    case TypeKind::Float64: store<double>(p, v); break;
    default: break;
    }
}

} // namespace udfvault
