#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "udfvault/dtype.hpp"

namespace udfvault {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swapping");

using Bytes = std::vector<std::uint8_t>;
using Shape = std::vector<std::uint64_t>;

std::uint64_t element_count(const Shape& shape);
/// "1440x720"
std::string shape_to_string(const Shape& shape);
/// Inverse of shape_to_string; every extent must be >= 1.
Shape parse_shape(std::string_view text);

template <class T>
T load_le(const std::uint8_t* p) noexcept
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

template <class T>
void store_le(std::uint8_t* p, T v) noexcept
{
    std::memcpy(p, &v, sizeof(T));
}

template <class T>
void append_le(Bytes& out, T v)
{
    auto pos = out.size();
    out.resize(pos + sizeof(T));
    store_le(out.data() + pos, v);
}

/// Element bytes of a dataset. Variable-length strings live in `heap` as
/// (u32 length, bytes) records; the element stream holds u32 offsets into it.
struct DataBuffer {
    Bytes bytes;
    Bytes heap;

    template <class T>
    std::span<const T> view() const noexcept
    {
        return {reinterpret_cast<const T*>(bytes.data()), bytes.size() / sizeof(T)};
    }

    template <class T>
    std::span<T> view() noexcept
    {
        return {reinterpret_cast<T*>(bytes.data()), bytes.size() / sizeof(T)};
    }

    friend bool operator==(const DataBuffer&, const DataBuffer&) = default;
};

template <class T>
DataBuffer make_buffer(std::span<const T> values)
{
    DataBuffer b;
    b.bytes.resize(values.size_bytes());
    if (!values.empty())
        std::memcpy(b.bytes.data(), values.data(), values.size_bytes());
    return b;
}

template <class T>
DataBuffer make_buffer(const std::vector<T>& values)
{
    return make_buffer(std::span<const T>(values));
}

/// Appends a heap record and returns its offset.
std::uint32_t heap_append(Bytes& heap, std::string_view text);
/// Decodes the record at `offset`; throws OutOfBounds on a dangling reference.
std::string_view heap_string(std::span<const std::uint8_t> heap, std::uint32_t offset);

/// Canonical var-string buffer: heap records laid out in element order.
DataBuffer make_var_string_buffer(const std::vector<std::string>& values);
/// NUL-padded fixed-length strings; throws StringTooLong.
DataBuffer make_fixed_string_buffer(const std::vector<std::string>& values, std::size_t length);

/// Reads element `index` of a string-typed buffer (either storage form).
std::string string_element(const DataBuffer& buffer, const DType& dtype, std::uint64_t index);

} // namespace udfvault
