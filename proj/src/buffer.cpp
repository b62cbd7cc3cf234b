#include "udfvault/buffer.hpp"

#include <charconv>
#include <limits>

#include "udfvault/error.hpp"

namespace udfvault {

std::uint64_t element_count(const Shape& shape)
{
    std::uint64_t n = 1;
    for (auto extent : shape) {
        if (extent != 0 && n > std::numeric_limits<std::uint64_t>::max() / extent)
            fail(Errc::InvalidArgument, "shape element count overflows");
        n *= extent;
    }
    return n;
}

std::string shape_to_string(const Shape& shape)
{
    std::string out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i)
            out += 'x';
        out += std::to_string(shape[i]);
    }
    return out;
}

Shape parse_shape(std::string_view text)
{
    Shape shape;
    std::size_t pos = 0;
    while (true) {
        auto next = text.find('x', pos);
        auto part = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        std::uint64_t extent = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), extent);
        if (part.empty() || ec != std::errc() || ptr != part.data() + part.size() || extent == 0)
            fail(Errc::InvalidArgument, "invalid shape '" + std::string(text) + "'");
        shape.push_back(extent);
        if (next == std::string_view::npos)
            break;
        pos = next + 1;
    }
    return shape;
}

std::uint32_t heap_append(Bytes& heap, std::string_view text)
{
    if (heap.size() + 4 + text.size() > std::numeric_limits<std::uint32_t>::max())
        fail(Errc::InvalidArgument, "string heap exceeds 4 GiB");
    auto offset = static_cast<std::uint32_t>(heap.size());
    append_le<std::uint32_t>(heap, static_cast<std::uint32_t>(text.size()));
    heap.insert(heap.end(), text.begin(), text.end());
    return offset;
}

std::string_view heap_string(std::span<const std::uint8_t> heap, std::uint32_t offset)
{
    if (std::size_t(offset) + 4 > heap.size())
        fail(Errc::OutOfBounds, "string heap offset " + std::to_string(offset) + " out of range");
    auto len = load_le<std::uint32_t>(heap.data() + offset);
    if (std::size_t(offset) + 4 + len > heap.size())
        fail(Errc::OutOfBounds, "string heap record at " + std::to_string(offset) + " truncated");
    return {reinterpret_cast<const char*>(heap.data()) + offset + 4, len};
}

DataBuffer make_var_string_buffer(const std::vector<std::string>& values)
{
    DataBuffer b;
    b.bytes.reserve(values.size() * 4);
    for (const auto& v : values)
        append_le<std::uint32_t>(b.bytes, heap_append(b.heap, v));
    return b;
}

DataBuffer make_fixed_string_buffer(const std::vector<std::string>& values, std::size_t length)
{
    DataBuffer b;
    b.bytes.assign(values.size() * length, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].size() > length)
            fail(Errc::StringTooLong, "string of " + std::to_string(values[i].size()) +
                                          " bytes exceeds fixed length " + std::to_string(length));
        std::memcpy(b.bytes.data() + i * length, values[i].data(), values[i].size());
    }
    return b;
}

std::string string_element(const DataBuffer& buffer, const DType& dtype, std::uint64_t index)
{
    if (!dtype.is_string())
        fail(Errc::InvalidArgument, "element is not a string");
    auto count = buffer.bytes.size() / dtype.size();
    if (index >= count)
        fail(Errc::OutOfBounds, "string index " + std::to_string(index) + " out of range");
    const auto* p = buffer.bytes.data() + index * dtype.size();
    if (dtype.kind() == TypeKind::VarString)
        return std::string(heap_string(buffer.heap, load_le<std::uint32_t>(p)));
    std::size_t len = 0;
    while (len < dtype.size() && p[len] != 0)
        ++len;
    return std::string(reinterpret_cast<const char*>(p), len);
}

} // namespace udfvault
