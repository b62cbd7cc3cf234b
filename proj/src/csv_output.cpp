#include "udfvault/csv_output.hpp"

#include <charconv>
#include <sstream>

#include "udfvault/error.hpp"

namespace udfvault {

namespace {

template <typename T>
void put_number(std::string& line, T v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    line.append(buf, ptr);
}

void put_text(std::string& line, std::string_view text)
{
    const bool quote = text.find_first_of(",\"\r\n") != std::string_view::npos ||
                       (!text.empty() && (text.front() == ' ' || text.back() == ' '));
    if (!quote) {
        line.append(text);
        return;
    }
    line.push_back('"');
    for (char c : text) {
        if (c == '"')
            line.push_back('"');
        line.push_back(c);
    }
    line.push_back('"');
}

void put_value(std::string& line, const std::uint8_t* p, const DType& dtype, std::span<const std::uint8_t> heap)
{
    switch (dtype.kind()) {
    case TypeKind::Int8: put_number(line, load_le<std::int8_t>(p)); break;
    case TypeKind::Int16: put_number(line, load_le<std::int16_t>(p)); break;
    case TypeKind::Int32: put_number(line, load_le<std::int32_t>(p)); break;
    case TypeKind::Int64: put_number(line, load_le<std::int64_t>(p)); break;
    case TypeKind::UInt8: put_number(line, load_le<std::uint8_t>(p)); break;
    case TypeKind::UInt16: put_number(line, load_le<std::uint16_t>(p)); break;
    case TypeKind::UInt32: put_number(line, load_le<std::uint32_t>(p)); break;
    case TypeKind::UInt64: put_number(line, load_le<std::uint64_t>(p)); break;
    case TypeKind::Float32: put_number(line, load_le<float>(p)); break;
    case TypeKind::Float64: put_number(line, load_le<double>(p)); break;
    case TypeKind::FixedString: {
        std::string_view s(reinterpret_cast<const char*>(p), dtype.size());
        put_text(line, s.substr(0, s.find('\0')));
        break;
    }
    case TypeKind::VarString:
        put_text(line, heap_string(heap, load_le<std::uint32_t>(p)));
        break;
    case TypeKind::Compound: {
        bool first = true;
        for (const auto& m : dtype.members()) {
            if (!first)
                line.push_back(',');
            first = false;
            put_value(line, p + m.offset, m.dtype, heap);
        }
        break;
    }
    }
}

} // namespace

void write_csv(std::ostream& out, const DataBuffer& data, const DType& dtype, const Shape& shape)
{
    const std::uint64_t count = element_count(shape);
    if (data.bytes.size() != count * dtype.size())
        fail(Errc::ShapeMismatch, "buffer holds " + std::to_string(data.bytes.size()) + " bytes, " + shape_to_string(shape) +
                                      " " + dtype.name() + " needs " + std::to_string(count * dtype.size()));
    const std::uint64_t rows = shape.empty() ? 1 : shape[0];
    const std::uint64_t per_row = rows == 0 ? 0 : count / rows;
    std::string line;
    for (std::uint64_t r = 0; r < rows; ++r) {
        line.clear();
        for (std::uint64_t k = 0; k < per_row; ++k) {
            if (k)
                line.push_back(',');
            put_value(line, data.bytes.data() + (r * per_row + k) * dtype.size(), dtype, data.heap);
        }
        line.push_back('\n');
        out.write(line.data(), static_cast<std::streamsize>(line.size()));
    }
}

std::string format_csv(const DataBuffer& data, const DType& dtype, const Shape& shape)
{
    std::ostringstream out;
    write_csv(out, data, dtype, shape);
    return out.str();
}

} // namespace udfvault
