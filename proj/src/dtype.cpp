#include "udfvault/dtype.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "udfvault/error.hpp"

namespace udfvault {

namespace {

struct ScalarName {
    TypeKind kind;
    std::string_view name;
    std::size_t size;
};

constexpr ScalarName kScalarNames[] = {
    {TypeKind::Int8, "int8", 1},     {TypeKind::Int16, "int16", 2},
    {TypeKind::Int32, "int32", 4},   {TypeKind::Int64, "int64", 8},
    {TypeKind::UInt8, "uint8", 1},   {TypeKind::UInt16, "uint16", 2},
    {TypeKind::UInt32, "uint32", 4}, {TypeKind::UInt64, "uint64", 8},
    {TypeKind::Float32, "float", 4}, {TypeKind::Float64, "double", 8},
};

const std::vector<CompoundMember> kNoMembers;

} // namespace

DType::DType(TypeKind kind) : kind_(kind), size_(0)
{
    for (const auto& entry : kScalarNames)
        if (entry.kind == kind)
            size_ = entry.size;
    if (kind == TypeKind::VarString)
        size_ = 4;
}

DType DType::scalar(TypeKind kind)
{
    if (kind == TypeKind::FixedString || kind == TypeKind::VarString || kind == TypeKind::Compound)
        fail(Errc::InvalidArgument, "not a scalar kind");
    return DType(kind);
}

DType DType::fixed_string(std::size_t length)
{
    if (length < 1)
        fail(Errc::InvalidArgument, "fixed-length string needs length >= 1");
    DType t(TypeKind::FixedString);
    t.size_ = length;
    return t;
}

DType DType::var_string()
{
    return DType(TypeKind::VarString);
}

DType DType::compound(std::vector<CompoundMember> members, std::size_t storage_size)
{
    if (members.empty())
        fail(Errc::InvalidArgument, "compound type needs at least one member");
    std::set<std::string> names;
    std::size_t end = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
        const auto& m = members[i];
        if (m.dtype.is_compound())
            fail(Errc::InvalidArgument, "nested compound member '" + m.raw_name + "'");
        if (!names.insert(m.raw_name).second)
            fail(Errc::InvalidArgument, "duplicate compound member '" + m.raw_name + "'");
        if (i > 0 && m.offset < end)
            fail(Errc::InvalidArgument, "compound member '" + m.raw_name + "' overlaps its predecessor");
        end = m.offset + m.dtype.size();
    }
    if (storage_size < end)
        fail(Errc::InvalidArgument, "compound storage size smaller than its members");
    DType t(TypeKind::Compound);
    t.size_ = storage_size;
    t.members_ = std::make_shared<const std::vector<CompoundMember>>(std::move(members));
    return t;
}

DType DType::from_name(std::string_view name)
{
    for (const auto& entry : kScalarNames)
        if (entry.name == name)
            return DType(entry.kind);
    if (name == "float32")
        return DType(TypeKind::Float32);
    if (name == "float64")
        return DType(TypeKind::Float64);
    if (name == "string")
        return var_string();
    constexpr std::string_view prefix = "string(";
    if (name.starts_with(prefix) && name.ends_with(")")) {
        auto digits = name.substr(prefix.size(), name.size() - prefix.size() - 1);
        std::size_t len = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), len);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && !digits.empty())
            return fixed_string(len);
    }
    fail(Errc::InvalidArgument, "unknown data type '" + std::string(name) + "'");
}

std::string DType::name() const
{
    switch (kind_) {
    case TypeKind::FixedString:
        return "string(" + std::to_string(size_) + ")";
    case TypeKind::VarString:
        return "string";
    case TypeKind::Compound:
        return "compound";
    default:
        break;
    }
    for (const auto& entry : kScalarNames)
        if (entry.kind == kind_)
            return std::string(entry.name);
    return "unknown";
}

bool DType::is_integer() const noexcept
{
    switch (kind_) {
    case TypeKind::Int8: case TypeKind::Int16: case TypeKind::Int32: case TypeKind::Int64:
    case TypeKind::UInt8: case TypeKind::UInt16: case TypeKind::UInt32: case TypeKind::UInt64:
        return true;
    default:
        return false;
    }
}

bool DType::has_heap_refs() const noexcept
{
    if (kind_ == TypeKind::VarString)
        return true;
    if (kind_ == TypeKind::Compound)
        return std::any_of(members_->begin(), members_->end(),
                           [](const CompoundMember& m) { return m.dtype.kind() == TypeKind::VarString; });
    return false;
}

std::vector<std::size_t> DType::heap_ref_offsets() const
{
    std::vector<std::size_t> out;
    if (kind_ == TypeKind::VarString)
        out.push_back(0);
    else if (kind_ == TypeKind::Compound)
        for (const auto& m : *members_)
            if (m.dtype.kind() == TypeKind::VarString)
                out.push_back(m.offset);
    return out;
}

const std::vector<CompoundMember>& DType::members() const
{
    return members_ ? *members_ : kNoMembers;
}

bool operator==(const DType& a, const DType& b)
{
    if (a.kind_ != b.kind_ || a.size_ != b.size_)
        return false;
    if (a.kind_ != TypeKind::Compound)
        return true;
    return *a.members_ == *b.members_;
}

} // namespace udfvault
