#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace udfvault {

enum class TypeKind : std::uint8_t {
    Int8, Int16, Int32, Int64,
    UInt8, UInt16, UInt32, UInt64,
    Float32, Float64,
    FixedString,
    VarString,
    Compound,
};

struct CompoundMember;

/// Element type of a dataset. Value type; compound member lists are shared.
///
/// Storage sizes: scalars use their natural width, FixedString its declared
/// length, VarString a u32 offset into the buffer heap, Compound the declared
/// record size.
class DType {
public:
    DType() : DType(TypeKind::UInt8) {}

    static DType scalar(TypeKind kind);
    static DType fixed_string(std::size_t length);
    static DType var_string();
    /// Validates member names, offsets and record size.
    static DType compound(std::vector<CompoundMember> members, std::size_t storage_size);

    /// Parses a name from the type-name table ("int16", "float", "string(8)", ...).
    static DType from_name(std::string_view name);

    TypeKind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return size_; }
    std::string name() const;

    bool is_integer() const noexcept;
    bool is_float() const noexcept { return kind_ == TypeKind::Float32 || kind_ == TypeKind::Float64; }
    bool is_numeric() const noexcept { return is_integer() || is_float(); }
    bool is_string() const noexcept { return kind_ == TypeKind::FixedString || kind_ == TypeKind::VarString; }
    bool is_compound() const noexcept { return kind_ == TypeKind::Compound; }

    /// True when elements reference the buffer heap (VarString or a compound holding one).
    bool has_heap_refs() const noexcept;
    /// Byte offsets within one element that hold u32 heap references.
    std::vector<std::size_t> heap_ref_offsets() const;

    const std::vector<CompoundMember>& members() const;

    friend bool operator==(const DType& a, const DType& b);

private:
    explicit DType(TypeKind kind);

    TypeKind kind_;
    std::size_t size_;
    std::shared_ptr<const std::vector<CompoundMember>> members_;
};

struct CompoundMember {
    std::string raw_name;
    DType dtype;
    std::size_t offset = 0;

    friend bool operator==(const CompoundMember&, const CompoundMember&) = default;
};

} // namespace udfvault
