#pragma once

// UXB1 bytecode.
//
//   "UXB1" | u16 version (1)
//   u16 const_count | const_count x f64
//   u16 input_count | input_count x u16   (indices into the UDF's input list)
//   u32 code_length | code
//
// Opcodes (operands are little-endian):
//   0x00 HALT       0x01 CONST k:u16    0x02 LOAD j:u16    0x03 COORD d:u16
//   0x04 INDEX      0x10 ADD  0x11 SUB  0x12 MUL  0x13 DIV  0x14 NEG
//   0x20 CALL f:u8  (0 abs, 1 sqrt, 2 floor, 3 ceil, 4 min, 5 max, 6 pow)
//
// Code is straight-line; HALT is the final byte and leaves the result on top
// of the stack.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "udfvault/buffer.hpp"
#include "udfvault/exprlang/ast.hpp"

namespace udfvault::exprlang {

inline constexpr std::string_view kBytecodeMagic = "UXB1";
inline constexpr std::uint16_t kBytecodeVersion = 1;
inline constexpr std::size_t kMaxStackDepth = 256;

enum class Opcode : std::uint8_t {
    Halt = 0x00,
    Const = 0x01,
    Load = 0x02,
    Coord = 0x03,
    Index = 0x04,
    Add = 0x10,
    Sub = 0x11,
    Mul = 0x12,
    Div = 0x13,
    Neg = 0x14,
    Call = 0x20,
};

struct Instruction {
    Opcode op;
    std::uint16_t operand = 0;

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct Program {
    std::vector<double> const_pool;
    std::vector<std::uint16_t> input_table;
    Bytes code;

    /// Bitwise equality (constant pools compared by bit pattern).
    friend bool operator==(const Program& a, const Program& b);
};

/// Result of the static check every program passes before it runs.
struct ProgramInfo {
    std::vector<Instruction> instructions; // includes the final HALT
    std::size_t max_stack = 0;
    /// One past the highest COORD dimension referenced, 0 if none.
    std::size_t coord_rank = 0;
};

/// Decodes and verifies operand ranges and stack discipline.
/// Throws MalformedBytecode.
ProgramInfo analyze(const Program& program);

/// Compiles `source`. Aliases must be unique identifiers outside the reserved set.
/// Throws SyntaxError, UnknownIdentifier, ArityError; InvalidArgument on bad aliases.
Program compile(std::string_view source, const std::vector<std::string>& input_aliases);
/// Code generation from an already-parsed tree over `alias_count` aliases.
Program compile_ast(const Ast& ast, std::size_t alias_count);

Bytes serialize(const Program& program);
/// Throws BadMagic, UnsupportedVersion, MalformedBytecode.
Program deserialize(std::span<const std::uint8_t> bytes);

} // namespace udfvault::exprlang
