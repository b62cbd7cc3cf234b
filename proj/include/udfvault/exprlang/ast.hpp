#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace udfvault::exprlang {

enum class TokenKind { Number, Ident, Plus, Minus, Star, Slash, LParen, RParen, Comma, End };

struct Token {
    TokenKind kind;
    std::string_view text;
    std::size_t offset;
};

/// Splits `source` into tokens; the last token is always End at source.size().
/// Throws SyntaxError with the offending offset.
std::vector<Token> tokenize(std::string_view source);

enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div };

/// Ids double as CALL operands in bytecode.
enum class Function : std::uint8_t { Abs = 0, Sqrt = 1, Floor = 2, Ceil = 3, Min = 4, Max = 5, Pow = 6 };

inline constexpr std::size_t kFunctionCount = 7;
inline constexpr std::size_t kMaxCoordDims = 32;

std::size_t function_arity(Function fn) noexcept;
std::string_view function_name(Function fn) noexcept;
std::optional<Function> function_by_name(std::string_view name) noexcept;

/// Applies `fn` with the shared math semantics of the VM.
double apply_function(Function fn, double a, double b = 0.0) noexcept;

struct Ast {
    enum class Kind { Const, InputRef, Coord, FlatIndex, Neg, BinOp, Call };

    Kind kind = Kind::Const;
    double value = 0.0;      // Const
    std::size_t index = 0;   // InputRef: alias position; Coord: dimension
    BinaryOp op = BinaryOp::Add;
    Function fn = Function::Abs;
    std::vector<Ast> children;

    static Ast constant(double v);
    static Ast input(std::size_t alias_index);
    static Ast coord(std::size_t dim);
    static Ast flat_index();
    static Ast neg(Ast child);
    static Ast binary(BinaryOp op, Ast lhs, Ast rhs);
    static Ast call(Function fn, std::vector<Ast> args);
};

/// True for identifiers the language reserves: i and d0..d31.
bool is_reserved_identifier(std::string_view name) noexcept;

/// Recursive-descent parse. Identifiers resolve to `aliases` positions.
/// Throws SyntaxError, UnknownIdentifier, ArityError (all carrying an offset).
Ast parse(std::string_view source, const std::vector<std::string>& aliases);

} // namespace udfvault::exprlang
