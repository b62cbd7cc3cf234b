#pragma once

// Reference evaluator and random program generator for the expression
// language. The evaluator walks the tree one element at a time with plain
// <cmath> calls, sharing nothing with the block VM beyond the Ast type.

#include <charconv>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "udfvault/buffer.hpp"
#include "udfvault/dtype.hpp"
#include "udfvault/exprlang/ast.hpp"

namespace testing {

using udfvault::exprlang::Ast;
using udfvault::exprlang::BinaryOp;
using udfvault::exprlang::Function;

struct OracleInput {
    udfvault::DType dtype;
    udfvault::Bytes bytes;
};

inline double oracle_load(const OracleInput& in, std::size_t i)
{
    const std::uint8_t* p = in.bytes.data() + i * in.dtype.size();
    auto get = [p]<class T>(T) {
        T v;
        std::memcpy(&v, p, sizeof v);
        return static_cast<double>(v);
    };
    using udfvault::TypeKind;
    switch (in.dtype.kind()) {
    case TypeKind::Int8: return get(std::int8_t{});
    case TypeKind::Int16: return get(std::int16_t{});
    case TypeKind::Int32: return get(std::int32_t{});
    case TypeKind::Int64: return get(std::int64_t{});
    case TypeKind::UInt8: return get(std::uint8_t{});
    case TypeKind::UInt16: return get(std::uint16_t{});
    case TypeKind::UInt32: return get(std::uint32_t{});
    case TypeKind::UInt64: return get(std::uint64_t{});
    case TypeKind::Float32: return get(float{});
    case TypeKind::Float64: return get(double{});
    default: return 0.0;
    }
}

inline double tree_walk(const Ast& a, const std::vector<OracleInput>& inputs, const udfvault::Shape& shape, std::size_t i)
{
    switch (a.kind) {
    case Ast::Kind::Const: return a.value;
    case Ast::Kind::InputRef: return oracle_load(inputs.at(a.index), i);
    case Ast::Kind::FlatIndex: return static_cast<double>(i);
    case Ast::Kind::Coord: {
        std::size_t rest = i;
        std::size_t coord = 0;
        for (std::size_t d = shape.size(); d-- > 0;) {
            coord = rest % shape[d];
            rest /= shape[d];
            if (d == a.index)
                break;
        }
        return static_cast<double>(coord);
    }
    case Ast::Kind::Neg: return -tree_walk(a.children[0], inputs, shape, i);
    case Ast::Kind::BinOp: {
        const double l = tree_walk(a.children[0], inputs, shape, i);
        const double r = tree_walk(a.children[1], inputs, shape, i);
        switch (a.op) {
        case BinaryOp::Add: return l + r;
        case BinaryOp::Sub: return l - r;
        case BinaryOp::Mul: return l * r;
        case BinaryOp::Div: return l / r;
        }
        return 0.0;
    }
    case Ast::Kind::Call: {
        const double x = tree_walk(a.children[0], inputs, shape, i);
        const double y = a.children.size() > 1 ? tree_walk(a.children[1], inputs, shape, i) : 0.0;
        switch (a.fn) {
        case Function::Abs: return std::fabs(x);
        case Function::Sqrt: return std::sqrt(x);
        case Function::Floor: return std::floor(x);
        case Function::Ceil: return std::ceil(x);
        case Function::Min: return std::fmin(x, y);
        case Function::Max: return std::fmax(x, y);
        case Function::Pow: return std::pow(x, y);
        }
        return 0.0;
    }
    }
    return 0.0;
}

/// Source text that parses back to `a` (up to how the parser attaches unary
/// minus). Constants must be finite and non-negative.
inline std::string print_ast(const Ast& a, const std::vector<std::string>& aliases)
{
    switch (a.kind) {
    case Ast::Kind::Const: {
        char buf[64];
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, a.value);
        return std::string(buf, p);
    }
    case Ast::Kind::InputRef: return aliases.at(a.index);
    case Ast::Kind::FlatIndex: return "i";
    case Ast::Kind::Coord: return "d" + std::to_string(a.index);
    case Ast::Kind::Neg: return "-(" + print_ast(a.children[0], aliases) + ")";
    case Ast::Kind::BinOp: {
        static constexpr const char* ops[] = {" + ", " - ", " * ", " / "};
        return "(" + print_ast(a.children[0], aliases) + ops[static_cast<int>(a.op)] +
               print_ast(a.children[1], aliases) + ")";
    }
    case Ast::Kind::Call: {
        std::string s(udfvault::exprlang::function_name(a.fn));
        s += "(";
        for (std::size_t k = 0; k < a.children.size(); ++k)
            s += (k ? ", " : "") + print_ast(a.children[k], aliases);
        return s + ")";
    }
    }
    return {};
}

class AstGenerator {
public:
    AstGenerator(std::uint64_t seed, std::size_t inputs, std::size_t rank) : rng_(seed), inputs_(inputs), rank_(rank) {}

    Ast generate(int max_depth) { return node(max_depth); }

private:
    Ast leaf()
    {
        static constexpr double pool[] = {0.0, 1.0, 0.5, 2.0, 3.0, 10.0, 1e-3, 0.1, 7.25, 1e300, 4e-310, 65535.0, 100000.0};
        switch (pick(inputs_ > 0 ? 6 : 3)) {
        case 0: return Ast::constant(pool[pick(std::size(pool))]);
        case 1: return rank_ > 0 ? Ast::coord(pick(rank_)) : Ast::flat_index();
        case 2: return Ast::flat_index();
        default: return Ast::input(pick(inputs_));
        }
    }

    Ast node(int depth)
    {
        if (depth <= 1 || pick(5) == 0)
            return leaf();
        switch (pick(8)) {
        case 0: return Ast::neg(node(depth - 1));
        case 1:
        case 2: {
            const auto fn = static_cast<Function>(pick(udfvault::exprlang::kFunctionCount));
            std::vector<Ast> args;
            for (std::size_t k = 0; k < udfvault::exprlang::function_arity(fn); ++k)
                args.push_back(node(depth - 1));
            return Ast::call(fn, std::move(args));
        }
        default: return Ast::binary(static_cast<BinaryOp>(pick(4)), node(depth - 1), node(depth - 1));
        }
    }

    std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

    std::mt19937_64 rng_;
    std::size_t inputs_;
    std::size_t rank_;
};

/// Bits a float64 output element must hold: NaNs are stored as 0x7ff8000000000000.
inline std::uint64_t output_bits(double v)
{
    return std::isnan(v) ? 0x7ff8000000000000ull : std::bit_cast<std::uint64_t>(v);
}

/// Random numeric input of `count` elements; floats include a few specials.
inline OracleInput random_input(std::mt19937_64& rng, udfvault::DType dtype, std::size_t count)
{
    OracleInput in{dtype, udfvault::Bytes(count * dtype.size())};
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& b : in.bytes)
        b = static_cast<std::uint8_t>(byte(rng));
    if (dtype.is_float()) {
        std::uniform_real_distribution<double> real(-1000.0, 1000.0);
        static constexpr double specials[] = {0.0, -0.0, 1.0, INFINITY, -INFINITY, NAN};
        for (std::size_t i = 0; i < count; ++i) {
            const double v = (i % 17 == 5) ? specials[(i / 17) % std::size(specials)] : real(rng);
            if (dtype.kind() == udfvault::TypeKind::Float32) {
                const float f = static_cast<float>(v);
                std::memcpy(in.bytes.data() + i * 4, &f, 4);
            } else {
                std::memcpy(in.bytes.data() + i * 8, &v, 8);
            }
        }
    }
    return in;
}

} // namespace testing
