// Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | primary
//   primary := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

#include <charconv>
#include <cmath>

#include "udfvault/error.hpp"
#include "udfvault/exprlang/ast.hpp"

namespace udfvault::exprlang {

namespace {

constexpr std::string_view kFunctionNames[kFunctionCount] = {"abs", "sqrt", "floor", "ceil", "min", "max", "pow"};
constexpr std::size_t kFunctionArity[kFunctionCount] = {1, 1, 1, 1, 2, 2, 2};

// Bounds recursion on adversarial input such as "((((...".
constexpr int kMaxNesting = 200;

class Parser {
public:
    Parser(std::string_view source, const std::vector<std::string>& aliases)
        : tokens_(tokenize(source)), aliases_(aliases) {}

    Ast parse_all()
    {
        Ast e = expr();
        if (peek().kind != TokenKind::End)
            throw Error(Errc::SyntaxError, "unexpected '" + std::string(peek().text) + "'", peek().offset);
        return e;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& take() { return tokens_[pos_++]; }

    void expect(TokenKind kind, std::string_view what)
    {
        if (peek().kind != kind) {
            auto found = peek().kind == TokenKind::End ? std::string("end of input") : "'" + std::string(peek().text) + "'";
            throw Error(Errc::SyntaxError, "expected " + std::string(what) + ", found " + found, peek().offset);
        }
        ++pos_;
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& p) : p(p)
        {
            if (++p.depth_ > kMaxNesting)
                throw Error(Errc::SyntaxError, "expression nested too deeply", p.peek().offset);
        }
        ~DepthGuard() { --p.depth_; }
        Parser& p;
    };

    Ast expr()
    {
        DepthGuard guard(*this);
        Ast lhs = term();
        while (peek().kind == TokenKind::Plus || peek().kind == TokenKind::Minus) {
            auto op = take().kind == TokenKind::Plus ? BinaryOp::Add : BinaryOp::Sub;
            lhs = Ast::binary(op, std::move(lhs), term());
        }
        return lhs;
    }

    Ast term()
    {
        Ast lhs = unary();
        while (peek().kind == TokenKind::Star || peek().kind == TokenKind::Slash) {
            auto op = take().kind == TokenKind::Star ? BinaryOp::Mul : BinaryOp::Div;
            lhs = Ast::binary(op, std::move(lhs), unary());
        }
        return lhs;
    }

    Ast unary()
    {
        if (peek().kind == TokenKind::Minus) {
            DepthGuard guard(*this);
            take();
            return Ast::neg(unary());
        }
        return primary();
    }

    Ast primary()
    {
        const Token& tok = peek();
        switch (tok.kind) {
        case TokenKind::Number: {
            take();
            double v = 0;
            std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
            return Ast::constant(v);
        }
        case TokenKind::LParen: {
            take();
            Ast inner = expr();
            expect(TokenKind::RParen, "')'");
            return inner;
        }
        case TokenKind::Ident:
            return identifier();
        case TokenKind::End:
            throw Error(Errc::SyntaxError, "unexpected end of input", tok.offset);
        default:
            throw Error(Errc::SyntaxError, "unexpected '" + std::string(tok.text) + "'", tok.offset);
        }
    }

    Ast identifier()
    {
        const Token tok = take();
        if (peek().kind == TokenKind::LParen) {
            auto fn = function_by_name(tok.text);
            if (!fn)
                throw Error(Errc::UnknownIdentifier, "unknown function '" + std::string(tok.text) + "'", tok.offset);
            take();
            std::vector<Ast> args;
            if (peek().kind != TokenKind::RParen) {
                args.push_back(expr());
                while (peek().kind == TokenKind::Comma) {
                    take();
                    args.push_back(expr());
                }
            }
            expect(TokenKind::RParen, "')'");
            if (args.size() != function_arity(*fn))
                throw Error(Errc::ArityError,
                            std::string(tok.text) + " takes " + std::to_string(function_arity(*fn)) + " argument(s), got " +
                                std::to_string(args.size()),
                            tok.offset);
            return Ast::call(*fn, std::move(args));
        }
        if (tok.text == "i")
            return Ast::flat_index();
        if (is_reserved_identifier(tok.text))
            return Ast::coord(static_cast<std::size_t>(std::stoul(std::string(tok.text.substr(1)))));
        for (std::size_t k = 0; k < aliases_.size(); ++k)
            if (aliases_[k] == tok.text)
                return Ast::input(k);
        throw Error(Errc::UnknownIdentifier, "unknown identifier '" + std::string(tok.text) + "'", tok.offset);
    }

    std::vector<Token> tokens_;
    const std::vector<std::string>& aliases_;
    std::size_t pos_ = 0;
    int depth_ = 0;
};

} // namespace

std::size_t function_arity(Function fn) noexcept
{
    return kFunctionArity[static_cast<std::size_t>(fn)];
}

std::string_view function_name(Function fn) noexcept
{
    return kFunctionNames[static_cast<std::size_t>(fn)];
}

std::optional<Function> function_by_name(std::string_view name) noexcept
{
    for (std::size_t k = 0; k < kFunctionCount; ++k)
        if (kFunctionNames[k] == name)
            return static_cast<Function>(k);
    return std::nullopt;
}

double apply_function(Function fn, double a, double b) noexcept
{
    switch (fn) {
    case Function::Abs: return std::fabs(a);
    case Function::Sqrt: return std::sqrt(a);
    case Function::Floor: return std::floor(a);
    case Function::Ceil: return std::ceil(a);
    case Function::Min: return std::fmin(a, b);
    case Function::Max: return std::fmax(a, b);
    case Function::Pow: return std::pow(a, b);
    }
    return 0.0;
}

bool is_reserved_identifier(std::string_view name) noexcept
{
    if (name == "i")
        return true;
    if (name.size() < 2 || name.size() > 3 || name[0] != 'd')
        return false;
    unsigned dim = 0;
    auto digits = name.substr(1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), dim);
    if (ec != std::errc() || ptr != digits.data() + digits.size())
        return false;
    // "d05" is an ordinary identifier; only canonical spellings are reserved.
    return dim < kMaxCoordDims && std::to_string(dim) == digits;
}

Ast Ast::constant(double v)
{
    Ast a;
    a.kind = Kind::Const;
    a.value = v;
    return a;
}

Ast Ast::input(std::size_t alias_index)
{
    Ast a;
    a.kind = Kind::InputRef;
    a.index = alias_index;
    return a;
}

Ast Ast::coord(std::size_t dim)
{
    Ast a;
    a.kind = Kind::Coord;
    a.index = dim;
    return a;
}

Ast Ast::flat_index()
{
    Ast a;
    a.kind = Kind::FlatIndex;
    return a;
}

Ast Ast::neg(Ast child)
{
    Ast a;
    a.kind = Kind::Neg;
    a.children.push_back(std::move(child));
    return a;
}

Ast Ast::binary(BinaryOp op, Ast lhs, Ast rhs)
{
    Ast a;
    a.kind = Kind::BinOp;
    a.op = op;
    a.children.push_back(std::move(lhs));
    a.children.push_back(std::move(rhs));
    return a;
}

Ast Ast::call(Function fn, std::vector<Ast> args)
{
    Ast a;
    a.kind = Kind::Call;
    a.fn = fn;
    a.children = std::move(args);
    return a;
}

Ast parse(std::string_view source, const std::vector<std::string>& aliases)
{
    return Parser(source, aliases).parse_all();
}

} // namespace udfvault::exprlang
