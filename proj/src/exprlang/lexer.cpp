#include <cctype>
#include <charconv>
#include <cmath>

#include "udfvault/error.hpp"
#include "udfvault/exprlang/ast.hpp"

namespace udfvault::exprlang {

namespace {

bool is_ident_start(char c)
{
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_digit(char c)
{
    return c >= '0' && c <= '9';
}

} // namespace

std::vector<Token> tokenize(std::string_view source)
{
    std::vector<Token> tokens;
    std::size_t pos = 0;
    while (pos < source.size()) {
        const char c = source[pos];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
            continue;
        }
        const std::size_t start = pos;
        auto single = [&](TokenKind kind) {
            tokens.push_back({kind, source.substr(start, 1), start});
            ++pos;
        };
        switch (c) {
        case '+': single(TokenKind::Plus); continue;
        case '-': single(TokenKind::Minus); continue;
        case '*': single(TokenKind::Star); continue;
        case '/': single(TokenKind::Slash); continue;
        case '(': single(TokenKind::LParen); continue;
        case ')': single(TokenKind::RParen); continue;
        case ',': single(TokenKind::Comma); continue;
        default: break;
        }
        if (is_ident_start(c)) {
            while (pos < source.size() && is_ident_char(source[pos]))
                ++pos;
            tokens.push_back({TokenKind::Ident, source.substr(start, pos - start), start});
            continue;
        }
        if (is_digit(c) || (c == '.' && pos + 1 < source.size() && is_digit(source[pos + 1]))) {
            while (pos < source.size() && is_digit(source[pos]))
                ++pos;
            if (pos < source.size() && source[pos] == '.') {
                ++pos;
                while (pos < source.size() && is_digit(source[pos]))
                    ++pos;
            }
            if (pos < source.size() && (source[pos] == 'e' || source[pos] == 'E')) {
                std::size_t exp = pos + 1;
                if (exp < source.size() && (source[exp] == '+' || source[exp] == '-'))
                    ++exp;
                if (exp >= source.size() || !is_digit(source[exp]))
                    throw Error(Errc::SyntaxError, "malformed exponent in number", pos);
                pos = exp;
                while (pos < source.size() && is_digit(source[pos]))
                    ++pos;
            }
            auto text = source.substr(start, pos - start);
            double value = 0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
            if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value))
                throw Error(Errc::SyntaxError, "number '" + std::string(text) + "' is not a finite binary64", start);
            tokens.push_back({TokenKind::Number, text, start});
            continue;
        }
        throw Error(Errc::SyntaxError, std::string("unexpected character '") + c + "'", start);
    }
    tokens.push_back({TokenKind::End, source.substr(source.size()), source.size()});
    return tokens;
}

} // namespace udfvault::exprlang
