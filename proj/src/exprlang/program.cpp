#include "udfvault/exprlang/program.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <set>

#include "udfvault/error.hpp"

namespace udfvault::exprlang {

namespace {

bool valid_identifier(std::string_view s)
{
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
        return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

void collect_inputs(const Ast& ast, std::set<std::size_t>& out)
{
    if (ast.kind == Ast::Kind::InputRef)
        out.insert(ast.index);
    for (const auto& c : ast.children)
        collect_inputs(c, out);
}

class CodeGen {
public:
    CodeGen(Program& program, std::vector<std::uint16_t> load_slot) : p_(program), load_slot_(std::move(load_slot)) {}

    void emit(const Ast& ast)
    {
        switch (ast.kind) {
        case Ast::Kind::Const:
            op(Opcode::Const, constant(ast.value));
            break;
        case Ast::Kind::InputRef:
            op(Opcode::Load, load_slot_.at(ast.index));
            break;
        case Ast::Kind::Coord:
            if (ast.index >= kMaxCoordDims)
                fail(Errc::InvalidArgument, "coordinate dimension out of range");
            op(Opcode::Coord, static_cast<std::uint16_t>(ast.index));
            break;
        case Ast::Kind::FlatIndex:
            op(Opcode::Index);
            break;
        case Ast::Kind::Neg:
            emit(ast.children.at(0));
            op(Opcode::Neg);
            break;
        case Ast::Kind::BinOp:
            emit(ast.children.at(0));
            emit(ast.children.at(1));
            op(static_cast<Opcode>(static_cast<std::uint8_t>(Opcode::Add) + static_cast<std::uint8_t>(ast.op)));
            break;
        case Ast::Kind::Call:
            if (ast.children.size() != function_arity(ast.fn))
                fail(Errc::ArityError, std::string(function_name(ast.fn)) + " arity mismatch");
            for (const auto& c : ast.children)
                emit(c);
            p_.code.push_back(static_cast<std::uint8_t>(Opcode::Call));
            p_.code.push_back(static_cast<std::uint8_t>(ast.fn));
            break;
        }
    }

private:
    std::uint16_t constant(double v)
    {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (std::size_t k = 0; k < p_.const_pool.size(); ++k)
            if (std::bit_cast<std::uint64_t>(p_.const_pool[k]) == bits)
                return static_cast<std::uint16_t>(k);
        if (p_.const_pool.size() >= 0xFFFF)
            fail(Errc::InvalidArgument, "too many distinct constants");
        p_.const_pool.push_back(v);
        return static_cast<std::uint16_t>(p_.const_pool.size() - 1);
    }

    void op(Opcode code)
    {
        p_.code.push_back(static_cast<std::uint8_t>(code));
    }

    void op(Opcode code, std::uint16_t operand)
    {
        p_.code.push_back(static_cast<std::uint8_t>(code));
        append_le<std::uint16_t>(p_.code, operand);
    }

    Program& p_;
    std::vector<std::uint16_t> load_slot_;
};

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    template <class T>
    T take()
    {
        if (bytes.size() - pos < sizeof(T))
            fail(Errc::MalformedBytecode, "bytecode truncated at offset " + std::to_string(pos));
        T v = load_le<T>(bytes.data() + pos);
        pos += sizeof(T);
        return v;
    }
};

} // namespace

bool operator==(const Program& a, const Program& b)
{
    if (a.input_table != b.input_table || a.code != b.code || a.const_pool.size() != b.const_pool.size())
        return false;
    for (std::size_t k = 0; k < a.const_pool.size(); ++k)
        if (std::bit_cast<std::uint64_t>(a.const_pool[k]) != std::bit_cast<std::uint64_t>(b.const_pool[k]))
            return false;
    return true;
}

ProgramInfo analyze(const Program& program)
{
    ProgramInfo info;
    std::size_t depth = 0;
    Reader r{program.code};
    auto bad = [](const std::string& why) { fail(Errc::MalformedBytecode, why); };
    auto pop = [&](std::size_t n, std::size_t at) {
        if (depth < n)
            bad("stack underflow at code offset " + std::to_string(at));
        depth -= n;
    };
    auto push = [&](std::size_t at) {
        if (++depth > kMaxStackDepth)
            bad("stack deeper than " + std::to_string(kMaxStackDepth) + " at code offset " + std::to_string(at));
        info.max_stack = std::max(info.max_stack, depth);
    };

    bool halted = false;
    while (r.pos < program.code.size()) {
        if (halted)
            bad("code continues after HALT");
        const std::size_t at = r.pos;
        const auto op = static_cast<Opcode>(r.take<std::uint8_t>());
        Instruction ins{op, 0};
        switch (op) {
        case Opcode::Halt:
            if (depth < 1)
                bad("HALT with empty stack");
            halted = true;
            break;
        case Opcode::Const:
            ins.operand = r.take<std::uint16_t>();
            if (ins.operand >= program.const_pool.size())
                bad("CONST operand " + std::to_string(ins.operand) + " outside constant pool");
            push(at);
            break;
        case Opcode::Load:
            ins.operand = r.take<std::uint16_t>();
            if (ins.operand >= program.input_table.size())
                bad("LOAD operand " + std::to_string(ins.operand) + " outside input table");
            push(at);
            break;
        case Opcode::Coord:
            ins.operand = r.take<std::uint16_t>();
            if (ins.operand >= kMaxCoordDims)
                bad("COORD operand " + std::to_string(ins.operand) + " out of range");
            info.coord_rank = std::max<std::size_t>(info.coord_rank, ins.operand + 1u);
            push(at);
            break;
        case Opcode::Index:
            push(at);
            break;
        case Opcode::Add:
        case Opcode::Sub:
        case Opcode::Mul:
        case Opcode::Div:
            pop(2, at);
            push(at);
            break;
        case Opcode::Neg:
            pop(1, at);
            push(at);
            break;
        case Opcode::Call: {
            ins.operand = r.take<std::uint8_t>();
            if (ins.operand >= kFunctionCount)
                bad("CALL operand " + std::to_string(ins.operand) + " is not a function");
            pop(function_arity(static_cast<Function>(ins.operand)), at);
            push(at);
            break;
        }
        default:
            bad("unknown opcode 0x" + std::to_string(static_cast<unsigned>(op)) + " at code offset " + std::to_string(at));
        }
        info.instructions.push_back(ins);
    }
    if (!halted)
        bad("code does not end with HALT");
    return info;
}

Program compile_ast(const Ast& ast, std::size_t alias_count)
{
    std::set<std::size_t> used;
    collect_inputs(ast, used);
    if (alias_count > 0xFFFF)
        fail(Errc::InvalidArgument, "too many inputs");
    Program program;
    std::vector<std::uint16_t> load_slot(alias_count, 0);
    for (auto alias : used) {
        if (alias >= alias_count)
            fail(Errc::InvalidArgument, "input reference outside alias list");
        load_slot[alias] = static_cast<std::uint16_t>(program.input_table.size());
        program.input_table.push_back(static_cast<std::uint16_t>(alias));
    }
    CodeGen(program, std::move(load_slot)).emit(ast);
    program.code.push_back(static_cast<std::uint8_t>(Opcode::Halt));
    analyze(program);
    return program;
}

Program compile(std::string_view source, const std::vector<std::string>& input_aliases)
{
    std::set<std::string_view> seen;
    for (const auto& alias : input_aliases) {
        if (!valid_identifier(alias))
            fail(Errc::InvalidArgument, "alias '" + alias + "' is not an identifier");
        if (is_reserved_identifier(alias))
            fail(Errc::InvalidArgument, "alias '" + alias + "' is reserved");
        if (!seen.insert(alias).second)
            fail(Errc::InvalidArgument, "alias '" + alias + "' given twice");
    }
    const Ast ast = parse(source, input_aliases);
    try {
        return compile_ast(ast, input_aliases.size());
    } catch (const Error& e) {
        if (e.code() == Errc::MalformedBytecode)
            throw Error(Errc::SyntaxError, std::string("expression too complex: ") + e.what(), 0);
        throw;
    }
}

Bytes serialize(const Program& program)
{
    Bytes out(kBytecodeMagic.begin(), kBytecodeMagic.end());
    append_le<std::uint16_t>(out, kBytecodeVersion);
    append_le<std::uint16_t>(out, static_cast<std::uint16_t>(program.const_pool.size()));
    for (double v : program.const_pool)
        append_le<double>(out, v);
    append_le<std::uint16_t>(out, static_cast<std::uint16_t>(program.input_table.size()));
    for (auto j : program.input_table)
        append_le<std::uint16_t>(out, j);
    append_le<std::uint32_t>(out, static_cast<std::uint32_t>(program.code.size()));
    out.insert(out.end(), program.code.begin(), program.code.end());
    return out;
}

Program deserialize(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kBytecodeMagic.size() ||
        std::string_view(reinterpret_cast<const char*>(bytes.data()), kBytecodeMagic.size()) != kBytecodeMagic)
        fail(Errc::BadMagic, "object does not start with UXB1");
    Reader r{bytes, kBytecodeMagic.size()};
    const auto version = r.take<std::uint16_t>();
    if (version != kBytecodeVersion)
        fail(Errc::UnsupportedVersion, "bytecode version " + std::to_string(version) + " is not supported");
    Program program;
    const auto pool = r.take<std::uint16_t>();
    for (std::uint16_t k = 0; k < pool; ++k)
        program.const_pool.push_back(r.take<double>());
    const auto inputs = r.take<std::uint16_t>();
    for (std::uint16_t k = 0; k < inputs; ++k)
        program.input_table.push_back(r.take<std::uint16_t>());
    const auto code_len = r.take<std::uint32_t>();
    if (bytes.size() - r.pos != code_len)
        fail(Errc::MalformedBytecode, "code length field does not match the object size");
    program.code.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos), bytes.end());
    analyze(program);
    return program;
}

} // namespace udfvault::exprlang
