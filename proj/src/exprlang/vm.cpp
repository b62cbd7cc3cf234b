#include "udfvault/exprlang/vm.hpp"

#include <algorithm>
#include <cstring>
#include <exception>
#include <limits>
#include <thread>

#include "udfvault/error.hpp"
#include "udfvault/numeric.hpp"

namespace udfvault::exprlang {

namespace {

// Elements per dispatch round; each opcode runs over a whole block.
constexpr std::size_t kBlock = 512;

template <class T>
void load_block(const std::uint8_t* base, std::uint64_t start, std::size_t len, double* dst) noexcept
{
    const std::uint8_t* src = base + start * sizeof(T);
    for (std::size_t e = 0; e < len; ++e) {
        T v;
        std::memcpy(&v, src + e * sizeof(T), sizeof(T));
        dst[e] = static_cast<double>(v);
    }
}

template <class T>
void store_block(std::uint8_t* base, std::uint64_t start, std::size_t len, const double* src) noexcept
{
    std::uint8_t* dst = base + start * sizeof(T);
    for (std::size_t e = 0; e < len; ++e) {
        const T v = cast_from_double<T>(src[e]);
        std::memcpy(dst + e * sizeof(T), &v, sizeof(T));
    }
}

using LoadFn = void (*)(const std::uint8_t*, std::uint64_t, std::size_t, double*) noexcept;
using StoreFn = void (*)(std::uint8_t*, std::uint64_t, std::size_t, const double*) noexcept;

LoadFn loader_for(TypeKind kind)
{
    switch (kind) {
    case TypeKind::Int8: return load_block<std::int8_t>;
    case TypeKind::Int16: return load_block<std::int16_t>;
    case TypeKind::Int32: return load_block<std::int32_t>;
    case TypeKind::Int64: return load_block<std::int64_t>;
    case TypeKind::UInt8: return load_block<std::uint8_t>;
    case TypeKind::UInt16: return load_block<std::uint16_t>;
    case TypeKind::UInt32: return load_block<std::uint32_t>;
    case TypeKind::UInt64: return load_block<std::uint64_t>;
    case TypeKind::Float32: return load_block<float>;
    case TypeKind::Float64: return load_block<double>;
    default: return nullptr;
    }
}

StoreFn storer_for(TypeKind kind)
{
    switch (kind) {
    case TypeKind::Int8: return store_block<std::int8_t>;
    case TypeKind::Int16: return store_block<std::int16_t>;
    case TypeKind::Int32: return store_block<std::int32_t>;
    case TypeKind::Int64: return store_block<std::int64_t>;
    case TypeKind::UInt8: return store_block<std::uint8_t>;
    case TypeKind::UInt16: return store_block<std::uint16_t>;
    case TypeKind::UInt32: return store_block<std::uint32_t>;
    case TypeKind::UInt64: return store_block<std::uint64_t>;
    case TypeKind::Float32: return store_block<float>;
    case TypeKind::Float64: return store_block<double>;
    default: return nullptr;
    }
}

struct Plan {
    ProgramInfo info;
    std::vector<double> pool;
    std::vector<const std::uint8_t*> load_base; // by LOAD slot
    std::vector<LoadFn> load_fn;
    std::vector<std::uint64_t> strides;
    Shape shape;
    std::uint8_t* out = nullptr;
    StoreFn store = nullptr;
};

void run_range(const Plan& plan, std::uint64_t begin, std::uint64_t end, const std::stop_token& stop)
{
    const std::size_t depth = plan.info.max_stack;
    std::vector<double> stack(depth * kBlock);
    auto slot = [&](std::size_t sp) { return stack.data() + sp * kBlock; };

    for (std::uint64_t start = begin; start < end; start += kBlock) {
        if (stop.stop_requested())
            throw Error(Errc::Timeout, "evaluation cancelled");
        const std::size_t len = static_cast<std::size_t>(std::min<std::uint64_t>(kBlock, end - start));
        std::size_t sp = 0;
        for (const auto& ins : plan.info.instructions) {
            switch (ins.op) {
            case Opcode::Halt:
                break;
            case Opcode::Const:
                std::fill_n(slot(sp++), len, plan.pool[ins.operand]);
                break;
            case Opcode::Load:
                plan.load_fn[ins.operand](plan.load_base[ins.operand], start, len, slot(sp++));
                break;
            case Opcode::Index: {
                double* d = slot(sp++);
                for (std::size_t e = 0; e < len; ++e)
                    d[e] = static_cast<double>(start + e);
                break;
            }
            case Opcode::Coord: {
                double* d = slot(sp++);
                const auto stride = plan.strides[ins.operand];
                const auto extent = plan.shape[ins.operand];
                for (std::size_t e = 0; e < len; ++e)
                    d[e] = static_cast<double>(((start + e) / stride) % extent);
                break;
            }
            case Opcode::Add: {
                double* a = slot(sp - 2);
                const double* b = slot(sp - 1);
                for (std::size_t e = 0; e < len; ++e)
                    a[e] = a[e] + b[e];
                --sp;
                break;
            }
            case Opcode::Sub: {
                double* a = slot(sp - 2);
                const double* b = slot(sp - 1);
                for (std::size_t e = 0; e < len; ++e)
                    a[e] = a[e] - b[e];
                --sp;
                break;
            }
            case Opcode::Mul: {
                double* a = slot(sp - 2);
                const double* b = slot(sp - 1);
                for (std::size_t e = 0; e < len; ++e)
                    a[e] = a[e] * b[e];
                --sp;
                break;
            }
            case Opcode::Div: {
                double* a = slot(sp - 2);
                const double* b = slot(sp - 1);
                for (std::size_t e = 0; e < len; ++e)
                    a[e] = a[e] / b[e];
                --sp;
                break;
            }
            case Opcode::Neg: {
                double* a = slot(sp - 1);
                for (std::size_t e = 0; e < len; ++e)
                    a[e] = -a[e];
                break;
            }
            case Opcode::Call: {
                const auto fn = static_cast<Function>(ins.operand);
                if (function_arity(fn) == 1) {
                    double* a = slot(sp - 1);
                    for (std::size_t e = 0; e < len; ++e)
                        a[e] = apply_function(fn, a[e]);
                } else {
                    double* a = slot(sp - 2);
                    const double* b = slot(sp - 1);
                    for (std::size_t e = 0; e < len; ++e)
                        a[e] = apply_function(fn, a[e], b[e]);
                    --sp;
                }
                break;
            }
            }
        }
        plan.store(plan.out, start, len, slot(sp - 1));
    }
}

} // namespace

std::uint64_t static_cost(const ProgramInfo& info, std::uint64_t elements) noexcept
{
    const std::uint64_t ops = info.instructions.size();
    if (elements != 0 && ops > std::numeric_limits<std::uint64_t>::max() / elements)
        return std::numeric_limits<std::uint64_t>::max();
    return ops * elements;
}

ProgramInfo validate(const Program& program, std::span<const InputView> inputs, const Shape& out_shape,
                     const DType& out_dtype, std::uint64_t op_budget)
{
    ProgramInfo info = analyze(program);
    const std::uint64_t n = element_count(out_shape);

    const auto cost = static_cost(info, n);
    if (cost > op_budget)
        fail(Errc::BudgetExceeded,
             "static cost " + std::to_string(cost) + " exceeds op budget " + std::to_string(op_budget));

    for (auto alias : program.input_table) {
        if (alias >= inputs.size())
            fail(Errc::ShapeMismatch, "program reads input " + std::to_string(alias) + " but only " +
                                          std::to_string(inputs.size()) + " were supplied");
    }
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const auto& in = inputs[k];
        if (!in.dtype.is_numeric())
            fail(Errc::InputDTypeUnsupported, "input " + std::to_string(k) + " has type " + in.dtype.name() +
                                                  "; expressions consume numeric inputs only");
        if (in.bytes.size() != n * in.dtype.size())
            fail(Errc::ShapeMismatch, "input " + std::to_string(k) + " has " +
                                          std::to_string(in.bytes.size() / in.dtype.size()) + " elements, output has " +
                                          std::to_string(n));
    }
    if (!out_dtype.is_numeric())
        fail(Errc::InputDTypeUnsupported, "expression output type " + out_dtype.name() + " is not numeric");
    if (info.coord_rank > out_shape.size())
        fail(Errc::ShapeMismatch, "expression uses d" + std::to_string(info.coord_rank - 1) + " but output rank is " +
                                      std::to_string(out_shape.size()));
    return info;
}

void evaluate_into(const Program& program, std::span<const InputView> inputs, const Shape& out_shape,
                   const DType& out_dtype, std::span<std::uint8_t> out, const EvalOptions& options)
{
    Plan plan;
    plan.info = validate(program, inputs, out_shape, out_dtype, options.op_budget);
    const std::uint64_t n = element_count(out_shape);
    if (out.size() != n * out_dtype.size())
        fail(Errc::ShapeMismatch, "output buffer size does not match the output shape");

    plan.pool = program.const_pool;
    for (auto alias : program.input_table) {
        plan.load_base.push_back(inputs[alias].bytes.data());
        plan.load_fn.push_back(loader_for(inputs[alias].dtype.kind()));
    }
    plan.shape = out_shape;
    plan.strides.assign(out_shape.size(), 1);
    for (std::size_t d = out_shape.size(); d-- > 1;)
        plan.strides[d - 1] = plan.strides[d] * out_shape[d];
    plan.out = out.data();
    plan.store = storer_for(out_dtype.kind());

    const unsigned workers = std::max(1u, options.workers);
    if (workers == 1 || n < kBlock * 2) {
        run_range(plan, 0, n, options.stop);
        return;
    }
    // Split on block boundaries; placement does not influence results.
    const std::uint64_t blocks = (n + kBlock - 1) / kBlock;
    const std::uint64_t per = (blocks + workers - 1) / workers;
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> threads;
        for (unsigned w = 0; w < workers; ++w) {
            const std::uint64_t begin = std::min(n, w * per * kBlock);
            const std::uint64_t end = std::min(n, (w + 1) * per * kBlock);
            if (begin >= end)
                break;
            threads.emplace_back([&, w, begin, end] {
                try {
                    run_range(plan, begin, end, options.stop);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

DataBuffer evaluate(const Program& program, std::span<const InputView> inputs, const Shape& out_shape,
                    const DType& out_dtype, const EvalOptions& options)
{
    DataBuffer out;
    out.bytes.resize(element_count(out_shape) * out_dtype.size());
    evaluate_into(program, inputs, out_shape, out_dtype, out.bytes, options);
    return out;
}

} // namespace udfvault::exprlang
