#pragma once

#include <cstdint>
#include <span>
#include <stop_token>

#include "udfvault/buffer.hpp"
#include "udfvault/dtype.hpp"
#include "udfvault/exprlang/program.hpp"

namespace udfvault::exprlang {

struct InputView {
    std::span<const std::uint8_t> bytes;
    DType dtype;
};

struct EvalOptions {
    std::uint64_t op_budget = 10'000'000'000ull;
    unsigned workers = 1;
    /// Checked between blocks; a stop request aborts with Timeout.
    std::stop_token stop;
};

/// Instruction count x element count, saturating.
std::uint64_t static_cost(const ProgramInfo& info, std::uint64_t elements) noexcept;

/// The checks evaluate_into performs before computing anything, in order:
/// BudgetExceeded, ShapeMismatch (missing inputs, element counts, output
/// size, COORD rank), InputDTypeUnsupported (non-numeric inputs or output).
ProgramInfo validate(const Program& program, std::span<const InputView> inputs, const Shape& out_shape,
                     const DType& out_dtype, std::uint64_t op_budget);

/// Evaluates `program` at every flat index of `out_shape` into `out`.
/// Runs validate() first. Elements are computed independently in binary64, so any partition of the
/// index range yields the same bytes.
void evaluate_into(const Program& program, std::span<const InputView> inputs, const Shape& out_shape,
                   const DType& out_dtype, std::span<std::uint8_t> out, const EvalOptions& options = {});

DataBuffer evaluate(const Program& program, std::span<const InputView> inputs, const Shape& out_shape,
                    const DType& out_dtype, const EvalOptions& options = {});

} // namespace udfvault::exprlang
