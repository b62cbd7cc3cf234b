#pragma once

// Text rendering of dataset values, used by `udfvault read --format csv`.

#include <ostream>
#include <string>

#include "udfvault/buffer.hpp"
#include "udfvault/dtype.hpp"

namespace udfvault {

/// One line per index of the leading dimension, elements in row-major order,
/// comma separated. Rank-1 datasets give one element per line. Floats use the
/// shortest text that parses back to the same value; compound elements expand
/// to one field per member. String fields are quoted when they would not
/// survive a CSV parser otherwise.
void write_csv(std::ostream& out, const DataBuffer& data, const DType& dtype, const Shape& shape);

std::string format_csv(const DataBuffer& data, const DType& dtype, const Shape& shape);

} // namespace udfvault
