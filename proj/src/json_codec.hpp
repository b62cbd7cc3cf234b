#pragma once

// JSON encodings shared by the container index and the UDF header.

#include <json.hpp>

#include "udfvault/dtype.hpp"

namespace udfvault::detail {

nlohmann::json dtype_to_json(const DType& dtype);
DType dtype_from_json(const nlohmann::json& j);

} // namespace udfvault::detail
