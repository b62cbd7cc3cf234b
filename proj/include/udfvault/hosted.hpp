#pragma once

// Hosted functions shipped with the library.

#include <string>
#include <string_view>
#include <vector>

#include "udfvault/runtime.hpp"
#include "udfvault/udf/backend.hpp"

namespace udfvault::hosted {

/// RFC 4180 records: quoted fields may hold delimiters, doubled quotes and
/// line breaks. A trailing newline does not start a new record.
std::vector<std::vector<std::string>> parse_csv(std::string_view text, char delimiter = ',');

/// Projects one CSV column into the output dataset, one element per data row
/// in file order.
///
/// args: path (required), column (header name or 0-based index, default 0),
/// header ("true"/"false", default "true"), delimiter (one character, default ",").
/// Numeric outputs parse each field as a decimal number and apply the
/// numeric cast rule; fixed-length string outputs take the text as is.
/// The file is read through lib::read_file, so the signer's profile must
/// grant read access to it.
void csv_project(runtime::ExecutionEnv& env, const udf::HostedArgs& args);

/// Registers csv_project.
void register_builtins(udf::HostedRegistry& registry);

} // namespace udfvault::hosted
