#pragma once

// UDF payload: canonical JSON header, one 0x00 byte, then exactly
// bytecode_size bytes of backend object code.
//
// Canonical JSON is compact with keys sorted bytewise, so the header, and
// thus the signed byte string, is a pure function of the metadata values.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "udfvault/buffer.hpp"

namespace udfvault::udf {

struct SignatureBlock {
    std::string name;
    std::string email;
    std::string public_key;        // base64
    std::string payload_signature; // base64; empty when unsigned

    friend bool operator==(const SignatureBlock&, const SignatureBlock&) = default;
};

struct UdfMetadata {
    std::string backend;
    std::uint64_t bytecode_size = 0;
    /// Container paths; position k is input k of the object code.
    std::vector<std::string> input_datasets;
    /// Names the UDF uses for each input. Optional in stored headers;
    /// defaults to the last path component of each input.
    std::vector<std::string> input_aliases;
    std::string output_dataset;
    std::string output_datatype;
    Shape output_resolution;
    SignatureBlock signature;
    std::string source_code;

    friend bool operator==(const UdfMetadata&, const UdfMetadata&) = default;
};

/// Canonical header text. With `include_payload_signature` false the
/// signature block omits its payload_signature member: that form is what
/// gets signed.
std::string header_json(const UdfMetadata& meta, bool include_payload_signature = true);

/// Parses a header. Fields outside the schema are rejected.
/// Throws MalformedHeader.
UdfMetadata parse_header(std::string_view json_text);

struct ParsedPayload {
    UdfMetadata meta;
    std::string header;    // the header bytes as stored
    std::span<const std::uint8_t> object;
};

Bytes build_payload(const UdfMetadata& meta, std::span<const std::uint8_t> object);
/// Splits at the first 0x00 and checks bytecode_size against the trailing
/// length. Throws MalformedHeader.
ParsedPayload parse_payload(std::span<const std::uint8_t> payload);

/// header_json(meta, false) || 0x00 || object
Bytes signed_bytes(const UdfMetadata& meta, std::span<const std::uint8_t> object);

/// Width-padding kept alongside output_resolution so that the header length
/// depends only on the output rank: each extent is padded to 20 characters,
/// the width of the largest u64.
std::string resolution_reserve(const Shape& resolution);

} // namespace udfvault::udf
