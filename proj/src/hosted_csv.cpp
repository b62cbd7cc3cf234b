#include <charconv>

#include "udfvault/error.hpp"
#include "udfvault/hosted.hpp"
#include "udfvault/numeric.hpp"

namespace udfvault::hosted {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    return s;
}

std::string arg(const udf::HostedArgs& args, const std::string& key, std::string fallback)
{
    auto it = args.find(key);
    return it == args.end() ? fallback : it->second;
}

} // namespace

std::vector<std::vector<std::string>> parse_csv(std::string_view text, char delimiter)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c != '"') {
                field.push_back(c);
            } else if (i + 1 < text.size() && text[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else {
                quoted = false;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == delimiter) {
            row.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            row.push_back(std::move(field));
            rows.push_back(std::move(row));
            row.clear();
            field.clear();
            field_started = false;
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (quoted)
        fail(Errc::UdfRuntimeError, "CSV ends inside a quoted field");
    if (field_started || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

void csv_project(runtime::ExecutionEnv& env, const udf::HostedArgs& args)
{
    auto path_it = args.find("path");
    if (path_it == args.end())
        fail(Errc::UdfRuntimeError, "csv_project needs a \"path\" argument");
    const std::string delim = arg(args, "delimiter", ",");
    if (delim.size() != 1)
        fail(Errc::UdfRuntimeError, "delimiter must be a single character");
    const bool has_header = arg(args, "header", "true") != "false";

    auto rows = parse_csv(runtime::lib::read_file(env, path_it->second), delim[0]);
    const std::string column = arg(args, "column", "0");
    std::size_t col = 0;
    bool by_index = false;
    {
        auto [ptr, ec] = std::from_chars(column.data(), column.data() + column.size(), col);
        by_index = ec == std::errc() && ptr == column.data() + column.size();
    }
    std::size_t first = 0;
    if (has_header) {
        if (rows.empty())
            fail(Errc::UdfRuntimeError, "CSV has no header row");
        if (!by_index) {
            const auto& head = rows[0];
            std::size_t k = 0;
            while (k < head.size() && trim(head[k]) != column)
                ++k;
            if (k == head.size())
                fail(Errc::UdfRuntimeError, "CSV has no column named '" + column + "'");
            col = k;
        }
        first = 1;
    } else if (!by_index) {
        fail(Errc::UdfRuntimeError, "column must be an index when the CSV has no header");
    }

    const auto& out = env.output;
    const std::uint64_t count = element_count(out.shape);
    if (rows.size() - first != count)
        fail(Errc::UdfRuntimeError, "CSV has " + std::to_string(rows.size() - first) + " data rows, output " +
                                        out.path + " expects " + std::to_string(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto& row = rows[first + i];
        if (col >= row.size())
            fail(Errc::UdfRuntimeError, "CSV row " + std::to_string(first + i + 1) + " has no column " + std::to_string(col));
        if (out.dtype.kind() == TypeKind::FixedString) {
            runtime::lib::string_set(env, out.path, i, row[col]);
            continue;
        }
        if (!out.dtype.is_numeric())
            fail(Errc::InputDTypeUnsupported, "csv_project cannot fill " + out.dtype.name());
        const std::string_view text = trim(row[col]);
        double v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
            fail(Errc::UdfRuntimeError, "CSV row " + std::to_string(first + i + 1) + ": '" + std::string(text) +
                                            "' is not a number");
        store_from_double(env.output.data.bytes.data() + i * out.dtype.size(), out.dtype.kind(), v);
    }
}

void register_builtins(udf::HostedRegistry& registry)
{
    registry.add("csv_project", csv_project);
}

} // namespace udfvault::hosted
