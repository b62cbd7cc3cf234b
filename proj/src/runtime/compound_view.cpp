#include <algorithm>
#include <cctype>
#include <set>

#include "udfvault/error.hpp"
#include "udfvault/runtime.hpp"

namespace udfvault::runtime {

std::string sanitize_member_name(std::string_view raw)
{
    auto cut = raw.find_first_of("([{");
    std::string_view s = raw.substr(0, cut);
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == ' ' || c == '-')
            out.push_back('_');
        else
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

const ViewMember& CompoundView::member(std::string_view name) const
{
    for (const auto& m : members)
        if (m.name == name)
            return m;
    fail(Errc::UnknownName, "compound has no member '" + std::string(name) + "'");
}

CompoundView build_compound_view(const DType& compound)
{
    if (!compound.is_compound())
        fail(Errc::InvalidArgument, "type " + compound.name() + " is not a compound");
    CompoundView view;
    view.record_size = compound.size();
    std::set<std::string> names;
    auto claim = [&](const std::string& name, const std::string& raw) {
        if (!names.insert(name).second)
            fail(Errc::NameCollision, "member '" + raw + "' maps to '" + name + "', which is already taken");
    };

    std::size_t packed = 0;
    std::size_t pads = 0;
    auto pad_to = [&](std::size_t offset) {
        if (offset <= packed)
            return;
        ViewMember pad;
        pad.name = "_pad" + std::to_string(pads++);
        pad.offset = packed;
        pad.length = offset - packed;
        claim(pad.name, pad.name);
        view.members.push_back(std::move(pad));
    };

    for (const auto& m : compound.members()) {
        pad_to(m.offset);
        ViewMember vm;
        vm.name = sanitize_member_name(m.raw_name);
        if (vm.name.empty())
            fail(Errc::InvalidArgument, "member '" + m.raw_name + "' has no usable name after sanitization");
        claim(vm.name, m.raw_name);
        vm.raw_name = m.raw_name;
        vm.offset = m.offset;
        vm.length = m.dtype.size();
        vm.dtype = m.dtype;
        packed = m.offset + vm.length;
        view.members.push_back(std::move(vm));
    }
    pad_to(view.record_size);
    return view;
}

} // namespace udfvault::runtime
