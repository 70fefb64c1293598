#include "hamava/trace.hpp"

#include "hamava/codec.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hamava {

std::string_view TraceRecord::get(std::string_view key) const {
    for (const auto& [k, v] : attrs)
        if (k == key) return v;
    return {};
}

bool TraceRecord::has(std::string_view key) const {
    for (const auto& [k, v] : attrs)
        if (k == key) return true;
    return false;
}

std::uint64_t TraceRecord::u64(std::string_view key, std::uint64_t fallback) const {
    auto v = get(key);
    std::uint64_t out = fallback;
    if (!v.empty()) std::from_chars(v.data(), v.data() + v.size(), out);
    return out;
}

std::string format_record(const TraceRecord& r) {
    std::string line = std::to_string(r.time);
    line += " | ";
    line += r.node;
    line += " | ";
    line += r.kind;
    line += " | ";
    line += hex(r.digest);
    line += " |";
    for (const auto& [k, v] : r.attrs) {
        line += ' ';
        line += k;
        line += '=';
        line += v;
    }
    return line;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

TraceRecord parse_record(std::string_view line) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
        auto bar = line.find('|', start);
        if (bar == std::string_view::npos) throw std::runtime_error("malformed trace line");
        parts.push_back(trim(line.substr(start, bar - start)));
        start = bar + 1;
    }
    TraceRecord r;
    std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), r.time);
    r.node = std::string(parts[1]);
    r.kind = std::string(parts[2]);
    std::from_chars(parts[3].data(), parts[3].data() + parts[3].size(), r.digest, 16);
    std::string_view rest = trim(line.substr(start));
    while (!rest.empty()) {
        auto sp = rest.find(' ');
        auto tok = rest.substr(0, sp);
        auto eq = tok.find('=');
        if (eq != std::string_view::npos)
            r.attrs.emplace_back(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
        if (sp == std::string_view::npos) break;
        rest = trim(rest.substr(sp + 1));
    }
    return r;
}

void Trace::write(std::ostream& out) const {
    for (const auto& r : records) out << format_record(r) << '\n';
}

std::string Trace::to_string() const {
    std::ostringstream out;
    write(out);
    return out.str();
}

Digest Trace::digest() const {
    HashSink h;
    for (const auto& r : records) {
        put_str(h, format_record(r));
        h.put_byte('\n');
    }
    return h.finish();
}

Trace Trace::parse(std::istream& in) {
    Trace t;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        t.records.push_back(parse_record(line));
    }
    return t;
}

std::string join_ids(const std::vector<ReplicaId>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(ids[i].value);
    }
    return out.empty() ? "-" : out;
}

std::vector<std::uint64_t> split_u64(std::string_view list) {
    std::vector<std::uint64_t> out;
    if (list == "-") return out;
    while (!list.empty()) {
        auto comma = list.find(',');
        auto tok = list.substr(0, comma);
        std::uint64_t v = 0;
        std::from_chars(tok.data(), tok.data() + tok.size(), v);
        out.push_back(v);
        if (comma == std::string_view::npos) break;
        list.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace hamava
