#pragma once

#include "hamava/core.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hamava {

/// One line of a run trace:
///
///     time | node | event-kind | digest | key=value key=value ...
///
/// Values never contain spaces or '|'. Field order is stable so traces can be
/// diffed directly.
struct TraceRecord {
    SimTime time = 0;
    std::string node;
    std::string kind;
    Digest digest = 0;
    std::vector<std::pair<std::string, std::string>> attrs;

    std::string_view get(std::string_view key) const;
    bool has(std::string_view key) const;
    std::uint64_t u64(std::string_view key, std::uint64_t fallback = 0) const;
};

class Trace {
public:
    std::vector<TraceRecord> records;

    void add(TraceRecord r) { records.push_back(std::move(r)); }
    void write(std::ostream& out) const;
    std::string to_string() const;
    /// Digest over the serialized lines.
    Digest digest() const;

    static Trace parse(std::istream& in);
};

std::string format_record(const TraceRecord& r);
TraceRecord parse_record(std::string_view line);

/// Builder for attribute lists.
class Attrs {
public:
    Attrs& operator()(std::string key, std::string value) {
        items_.emplace_back(std::move(key), std::move(value));
        return *this;
    }
    Attrs& operator()(std::string key, std::uint64_t value) {
        return (*this)(std::move(key), std::to_string(value));
    }
    Attrs& operator()(std::string key, ReplicaId id) { return (*this)(std::move(key), id.value); }
    Attrs& operator()(std::string key, ClusterId c) {
        return (*this)(std::move(key), std::uint64_t{c.index});
    }
    std::vector<std::pair<std::string, std::string>> take() { return std::move(items_); }

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

std::string join_ids(const std::vector<ReplicaId>& ids);
std::vector<std::uint64_t> split_u64(std::string_view list);

}  // namespace hamava
