#include "hamava/messages.hpp"

namespace hamava {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string_view message_name(const Message& m) {
    static constexpr std::string_view names[] = {
        "TxnForward", "Propose",  "Prepare",   "Commit",    "ViewReport", "NewView",
        "ElectComplaint", "BrdContribution", "Agg", "Echo", "Ready", "Valid",
        "Request", "Ack", "RoundHint", "CurrState", "Inter", "Local",
        "LComplaint", "RComplaint", "ComplaintRelay", "CatchUp"};
    static_assert(std::size(names) == std::variant_size_v<Message>);
    return names[m.index()];
}

std::optional<Round> message_round(const Message& m) {
    return std::visit(
        overloaded{[](const TxnForward&) -> std::optional<Round> { return std::nullopt; },
                   [](const ElectComplaint&) -> std::optional<Round> { return std::nullopt; },
                   [](const Request& x) -> std::optional<Round> { return x.req.round; },
                   [](const CurrState& x) -> std::optional<Round> { return x.body.r; },
                   [](const BrdContribution& x) -> std::optional<Round> { return x.r; },
                   [](const auto& x) -> std::optional<Round> { return x.r; }},
        m);
}

bool is_global(const Message& m) {
    return std::holds_alternative<Inter>(m) || std::holds_alternative<RComplaint>(m);
}

std::string_view message_category(const Message& m) {
    switch (m.index()) {
        case 0: case 1: case 2: case 3: case 4: case 5: return "tob";
        case 6: return "election";
        case 7: case 8: case 9: case 10: case 11: return "brd";
        case 12: case 13: case 14: case 15: return "reconfig";
        case 16: return "inter";
        case 17: return "local";
        case 21: return "catch_up";
        default: return "complaint";
    }
}

Digest ops_digest(const std::vector<Operation>& ops) { return digest_of(ops); }
Digest txn_digest(const Txn& t) { return digest_of(t); }
Digest set_digest(const AttributedSet& set) { return digest_of(set); }

RecsSet union_of(const AttributedSet& set) {
    RecsSet out;
    for (const auto& [sender, msg] : set) out.merge(msg.recs);
    return out;
}

}  // namespace hamava
