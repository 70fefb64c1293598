#include "hamava/harness.hpp"

namespace hamava {

const RoundMetrics* Metrics::round(Round r) const {
    for (const auto& m : rounds)
        if (m.r == r) return &m;
    return nullptr;
}

Metrics count_messages(const Trace& trace) {
    std::set<std::string> byz;
    for (const auto& r : trace.records)
        if (r.node == "harness" && r.kind == "scenario")
            for (auto id : split_u64(r.get("byzantine"))) byz.insert("n" + std::to_string(id));
    const auto correct = [&](const TraceRecord& r) { return r.node != "harness" && !byz.count(r.node); };

    Metrics m;
    std::map<Round, RoundMetrics> rounds;
    std::set<std::pair<std::uint64_t, LeaderTs>> changes;
    std::map<std::pair<std::uint64_t, std::string>, ReconfigCompletion> reconfigs;
    for (const auto& r : trace.records) {
        if (r.kind == "send") {
            const std::uint64_t n = r.u64("n");
            auto& rm = rounds[r.u64("r")];
            const bool global = r.get("scope") == "global";
            (global ? rm.global : rm.local) += n;
            (global ? m.global : m.local) += n;
            rm.by_category[std::string(r.get("cat"))] += n;
            m.messages += n;
            ++m.send_records;
            continue;
        }
        if (!correct(r)) continue;
        if (r.kind == "execute") {
            auto& rm = rounds[r.u64("r")];
            if (rm.completed_at == 0) {
                rm.completed_at = r.time;
                rm.ops = r.u64("ops");
            }
        } else if (r.kind == "new_leader" && (r.get("via") == "quorum" || r.get("via") == "jump")) {
            changes.insert({r.u64("c"), r.u64("ts")});
        } else if (r.kind == "request") {
            auto& rc = reconfigs[{r.u64("subject"), std::string(r.get("kind"))}];
            rc.subject = ReplicaId{r.u64("subject")};
            rc.kind = std::string(r.get("kind"));
            rc.requested = r.u64("r");
        } else if (r.kind == "reconfigure") {
            for (const auto& [list, kind] : {std::pair{"joins", "join"}, std::pair{"leaves", "leave"}})
                for (auto id : split_u64(r.get(list))) {
                    auto it = reconfigs.find({id, kind});
                    if (it != reconfigs.end() && !it->second.installed) it->second.installed = r.u64("r");
                }
        }
    }
    SimTime prev = 0;
    for (auto& [r, rm] : rounds) {
        rm.r = r;
        if (rm.completed_at) {
            rm.latency = rm.completed_at - prev;
            prev = rm.completed_at;
        }
        m.rounds.push_back(rm);
    }
    m.leader_changes = changes.size();
    for (auto& [key, rc] : reconfigs) m.reconfigs.push_back(rc);
    return m;
}

std::vector<nlohmann::json> report_records(const CheckReport& check, const Metrics& metrics) {
    std::vector<nlohmann::json> out;
    for (const auto& r : check.results) {
        nlohmann::json j{{"type", "invariant"}, {"name", r.name}, {"class", r.safety ? "safety" : "liveness"},
                         {"ok", r.ok}};
        if (r.first) j["first_violation"] = *r.first;
        if (!r.detail.empty()) j["detail"] = r.detail;
        out.push_back(std::move(j));
    }
    const auto metric = [&](std::string name, std::uint64_t value, nlohmann::json extra = nlohmann::json::object()) {
        nlohmann::json j{{"type", "metric"}, {"name", std::move(name)}, {"value", value}};
        j.update(extra);
        out.push_back(std::move(j));
    };
    metric("messages", metrics.messages);
    metric("global_messages", metrics.global);
    metric("local_messages", metrics.local);
    metric("send_records", metrics.send_records);
    metric("leader_changes", metrics.leader_changes);
    for (const auto& rm : metrics.rounds) {
        metric("round_ops", rm.ops, {{"round", rm.r}});
        metric("round_latency", rm.latency, {{"round", rm.r}});
        metric("round_global_messages", rm.global, {{"round", rm.r}});
        metric("round_local_messages", rm.local, {{"round", rm.r}});
        for (const auto& [cat, n] : rm.by_category) metric("round_messages", n, {{"round", rm.r}, {"category", cat}});
    }
    for (const auto& rc : metrics.reconfigs) {
        nlohmann::json extra{{"subject", rc.subject.value}, {"kind", rc.kind}, {"requested", rc.requested}};
        metric("reconfig_installed_round", rc.installed.value_or(0), extra);
    }
    return out;
}

}  // namespace hamava
