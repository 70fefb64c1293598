#include "hamava/harness.hpp"

#include <algorithm>
#include <tuple>

namespace hamava {

namespace {

std::string node_name(std::uint64_t id) { return "n" + std::to_string(id); }

class Checker {
public:
    explicit Checker(const Trace& t) : t_(t) {
        for (std::size_t i = 0; i < t_.records.size(); ++i) {
            const auto& r = t_.records[i];
            if (r.node != "harness") continue;
            if (r.kind == "scenario") {
                strategy_ = std::string(r.get("strategy"));
                for (auto id : split_u64(r.get("byzantine"))) byz_.insert(node_name(id));
            } else if (r.kind == "cluster") {
                auto& m = initial_[r.u64("c")];
                for (auto id : split_u64(r.get("members"))) m.insert(id);
            } else if (r.kind == "run_end") {
                run_end_ = i;
            }
        }
        for (const auto& r : t_.records)
            if (r.kind == "reconfigure" && correct(r)) changes_.try_emplace({r.u64("c"), r.u64("r")}, &r);
    }

    CheckReport run() {
        CheckReport rep;
        rep.results.push_back(brd_integrity());
        rep.results.push_back(brd_uniformity());
        rep.results.push_back(brd_no_duplication());
        rep.results.push_back(brd_validity());
        rep.results.push_back(inter_agreement());
        rep.results.push_back(overthrow_resistance());
        rep.results.push_back(config_uniformity());
        rep.results.push_back(total_order());
        rep.results.push_back(tob_no_duplication());
        rep.results.push_back(state_agreement());
        rep.results.push_back(reconfig_accuracy());
        rep.results.push_back(run_quiescent());
        rep.results.push_back(round_termination());
        rep.results.push_back(brd_termination());
        rep.results.push_back(completeness());
        rep.results.push_back(eventual_succession());
        rep.results.push_back(txn_validity());
        return rep;
    }

private:
    struct Result {
        InvariantResult res;
        Result(std::string name, bool safety) { res.name = std::move(name), res.safety = safety; }
        void fail(std::size_t idx, std::string detail) {
            if (!res.ok) return;
            res.ok = false;
            res.first = idx;
            res.detail = std::move(detail);
        }
    };

    bool correct(const TraceRecord& r) const { return r.node != "harness" && !byz_.count(r.node); }

    template <class Fn>
    void each(std::string_view kind, Fn&& fn) const {
        for (std::size_t i = 0; i < t_.records.size(); ++i) {
            const auto& r = t_.records[i];
            if (r.kind == kind && correct(r)) fn(i, r);
        }
    }

    std::set<std::uint64_t> members_at(std::uint64_t c, Round r) const {
        auto it = initial_.find(c);
        std::set<std::uint64_t> m = it == initial_.end() ? std::set<std::uint64_t>{} : it->second;
        for (Round k = 1; k < r; ++k) {
            auto ch = changes_.find({c, k});
            if (ch == changes_.end()) continue;
            for (auto id : split_u64(ch->second->get("joins"))) m.insert(id);
            for (auto id : split_u64(ch->second->get("leaves"))) m.erase(id);
        }
        return m;
    }

    InvariantResult brd_integrity() const {
        Result out("brd_integrity", true);
        std::map<std::tuple<std::string, std::uint64_t, Round>, Digest> sent;
        each("brd_broadcast", [&](std::size_t, const TraceRecord& r) {
            sent[{r.node, r.u64("c"), r.u64("r")}] = r.digest;
        });
        each("brd_deliver", [&](std::size_t i, const TraceRecord& r) {
            const auto who = split_u64(r.get("contributors"));
            const auto recs = split_u64(r.get("recs"));
            if (who.size() != recs.size()) return out.fail(i, "contributor and recs lists differ in length");
            for (std::size_t k = 0; k < who.size(); ++k) {
                const auto name = node_name(who[k]);
                if (byz_.count(name)) continue;
                auto it = sent.find({name, r.u64("c"), r.u64("r")});
                if (it == sent.end() || it->second != recs[k])
                    return out.fail(i, "delivered a contribution " + name + " never broadcast");
            }
        });
        return out.res;
    }

    InvariantResult brd_uniformity() const {
        Result out("brd_uniformity", true);
        std::map<std::pair<std::uint64_t, Round>, Digest> first;
        each("brd_deliver", [&](std::size_t i, const TraceRecord& r) {
            auto [it, fresh] = first.try_emplace({r.u64("c"), r.u64("r")}, r.digest);
            if (!fresh && it->second != r.digest)
                out.fail(i, "different sets delivered in c" + std::string(r.get("c")) + " r" + std::string(r.get("r")));
        });
        return out.res;
    }

    InvariantResult brd_no_duplication() const {
        Result out("brd_no_duplication", true);
        std::set<std::tuple<std::string, std::uint64_t, Round>> seen;
        each("brd_deliver", [&](std::size_t i, const TraceRecord& r) {
            if (!seen.insert({r.node, r.u64("c"), r.u64("r")}).second) out.fail(i, r.node + " delivered twice");
        });
        return out.res;
    }

    InvariantResult brd_validity() const {
        Result out("brd_validity", true);
        each("brd_deliver", [&](std::size_t i, const TraceRecord& r) {
            const auto m = members_at(r.u64("c"), r.u64("r"));
            const auto who = split_u64(r.get("contributors"));
            for (auto id : who)
                if (!m.count(id)) return out.fail(i, "contributor " + node_name(id) + " is not a member");
            if (who.size() < quorum_size(m.size())) out.fail(i, "fewer contributions than a quorum");
        });
        return out.res;
    }

    InvariantResult inter_agreement() const {
        Result out("inter_agreement", true);
        std::map<std::pair<std::uint64_t, Round>, Digest> first;
        each("inter_accept", [&](std::size_t i, const TraceRecord& r) {
            auto [it, fresh] = first.try_emplace({r.u64("from"), r.u64("r")}, r.digest);
            if (!fresh && it->second != r.digest)
                out.fail(i, "two batches accepted for c" + std::string(r.get("from")) + " r" + std::string(r.get("r")));
        });
        return out.res;
    }

    /// Every increment of a cluster's leader timestamp must follow a correct
    /// complaint at the previous timestamp with an original cause.
    InvariantResult overthrow_resistance() const {
        Result out("overthrow_resistance", true);
        std::set<std::pair<std::uint64_t, LeaderTs>> rooted;
        std::map<std::string, std::set<std::string>> used_rk;
        std::set<std::pair<std::uint64_t, LeaderTs>> installed;
        for (std::size_t i = 0; i < t_.records.size(); ++i) {
            const auto& r = t_.records[i];
            if (!correct(r)) continue;
            if (r.kind == "complain") {
                const auto cause = r.get("cause");
                bool root = cause == "tob_timeout" || cause == "brd_timeout";
                if (cause == "remote") root = used_rk[r.node].insert(std::string(r.get("rk"))).second;
                if (root) rooted.insert({r.u64("c"), r.u64("ts")});
            } else if (r.kind == "new_leader") {
                const auto via = r.get("via");
                if (via != "quorum" && via != "jump") continue;
                const std::uint64_t c = r.u64("c");
                const LeaderTs ts = r.u64("ts");
                if (!installed.insert({c, ts}).second) continue;
                if (!rooted.count({c, ts - 1}))
                    out.fail(i, "c" + std::to_string(c) + " moved to ts " + std::to_string(ts) +
                                    " without an original complaint");
            }
        }
        return out.res;
    }

    InvariantResult config_uniformity() const {
        Result out("config_uniformity", true);
        std::map<Round, std::pair<std::string, std::string>> first;
        each("execute", [&](std::size_t i, const TraceRecord& r) {
            std::pair<std::string, std::string> v{std::string(r.get("config")), std::string(r.get("f"))};
            auto [it, fresh] = first.try_emplace(r.u64("r"), v);
            if (!fresh && it->second != v) out.fail(i, r.node + " installed a different configuration at r" + std::string(r.get("r")));
        });
        return out.res;
    }

    InvariantResult total_order() const {
        Result out("total_order", true);
        std::map<std::tuple<std::uint64_t, Round, std::uint64_t>, Digest> first;
        each("tob_deliver", [&](std::size_t i, const TraceRecord& r) {
            auto [it, fresh] = first.try_emplace({r.u64("c"), r.u64("r"), r.u64("seq")}, r.digest);
            if (!fresh && it->second != r.digest) out.fail(i, r.node + " delivered a different transaction at seq " + std::string(r.get("seq")));
        });
        return out.res;
    }

    InvariantResult tob_no_duplication() const {
        Result out("tob_no_duplication", true);
        std::set<std::tuple<std::string, std::uint64_t, std::uint64_t>> seen;
        each("tob_deliver", [&](std::size_t i, const TraceRecord& r) {
            if (!seen.insert({r.node, r.u64("origin"), r.u64("tseq")}).second)
                out.fail(i, r.node + " delivered a transaction twice");
        });
        return out.res;
    }

    InvariantResult state_agreement() const {
        Result out("state_agreement", true);
        std::map<Round, std::pair<Digest, std::string>> first;
        each("execute", [&](std::size_t i, const TraceRecord& r) {
            std::pair<Digest, std::string> v{r.digest, std::string(r.get("state"))};
            auto [it, fresh] = first.try_emplace(r.u64("r"), v);
            if (!fresh && it->second != v) out.fail(i, r.node + " diverged at r" + std::string(r.get("r")));
        });
        return out.res;
    }

    InvariantResult reconfig_accuracy() const {
        Result out("reconfig_accuracy", true);
        std::set<std::pair<std::uint64_t, std::string>> requested;
        for (std::size_t i = 0; i < t_.records.size(); ++i) {
            const auto& r = t_.records[i];
            if (!correct(r)) continue;
            if (r.kind == "request") requested.insert({r.u64("subject"), std::string(r.get("kind"))});
            if (r.kind != "reconfigure") continue;
            for (const auto& [list, kind] : {std::pair{"joins", "join"}, std::pair{"leaves", "leave"}})
                for (auto id : split_u64(r.get(list)))
                    if (!byz_.count(node_name(id)) && !requested.count({id, kind}))
                        out.fail(i, node_name(id) + " was reconfigured without asking");
        }
        return out.res;
    }

    InvariantResult run_quiescent() const {
        Result out("run_quiescent", false);
        if (!run_end_)
            out.fail(t_.records.size(), "trace has no run_end record");
        else if (t_.records[*run_end_].u64("truncated"))
            out.fail(*run_end_, "run hit its horizon or event budget");
        return out.res;
    }

    InvariantResult round_termination() const {
        Result out("round_termination", false);
        std::optional<Round> round;
        each("final", [&](std::size_t i, const TraceRecord& r) {
            if (r.get("mode") != "active") return;
            if (r.u64("active")) return out.fail(i, r.node + " ended inside an unfinished round");
            if (round && *round != r.u64("r")) return out.fail(i, r.node + " ended in a different round");
            round = r.u64("r");
        });
        return out.res;
    }

    InvariantResult brd_termination() const {
        Result out("brd_termination", false);
        std::set<std::tuple<std::string, std::uint64_t, Round>> done;
        each("brd_deliver", [&](std::size_t, const TraceRecord& r) { done.insert({r.node, r.u64("c"), r.u64("r")}); });
        each("catch_up", [&](std::size_t, const TraceRecord& r) { done.insert({r.node, r.u64("c"), r.u64("r")}); });
        each("brd_broadcast", [&](std::size_t i, const TraceRecord& r) {
            if (!done.count({r.node, r.u64("c"), r.u64("r")}))
                out.fail(i, r.node + " never delivered in r" + std::string(r.get("r")));
        });
        return out.res;
    }

    InvariantResult completeness() const {
        Result out("completeness", false);
        std::map<std::pair<std::uint64_t, std::string>, Round> installed;
        std::set<std::string> joined;
        for (const auto& r : t_.records) {
            if (!correct(r)) continue;
            if (r.kind == "reconfigure") {
                for (auto id : split_u64(r.get("joins"))) installed.try_emplace({id, "join"}, r.u64("r"));
                for (auto id : split_u64(r.get("leaves"))) installed.try_emplace({id, "leave"}, r.u64("r"));
            } else if (r.kind == "joined") {
                joined.insert(r.node);
            }
        }
        std::set<std::pair<std::uint64_t, std::string>> asked;
        each("request", [&](std::size_t i, const TraceRecord& r) {
            const std::pair<std::uint64_t, std::string> key{r.u64("subject"), std::string(r.get("kind"))};
            if (!asked.insert(key).second) return;
            if (!installed.count(key)) return out.fail(i, r.node + " " + key.second + " was never installed");
            if (key.second == "join" && !joined.count(r.node)) out.fail(i, r.node + " never finished joining");
        });
        each("ack_quorum", [&](std::size_t i, const TraceRecord& r) {
            auto it = installed.find({r.u64("subject"), std::string(r.get("kind"))});
            if (it == installed.end() || it->second > r.u64("r") + 1)
                out.fail(i, r.node + " acknowledged at r" + std::string(r.get("r")) + " but not installed by r+1");
        });
        return out.res;
    }

    InvariantResult eventual_succession() const {
        Result out("eventual_succession", false);
        if (strategy_ != "silent_leader") return out.res;
        each("final", [&](std::size_t i, const TraceRecord& r) {
            if (r.get("mode") != "active") return;
            if (byz_.count(node_name(r.u64("leader")))) out.fail(i, r.node + " still follows a silent leader");
        });
        return out.res;
    }

    InvariantResult txn_validity() const {
        Result out("txn_validity", false);
        std::set<std::pair<std::string, std::uint64_t>> returned;
        std::set<std::string> active_at_end;
        each("return", [&](std::size_t, const TraceRecord& r) { returned.insert({r.node, r.u64("seq")}); });
        each("final", [&](std::size_t, const TraceRecord& r) {
            if (r.get("mode") == "active") active_at_end.insert(r.node);
        });
        each("submit", [&](std::size_t i, const TraceRecord& r) {
            if (active_at_end.count(r.node) && !returned.count({r.node, r.u64("seq")}))
                out.fail(i, r.node + " transaction " + std::string(r.get("seq")) + " never returned");
        });
        return out.res;
    }

    const Trace& t_;
    std::set<std::string> byz_;
    std::string strategy_;
    std::map<std::uint64_t, std::set<std::uint64_t>> initial_;
    std::map<std::pair<std::uint64_t, Round>, const TraceRecord*> changes_;
    std::optional<std::size_t> run_end_;
};

}  // namespace

bool CheckReport::ok() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.ok; });
}

bool CheckReport::safety_ok() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return !r.safety || r.ok; });
}

bool CheckReport::liveness_ok() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.safety || r.ok; });
}

const InvariantResult* CheckReport::find(std::string_view name) const {
    for (const auto& r : results)
        if (r.name == name) return &r;
    return nullptr;
}

CheckReport check_invariants(const Trace& trace) { return Checker(trace).run(); }

}  // namespace hamava
