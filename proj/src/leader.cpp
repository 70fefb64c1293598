#include "hamava/leader.hpp"

#include <algorithm>
#include <vector>

namespace hamava {

Election::Election(ClusterId cluster, std::set<ReplicaId> members, LeaderTs ts)
    : cluster_(cluster), members_(std::move(members)), ts_(ts) {
    leader_ = leader_for(members_, ts_);
}

void Election::set_members(std::set<ReplicaId> members) {
    members_ = std::move(members);
    leader_ = leader_for(members_, ts_);
    for (auto& [ts, set] : complainers_)
        for (auto it = set.begin(); it != set.end();) it = members_.count(*it) ? std::next(it) : set.erase(it);
    for (auto it = seen_.begin(); it != seen_.end();) it = members_.count(it->first) ? std::next(it) : seen_.erase(it);
}

void Election::adopt(LeaderTs ts, SimTime now) {
    ts_ = ts;
    leader_ = leader_for(members_, ts_);
    complained_ = false;
    installed_at_ = now;
    complainers_.erase(complainers_.begin(), complainers_.lower_bound(ts_));
}

bool Election::complain(Env& env, std::string_view cause, const std::string& rk, Round r) {
    if (complained_ || env.self() == leader_ || !members_.count(env.self())) return false;
    complained_ = true;
    Attrs a;
    a("c", cluster_)("ts", ts_)("cause", std::string(cause))("r", r)("leader", leader_);
    if (!rk.empty()) a("rk", rk);
    env.trace("complain", election_statement(cluster_, ts_), std::move(a));
    env.broadcast(members_, ElectComplaint{ts_, env.sign(election_statement(cluster_, ts_))});
    return true;
}

void Election::on_complaint(Env& env, ReplicaId from, const ElectComplaint& msg, Round r) {
    if (!members_.count(from) || msg.sig.signer != from || msg.sig.digest != election_statement(cluster_, msg.ts) ||
        !env.keys.verify(msg.sig))
        return;
    if (msg.ts < ts_) return;
    complainers_[msg.ts].insert(from);
    auto& seen = seen_[from];
    seen = std::max(seen, msg.ts);
    evaluate(env, r);
}

void Election::observe(Env& env, ReplicaId from, LeaderTs ts, Round r) {
    if (!members_.count(from) || ts <= ts_) return;
    auto& seen = seen_[from];
    if (ts <= seen) return;
    seen = ts;
    evaluate(env, r);
}

void Election::evaluate(Env& env, Round r) {
    const std::size_t f = fault_threshold(members_.size());
    const std::size_t q = quorum_size(members_.size());
    for (;;) {
        std::vector<LeaderTs> ahead;
        for (const auto& [id, ts] : seen_)
            if (ts > ts_) ahead.push_back(ts);
        if (ahead.size() >= f + 1) {
            std::sort(ahead.rbegin(), ahead.rend());
            install(env, ahead[f], "jump", r);
            continue;
        }
        const auto it = complainers_.find(ts_);
        const std::size_t count = it == complainers_.end() ? 0 : it->second.size();
        if (count >= f + 1 && !complained_) complain(env, "amplify", {}, r);
        if (count >= q) {
            install(env, ts_ + 1, "quorum", r);
            continue;
        }
        return;
    }
}

void Election::install(Env& env, LeaderTs ts, std::string_view via, Round r) {
    ts_ = ts;
    leader_ = leader_for(members_, ts_);
    complained_ = false;
    installed_at_ = env.now();
    complainers_.erase(complainers_.begin(), complainers_.lower_bound(ts_));
    env.trace("new_leader", 0,
              Attrs{}("c", cluster_)("ts", ts_)("leader", leader_)("via", std::string(via))("r", r));
    if (on_change) on_change(env, leader_, ts_, via);
}

}  // namespace hamava
