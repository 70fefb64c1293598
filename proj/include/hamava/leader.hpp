#pragma once

#include "hamava/env.hpp"

#include <functional>
#include <map>
#include <set>
#include <string_view>

namespace hamava {

/// Per-cluster leader election with complaint amplification. The timestamp
/// is never reset across rounds; complaint sets are kept per timestamp and
/// filtered by the current membership.
class Election {
public:
    using ChangeFn = std::function<void(Env&, ReplicaId leader, LeaderTs ts, std::string_view via)>;

    Election() = default;
    Election(ClusterId cluster, std::set<ReplicaId> members, LeaderTs ts = 1);

    ClusterId cluster() const { return cluster_; }
    LeaderTs ts() const { return ts_; }
    ReplicaId leader() const { return leader_; }
    SimTime installed_at() const { return installed_at_; }
    bool complained() const { return complained_; }
    const std::set<ReplicaId>& members() const { return members_; }

    /// Round-boundary membership update; the leader is recomputed for the
    /// unchanged timestamp.
    void set_members(std::set<ReplicaId> members);

    /// Broadcasts Complaint(ts) once per timestamp. The leader never
    /// complains about itself. Returns true when a complaint was sent.
    bool complain(Env& env, std::string_view cause, const std::string& rk, Round r);

    void on_complaint(Env& env, ReplicaId from, const ElectComplaint& msg, Round r);

    /// Records that `from` has signed something at timestamp `ts`; f + 1
    /// distinct members ahead of us make us jump forward.
    void observe(Env& env, ReplicaId from, LeaderTs ts, Round r);

    /// Joiner bootstrap: take a timestamp without running the protocol.
    void adopt(LeaderTs ts, SimTime now);

    ChangeFn on_change;

private:
    void evaluate(Env& env, Round r);
    void install(Env& env, LeaderTs ts, std::string_view via, Round r);

    ClusterId cluster_;
    std::set<ReplicaId> members_;
    LeaderTs ts_ = 1;
    ReplicaId leader_;
    bool complained_ = false;
    SimTime installed_at_ = 0;
    std::map<LeaderTs, std::set<ReplicaId>> complainers_;
    std::map<ReplicaId, LeaderTs> seen_;
};

/// Operations and certificates of the previous round, kept so a new leader
/// can re-send them.
struct PrevRoundCache {
    Round r = 0;
    std::vector<Operation> ops;
    OpsCerts certs;
    bool present() const { return r != 0; }
};

}  // namespace hamava
