#pragma once

#include "hamava/env.hpp"

#include <map>
#include <optional>
#include <set>
#include <vector>

namespace hamava {

/// Checks one signed contribution: attributed to `sender`, tagged with the
/// round, signed by a member, and carrying only correctly signed requests
/// for this cluster.
bool recs_contribution_valid(ClusterId cluster, Round r, const std::set<ReplicaId>& members, ReplicaId sender,
                             const RecsMsg& m, const KeyRing& keys);

/// Byzantine reliable dissemination for one (cluster, round).
///
/// The leader aggregates signed contributions from a quorum and broadcasts
/// Agg; members Echo it, then Ready it, and deliver on a quorum of Ready.
/// Across leader changes a member reports its attested candidate (`valid`)
/// and the new leader re-proposes the highest-timestamp candidate.
class BrdInstance {
public:
    struct Candidate {
        AttributedSet set;
        Attestation att;
    };

    BrdInstance(ClusterId cluster, Round r, std::set<ReplicaId> members, ReplicaId leader, LeaderTs ts,
                ReplicaHooks& hooks);

    /// Hands this replica's signed contribution to the current leader.
    void broadcast(Env& env, RecsMsg m);
    void new_leader(Env& env, ReplicaId leader, LeaderTs ts);
    bool handle(Env& env, ReplicaId from, const Message& m);
    void on_timer(Env& env);
    void halt(Env& env);

    bool delivered() const { return delivered_; }
    bool started() const { return my_m_.has_value(); }
    const std::optional<Candidate>& valid() const { return valid_; }

    /// True when every entry is a correctly signed contribution of a member
    /// for this round and the entries number at least a quorum.
    bool origin_valid(const AttributedSet& set, const KeyRing& keys) const;
    bool attests(const AttributedSet& set, const Attestation& att, const KeyRing& keys) const;

private:
    using VoteKey = std::pair<LeaderTs, Digest>;
    struct Votes {
        AttributedSet set;
        std::map<ReplicaId, SignatureToken> sigs;
    };

    void on_contribution(Env& env, ReplicaId from, const BrdContribution& m);
    void on_valid(Env& env, ReplicaId from, const Valid& m);
    void on_agg(Env& env, ReplicaId from, const Agg& m);
    void on_echo(Env& env, ReplicaId from, const Echo& m);
    void on_ready(Env& env, ReplicaId from, const Ready& m);
    void try_agg(Env& env);
    void send_ready(Env& env, LeaderTs ts, const AttributedSet& set, Attestation att);
    void report_to_leader(Env& env);
    bool cached_origin_valid(Digest d, const AttributedSet& set, const KeyRing& keys);

    ClusterId cluster_;
    Round r_;
    std::set<ReplicaId> members_;
    std::size_t f_;
    std::size_t quorum_;
    ReplicaId leader_;
    LeaderTs ts_;
    ReplicaHooks& hooks_;

    std::optional<RecsMsg> my_m_;
    std::optional<Candidate> valid_;
    bool echoed_ = false;
    bool delivered_ = false;
    bool halted_ = false;
    std::set<LeaderTs> readied_;
    std::map<VoteKey, Votes> echoes_;
    std::map<VoteKey, Votes> readies_;
    std::map<Digest, bool> origin_cache_;
    std::map<LeaderTs, std::vector<std::pair<ReplicaId, Message>>> future_;

    // Leader side.
    std::set<ReplicaId> q_;
    AttributedSet m_;
    std::optional<Candidate> high_valid_;
    bool agg_sent_ = false;
};

}  // namespace hamava
