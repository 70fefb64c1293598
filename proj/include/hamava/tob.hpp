#pragma once

#include "hamava/env.hpp"

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

namespace hamava {

/// Client transactions known to a replica but not yet delivered, in arrival
/// order. Ids that were delivered once are never re-admitted.
class PendingPool {
public:
    using Id = std::pair<std::uint64_t, std::uint64_t>;

    bool insert(const Txn& txn);
    void mark_delivered(const Txn& txn);
    bool contains(const Id& id) const { return by_id_.count(id) != 0; }
    bool delivered(const Id& id) const { return delivered_.count(id) != 0; }
    std::size_t size() const { return by_id_.size(); }
    bool empty() const { return by_id_.empty(); }
    /// Pending transactions in arrival order.
    std::vector<Txn> ordered() const;
    /// Fresh no-op for padding an underfull batch.
    Txn next_noop(ReplicaId origin);

private:
    std::map<Id, std::uint64_t> by_id_;
    std::map<std::uint64_t, Txn> by_arrival_;
    std::set<Id> delivered_;
    std::uint64_t arrivals_ = 0;
    std::uint64_t noops_ = 0;
};

/// One round of the reference total-order broadcast for one cluster.
///
/// Every epoch (round, ts) opens with a view change: members report their
/// locks to the epoch leader, which broadcasts the quorum of reports as
/// NewView and re-proposes the highest-timestamp lock of each slot. Slots
/// then go Propose -> Prepare -> Commit; a quorum of Commit signatures is
/// the transaction's certificate.
class TobInstance {
public:
    TobInstance(ClusterId cluster, Round r, std::set<ReplicaId> members, std::size_t batch_size,
                ReplicaId leader, LeaderTs ts, ReplicaHooks& hooks, PendingPool& pool);

    void activate(Env& env);
    bool active() const { return active_; }
    bool complete() const { return next_deliver_ >= batch_; }
    std::size_t delivered() const { return next_deliver_; }
    LeaderTs ts() const { return ts_; }

    void new_leader(Env& env, ReplicaId leader, LeaderTs ts);
    /// New transactions are available in the pool.
    void offer(Env& env);
    /// Handles a TOB message of this round; returns false if it is not one.
    bool handle(Env& env, ReplicaId from, const Message& m);
    void on_fill_timer(Env& env);
    void on_tob_timer(Env& env);
    /// Stops all timers; used when the round's operations arrive by catch-up.
    void halt(Env& env);

    /// Validates a lock against this instance's membership.
    bool lock_valid(const TobLock& lock, const KeyRing& keys) const;

private:
    using VoteKey = std::tuple<LeaderTs, std::uint64_t, Digest>;

    void on_propose(Env& env, ReplicaId from, const Propose& m);
    void on_prepare(Env& env, ReplicaId from, const Prepare& m);
    void on_commit(Env& env, ReplicaId from, const Commit& m);
    void on_view_report(Env& env, ReplicaId from, const ViewReport& m);
    void on_new_view(Env& env, ReplicaId from, const NewView& m);

    void send_view_report(Env& env);
    void propose_all(Env& env);
    void check_prepared(Env& env, std::uint64_t seq);
    void send_commit(Env& env, std::uint64_t seq, const Txn& txn);
    void lock(std::uint64_t seq, const Txn& txn, LockEvidence ev, std::vector<SignatureToken> sigs);
    void deliver_ready(Env& env);
    void arm_tob_timer(Env& env);
    bool report_valid(const ViewReport& vr, const KeyRing& keys) const;

    ClusterId cluster_;
    Round r_;
    std::set<ReplicaId> members_;
    std::size_t f_;
    std::size_t quorum_;
    std::uint64_t batch_;
    ReplicaId leader_;
    LeaderTs ts_;
    ReplicaHooks& hooks_;
    PendingPool& pool_;

    bool active_ = false;
    bool halted_ = false;
    bool view_ready_ = false;
    std::map<std::uint64_t, Txn> constraints_;
    std::map<std::uint64_t, Txn> accepted_;  // slot -> proposal prepared at ts_
    std::vector<std::pair<ReplicaId, Propose>> held_;
    std::set<std::uint64_t> commit_sent_;  // slots committed at ts_
    std::map<VoteKey, std::map<ReplicaId, SignatureToken>> prepares_;
    std::map<VoteKey, std::pair<Txn, std::map<ReplicaId, SignatureToken>>> commits_;
    std::map<std::uint64_t, TobLock> locks_;
    std::map<std::uint64_t, std::pair<Txn, TransCert>> decided_;
    std::uint64_t next_deliver_ = 0;
    std::map<LeaderTs, std::vector<std::pair<ReplicaId, Message>>> future_;

    // Leader side.
    std::map<ReplicaId, ViewReport> reports_;
    bool new_view_sent_ = false;
    std::map<std::uint64_t, Txn> assigned_;
    bool fill_expired_ = false;
    bool fill_armed_ = false;
};

}  // namespace hamava
