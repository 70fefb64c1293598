#pragma once

#include "hamava/env.hpp"
#include "hamava/leader.hpp"

#include <map>
#include <optional>
#include <set>
#include <vector>

namespace hamava {

/// True iff `ops` is a complete round batch of cluster `j` (batch_size Trans
/// followed by one Reconfig) and every operation is certified by a quorum of
/// `members`, the current view of C_j.
bool ops_certified(ClusterId j, Round r, const std::vector<Operation>& ops, const OpsCerts& certs,
                   const std::set<ReplicaId>& members, std::size_t batch_size, const KeyRing& keys);

/// Stage 2 state of one replica for one round: certified batches received
/// from every cluster, per-remote-cluster watchdogs, and the numbered
/// local/remote complaint chain.
class InterCluster {
public:
    struct Batch {
        std::vector<Operation> ops;
        OpsCerts certs;
    };

    /// Resets per-round state. `prev` is the configuration of round r - 1,
    /// used to check complaints that lag one round behind.
    void begin_round(ClusterId self_cluster, Round r, const Configuration& config, const Configuration& prev);
    /// Arms the watchdog of every remote cluster whose batch is missing.
    void arm_timers(Env& env);
    void stop_timers(Env& env);

    /// Sends the batch to f_j + 1 members of every remote cluster.
    void inter_broadcast(Env& env, Round r, const std::vector<Operation>& ops, const OpsCerts& certs) const;

    void set_batch(Env& env, ClusterId j, Batch b);
    bool has(ClusterId j) const { return batches_.count(j) != 0; }
    bool complete() const { return batches_.size() == config_.cluster_count(); }
    const std::map<ClusterId, Batch>& batches() const { return batches_; }

    void on_inter(Env& env, ReplicaId from, const Inter& m);
    void on_local(Env& env, ReplicaId from, const Local& m);
    void on_timer(Env& env, ClusterId j);
    void on_lcomplaint(Env& env, ReplicaId from, const LComplaint& m);
    void on_rcomplaint(Env& env, ReplicaId from, const RComplaint& m);
    void on_relay(Env& env, ReplicaId from, const ComplaintRelay& m, const Election& election,
                  ReplicaHooks& hooks);

    const std::set<ReplicaId>& view(ClusterId j) const;

private:
    const Configuration& config_for(Round r) const { return r + 1 == r_ ? prev_ : config_; }
    const std::set<ReplicaId>& view_at(ClusterId j, Round r) const;
    void process_complaints(Env& env, ClusterId j);
    bool complaint_sigs_valid(const std::vector<SignatureToken>& sigs, ClusterId from, std::uint64_t c, Round r,
                              const KeyRing& keys) const;

    ClusterId self_;
    Round r_ = 0;
    Configuration config_;
    Configuration prev_;
    std::map<ClusterId, Batch> batches_;
    std::set<ClusterId> relayed_;
    std::map<ClusterId, std::uint64_t> cn_;
    std::map<ClusterId, bool> complained_;
    std::map<ClusterId, std::map<std::uint64_t, std::map<ReplicaId, SignatureToken>>> cs_;
    std::map<std::pair<ClusterId, Round>, std::uint64_t> rcn_;
    std::set<std::tuple<ClusterId, Round, std::uint64_t>> relayed_complaints_;
};

}  // namespace hamava
