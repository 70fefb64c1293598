#pragma once

#include "hamava/brd.hpp"
#include "hamava/env.hpp"
#include "hamava/intercluster.hpp"
#include "hamava/leader.hpp"
#include "hamava/reconfig.hpp"
#include "hamava/tob.hpp"

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

namespace hamava {

/// Applies one transaction to the key-value store and returns its result.
std::uint64_t apply_txn(KvState& state, const Txn& txn);

/// A correct replica: runs the per-round local ordering, dissemination and
/// inter-cluster stages, executes rounds, and handles joining and leaving.
class Replica : public Node, public ReplicaHooks {
public:
    enum class Mode { Idle, Joining, Active, Left };

    /// `initial` is the round-1 configuration. Replicas outside it start Idle
    /// and become members through request_join.
    Replica(ReplicaId id, const KeyRing& keys, ProtocolParams params, const Configuration& initial);

    ReplicaId id() const override { return id_; }
    void start(NetContext& ctx) override;
    void on_message(NetContext& ctx, ReplicaId from, const PacketPtr& p) override;
    void on_timer(NetContext& ctx, TimerTag tag) override;
    void on_finish(NetContext& ctx) override;
    Round current_round() const override { return r_; }

    /// Client entry point; the transaction is forwarded to the own cluster.
    void submit(NetContext& ctx, TxnKind kind, std::uint64_t key, std::uint64_t value);
    void request_join(NetContext& ctx, ClusterId target, std::vector<ReplicaId> contacts);
    void request_leave(NetContext& ctx);
    /// Asks to leave once this replica enters round `r`.
    void schedule_leave(Round r) { leave_round_ = r; }

    void complain(Env& env, std::string_view cause, std::string rk) override;
    void tob_deliver(Env& env, std::uint64_t seq, const Txn& txn, const TransCert& cert) override;
    void brd_deliver(Env& env, const AttributedSet& set, const ReconfigProof& proof) override;

    Mode mode() const { return mode_; }
    ClusterId cluster() const { return cluster_; }
    Round round() const { return r_; }
    const Configuration& config() const { return config_; }
    const KvState& state() const { return state_; }
    const Election& election() const { return election_; }
    bool round_active() const { return active_; }

    /// Replaces the outbound path; used by Byzantine wrappers.
    void set_transport(Transport* t) { transport_ = t ? t : &default_transport_; }
    /// Every round executes at least up to this round even without traffic.
    void set_min_rounds(Round r) { min_rounds_ = r; }
    /// Test-only: this replica ignores membership changes of cluster `j`.
    void freeze_cluster_view(ClusterId j) { frozen_.insert(j); }

    /// Runs `fn` with an event environment and then settles deferred work.
    template <class Fn>
    void with_env(NetContext& ctx, Fn&& fn) {
        Env env{ctx, *transport_, signer_, keys_, params_};
        fn(env);
        drain(env);
    }

private:
    struct RoundOps {
        std::vector<Operation> ops;
        OpsCerts certs;
    };
    struct JoinGroup {
        CurrStateBody body;
        std::map<ReplicaId, LeaderTs> ts;
        std::map<ReplicaId, OpsCerts> certs;
    };

    void drain(Env& env);
    void route(Env& env, ReplicaId from, const PacketPtr& p);
    void route_active(Env& env, ReplicaId from, const PacketPtr& p);
    void route_round(Env& env, ReplicaId from, const Message& m);
    void on_curr_state(Env& env, ReplicaId from, const CurrState& m);
    void catch_up_reply(Env& env, ReplicaId from, Round r);
    void adopt_own_batch(Env& env, const CatchUp& m);

    void activate(Env& env);
    void send_recs(Env& env);
    void check_stage_complete(Env& env);
    void own_batch_ready(Env& env, RoundOps ops);
    void execute(Env& env);
    void enter_round(Env& env);
    void leader_changed(Env& env, ReplicaId leader, LeaderTs ts);
    void join(Env& env, const JoinGroup& g, const OpsCerts& certs);

    ReplicaId id_;
    const KeyRing& keys_;
    Signer signer_;
    ProtocolParams params_;
    Transport default_transport_;
    Transport* transport_ = &default_transport_;

    Mode mode_ = Mode::Idle;
    ClusterId cluster_;
    Round r_ = 1;
    Round min_rounds_ = 0;
    Configuration config_;
    Configuration prev_config_;
    KvState state_;
    Election election_;
    PendingPool pool_;
    std::unique_ptr<TobInstance> tob_;
    std::unique_ptr<BrdInstance> brd_;
    std::unique_ptr<BrdInstance> prev_brd_;
    InterCluster ic_;
    Collection collection_;
    Requester requester_;
    std::set<ClusterId> frozen_;

    bool active_ = false;
    std::vector<Operation> trans_;
    std::vector<TransCert> trans_certs_;
    std::optional<std::pair<Reconfig, ReconfigProof>> reconfig_;
    std::optional<RoundOps> own_;
    PrevRoundCache prev_cache_;
    std::map<Round, RoundOps> history_;
    std::set<std::pair<ReplicaId, Round>> caught_up_;

    std::map<Round, std::vector<std::pair<ReplicaId, PacketPtr>>> future_;
    std::deque<std::pair<ReplicaId, PacketPtr>> replay_;
    std::map<Digest, JoinGroup> joins_;
    std::uint64_t next_txn_seq_ = 0;
    std::optional<Round> leave_round_;
};

}  // namespace hamava
