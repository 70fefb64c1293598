#pragma once

#include "hamava/env.hpp"

#include <map>
#include <set>
#include <vector>

namespace hamava {

/// Member side of request collection. Requests stored before this replica's
/// send_recs are acknowledged for the current round; later ones are carried
/// into the next round and acknowledged there.
class Collection {
public:
    /// Starts round `r`: carried requests that are still applicable become the
    /// round's set and their subjects get an Ack for `r`.
    void begin_round(Env& env, ClusterId cluster, Round r, const Configuration& config);

    void on_request(Env& env, ReplicaId from, const Request& m, ClusterId cluster, Round r,
                    const Configuration& config);

    /// Marks the round's set as handed to dissemination and returns it.
    RecsSet take_for_send();
    /// Removes requests that were executed (in any round).
    void forget(const RecsSet& executed);

    const RecsSet& recs() const { return recs_; }
    const RecsSet& carried() const { return next_recs_; }
    bool sent() const { return sent_; }

private:
    static bool applicable(const ReconfigRequest& req, ClusterId cluster, const Configuration& config);

    RecsSet recs_;
    RecsSet next_recs_;
    bool sent_ = false;
};

/// Requester side: a joining replica, or a member asking to leave.
class Requester {
public:
    void start(Env& env, ReconfigKind kind, ClusterId target, std::vector<ReplicaId> contacts, Round round);
    void on_ack(Env& env, ReplicaId from, const Ack& m);
    void on_hint(Env& env, ReplicaId from, const RoundHint& m);
    void on_timer(Env& env);
    /// Ends the request (joined or left).
    void finish(Env& env);
    /// Leavers know their round and keep it current.
    void set_round(Round r) { round_ = r; }

    bool active() const { return active_; }
    bool acked() const { return acked_; }
    ReconfigKind kind() const { return kind_; }
    ClusterId target() const { return target_; }
    const std::vector<ReplicaId>& contacts() const { return contacts_; }

private:
    void send_all(Env& env);
    Round hinted_round() const;

    ReconfigKind kind_ = ReconfigKind::Join;
    ClusterId target_;
    std::vector<ReplicaId> contacts_;
    Round round_ = 1;
    SimTime backoff_ = 0;
    bool active_ = false;
    bool acked_ = false;
    std::map<std::pair<std::set<ReplicaId>, Round>, std::set<ReplicaId>> acks_;
    std::map<ReplicaId, Round> hints_;
};

}  // namespace hamava
