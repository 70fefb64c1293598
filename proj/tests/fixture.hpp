#pragma once

#include "hamava/env.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hamava::testing {

/// Outbound filter deciding per recipient and message.
class FilterTransport : public Transport {
public:
    std::function<bool(ReplicaId to, const Message&)> allow;

    void send(NetContext& ctx, ReplicaId to, const PacketPtr& p) override {
        if (!allow || allow(to, p->body)) ctx.send(to, p);
    }
    void broadcast(NetContext& ctx, const std::set<ReplicaId>& to, const PacketPtr& p) override {
        for (auto id : to) send(ctx, id, p);
    }
};

/// A simulated node that hosts protocol modules through callbacks and
/// records everything the modules report upward.
class Host : public Node, public ReplicaHooks {
public:
    Host(ReplicaId id, const KeyRing& keys, ProtocolParams params)
        : me(id), keys(keys), signer(keys.signer_for(id)), params(params) {}

    ReplicaId me;
    const KeyRing& keys;
    Signer signer;
    ProtocolParams params;
    FilterTransport net;

    std::function<void(Env&)> on_start;
    std::function<void(Env&, ReplicaId, const Message&)> on_msg;
    std::function<void(Env&, TimerTag)> on_tmr;

    std::vector<std::string> complaints;
    std::vector<std::pair<std::uint64_t, Txn>> tob_out;
    std::vector<TransCert> tob_certs;
    std::optional<AttributedSet> brd_set;
    std::optional<ReconfigProof> brd_proof;
    SimTime brd_at = 0;
    std::vector<std::pair<ReplicaId, Message>> inbox;

    template <class F>
    void with_env(NetContext& ctx, F&& f) {
        Env env{ctx, net, signer, keys, params};
        f(env);
    }

    ReplicaId id() const override { return me; }
    void start(NetContext& ctx) override {
        if (on_start) with_env(ctx, on_start);
    }
    void on_message(NetContext& ctx, ReplicaId from, const PacketPtr& p) override {
        inbox.emplace_back(from, p->body);
        if (on_msg) with_env(ctx, [&](Env& env) { on_msg(env, from, p->body); });
    }
    void on_timer(NetContext& ctx, TimerTag tag) override {
        if (on_tmr) with_env(ctx, [&](Env& env) { on_tmr(env, tag); });
    }

    void complain(Env&, std::string_view cause, std::string) override { complaints.emplace_back(cause); }
    void tob_deliver(Env&, std::uint64_t seq, const Txn& txn, const TransCert& cert) override {
        tob_out.emplace_back(seq, txn);
        tob_certs.push_back(cert);
    }
    void brd_deliver(Env& env, const AttributedSet& set, const ReconfigProof& proof) override {
        brd_set = set;
        brd_proof = proof;
        brd_at = env.now();
    }
};

/// A simulator populated with hosts for ids 1..n (or an explicit set).
struct HostNet {
    KeyRing keys;
    Simulator sim;
    std::map<ReplicaId, Host*> hosts;
    std::set<ReplicaId> ids;

    HostNet(std::set<ReplicaId> members, std::uint64_t seed, TimingModel t = {}, ProtocolParams params = {})
        : keys(seed), sim(t, seed), ids(std::move(members)) {
        for (auto id : ids) {
            auto h = std::make_unique<Host>(id, keys, params);
            hosts[id] = h.get();
            sim.add_node(std::move(h));
        }
    }

    Host& operator[](std::uint64_t id) { return *hosts.at(ReplicaId{id}); }

    /// Runs `fn` inside node `id`'s event at time `t`.
    void at(SimTime t, std::uint64_t id, std::function<void(Env&)> fn) {
        sim.at(t, ReplicaId{id}, [fn](NetContext& ctx, Node& n) {
            static_cast<Host&>(n).with_env(ctx, fn);
        });
    }
};

inline std::set<ReplicaId> id_range(std::uint64_t lo, std::uint64_t hi) {
    std::set<ReplicaId> out;
    for (auto i = lo; i <= hi; ++i) out.insert(ReplicaId{i});
    return out;
}

/// Test-side quorum rule: smallest q >= 2f+1 with 2q - n >= f + 1.
inline std::size_t oracle_quorum(std::size_t n) {
    const std::size_t f = (n - 1) / 3;
    std::size_t q = 2 * f + 1;
    while (2 * q < n + f + 1) ++q;
    return q;
}

/// Distinct members whose signature over `subject` verifies.
inline std::size_t oracle_signers(const std::vector<SignatureToken>& sigs, Digest subject,
                                  const std::set<ReplicaId>& members, const KeyRing& keys) {
    std::set<ReplicaId> ok;
    for (const auto& s : sigs)
        if (s.digest == subject && members.count(s.signer) && keys.verify(s)) ok.insert(s.signer);
    return ok.size();
}

}  // namespace hamava::testing
