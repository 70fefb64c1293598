#pragma once

#include "hamava/core.hpp"
#include "hamava/messages.hpp"
#include "hamava/netsim.hpp"
#include "hamava/trace.hpp"

#include <set>
#include <string>

namespace hamava {

struct ProtocolParams {
    std::size_t batch_size = 4;
    double alpha = 0.9;
    SimTime tob_timeout = 200;
    SimTime brd_timeout = 200;
    SimTime remote_timeout = 600;
    SimTime epsilon = 150;
    SimTime client_timeout = 120;
    SimTime fill_timeout = 30;
    /// Test-only: accept remote complaints without the complaint-number check.
    bool disable_rcn_check = false;

    /// Number of deliveries after which the replica hands its requests to BRD.
    std::size_t recs_threshold() const;
};

enum TimerKind : std::uint32_t {
    kTobTimer = 1,
    kFillTimer = 2,
    kBrdTimer = 3,
    kRemoteTimer = 4,
    kClientTimer = 5,
    kAdversaryTimer = 100,
};

/// Outbound path of a replica. Byzantine wrappers install a subclass that
/// filters or rewrites traffic.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(NetContext& ctx, ReplicaId to, const PacketPtr& p) { ctx.send(to, p); }
    virtual void broadcast(NetContext& ctx, const std::set<ReplicaId>& to, const PacketPtr& p) {
        ctx.broadcast(to, p);
    }
};

/// Everything a protocol module may touch while handling one event.
struct Env {
    NetContext& ctx;
    Transport& net;
    const Signer& signer;
    const KeyRing& keys;
    const ProtocolParams& params;

    ReplicaId self() const { return ctx.self(); }
    SimTime now() const { return ctx.now(); }
    SignatureToken sign(Digest d) const { return signer.sign(d); }
    void send(ReplicaId to, Message m) { net.send(ctx, to, make_packet(std::move(m))); }
    void broadcast(const std::set<ReplicaId>& to, Message m) {
        net.broadcast(ctx, to, make_packet(std::move(m)));
    }
    void trace(std::string kind, Digest d, Attrs a) { ctx.trace(std::move(kind), d, std::move(a)); }
    void set_timer(TimerKind kind, std::uint64_t param, SimTime duration) {
        ctx.set_timer(TimerTag{kind, param}, duration);
    }
    void cancel_timer(TimerKind kind, std::uint64_t param) { ctx.cancel_timer(TimerTag{kind, param}); }
};

/// Callbacks from the per-round modules into the owning replica.
class ReplicaHooks {
public:
    virtual ~ReplicaHooks() = default;
    virtual void complain(Env& env, std::string_view cause, std::string rk = {}) = 0;
    virtual void tob_deliver(Env& env, std::uint64_t seq, const Txn& txn, const TransCert& cert) = 0;
    virtual void brd_deliver(Env& env, const AttributedSet& set, const ReconfigProof& proof) = 0;
};

}  // namespace hamava
