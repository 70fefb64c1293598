#pragma once

#include "hamava/core.hpp"
#include "hamava/messages.hpp"
#include "hamava/trace.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <vector>

namespace hamava {

/// Scripted pre-GST delay for one directed link.
struct LinkDelay {
    ReplicaId from;
    ReplicaId to;
    SimTime from_time = 0;  ///< applies to sends in [from_time, until)
    SimTime until = 0;
    SimTime delay = 0;
};

struct TimingModel {
    SimTime gst = 0;
    SimTime delta = 10;         ///< post-GST delivery bound
    SimTime pre_gst_max = 50;   ///< pre-GST delays are uniform in [1, pre_gst_max]
    std::vector<LinkDelay> link_delays;
};

struct TimerTag {
    std::uint32_t kind = 0;
    std::uint64_t param = 0;
    auto operator<=>(const TimerTag&) const = default;
};

struct Envelope {
    ReplicaId from;
    ReplicaId to;
    PacketPtr payload;
    SimTime sent_at = 0;
    SimTime deliver_at = 0;
    std::uint64_t seq = 0;
};

class Simulator;

/// The simulator as seen by the node whose event is being processed.
class NetContext {
public:
    NetContext(Simulator& sim, ReplicaId self) : sim_(sim), self_(self) {}
    ReplicaId self() const { return self_; }
    SimTime now() const;
    void send(ReplicaId to, const PacketPtr& p);
    void broadcast(const std::set<ReplicaId>& to, const PacketPtr& p);
    void set_timer(TimerTag tag, SimTime duration);
    void cancel_timer(TimerTag tag);
    void trace(std::string kind, Digest digest, Attrs attrs);
    Simulator& sim() { return sim_; }

private:
    Simulator& sim_;
    ReplicaId self_;
};

class Node {
public:
    virtual ~Node() = default;
    virtual ReplicaId id() const = 0;
    virtual void start(NetContext& ctx) = 0;
    virtual void on_message(NetContext& ctx, ReplicaId from, const PacketPtr& p) = 0;
    virtual void on_timer(NetContext& ctx, TimerTag tag) = 0;
    /// Called once after the event queue drains (or the run is cut short).
    virtual void on_finish(NetContext&) {}
    /// Round used to attribute untagged traffic in the metrics.
    virtual Round current_round() const { return 0; }
};

class AuthenticationError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct RunStats {
    std::uint64_t events = 0;
    std::uint64_t delivered = 0;
    std::uint64_t parked_dropped = 0;
    bool truncated = false;
};

/// Deterministic discrete-event network with authenticated perfect links.
/// Events run in (time, class, seeded priority, sequence) order; at equal
/// times deliveries precede timer expiries.
class Simulator {
public:
    Simulator(TimingModel timing, std::uint64_t seed);

    void add_node(std::unique_ptr<Node> node);
    Node* node(ReplicaId id);

    /// Schedules a call into `id` at an absolute time (workload injection).
    void at(SimTime when, ReplicaId id, std::function<void(NetContext&, Node&)> fn);

    /// Schedules one delivery. Throws AuthenticationError unless `from` is the
    /// node currently executing.
    Envelope apl_send(ReplicaId from, ReplicaId to, const PacketPtr& p);
    std::vector<Envelope> abeb_broadcast(ReplicaId from, const std::set<ReplicaId>& cluster,
                                         const PacketPtr& p);

    void set_timer(ReplicaId owner, TimerTag tag, SimTime duration);
    void cancel_timer(ReplicaId owner, TimerTag tag);

    void record(TraceRecord r);
    SimTime now() const { return now_; }
    const TimingModel& timing() const { return timing_; }

    RunStats run(std::uint64_t max_events, SimTime horizon);

    Trace& trace() { return trace_; }
    Trace take_trace() { return std::move(trace_); }

    /// Adversary hook: may choose the delay of a message touching a Byzantine
    /// endpoint. Messages between correct nodes never consult it.
    std::function<std::optional<SimTime>(const Envelope&)> byzantine_delay;
    std::set<ReplicaId> byzantine;

    /// Delivery observer, used by tests.
    std::function<void(const Envelope&)> on_deliver;

private:
    struct Event {
        SimTime at = 0;
        std::uint8_t cls = 0;  // 0 call, 1 delivery, 2 timer
        std::uint64_t prio = 0;
        std::uint64_t seq = 0;
        Envelope env;
        ReplicaId owner;
        TimerTag tag;
        std::uint64_t generation = 0;
        std::shared_ptr<std::function<void(NetContext&, Node&)>> call;

        bool operator>(const Event& o) const {
            return std::tie(at, cls, prio, seq) > std::tie(o.at, o.cls, o.prio, o.seq);
        }
    };

    Envelope send_one(ReplicaId from, ReplicaId to, const PacketPtr& p);
    SimTime draw_delay(const Envelope& e);
    void schedule_delivery(Envelope e);
    void dispatch(const Event& ev);
    void trace_send(ReplicaId from, const std::vector<ReplicaId>& to, const PacketPtr& p);

    TimingModel timing_;
    std::mt19937_64 rng_;
    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::map<ReplicaId, std::unique_ptr<Node>> nodes_;
    std::map<std::pair<ReplicaId, TimerTag>, std::uint64_t> live_timers_;
    std::uint64_t timer_generation_ = 0;
    std::vector<Envelope> parked_;
    std::optional<ReplicaId> current_;
    Trace trace_;
    RunStats stats_;
};

/// Uniform draw in [lo, hi] from a 64-bit engine, independent of the
/// standard library's distribution implementations.
std::uint64_t uniform_u64(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi);
double uniform_unit(std::mt19937_64& rng);

}  // namespace hamava
