#include "hamava/netsim.hpp"

#include <algorithm>

namespace hamava {

std::uint64_t uniform_u64(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t span = hi - lo + 1;
    return lo + rng() % span;
}

double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

SimTime NetContext::now() const { return sim_.now(); }

void NetContext::send(ReplicaId to, const PacketPtr& p) { sim_.apl_send(self_, to, p); }

void NetContext::broadcast(const std::set<ReplicaId>& to, const PacketPtr& p) {
    sim_.abeb_broadcast(self_, to, p);
}

void NetContext::set_timer(TimerTag tag, SimTime duration) { sim_.set_timer(self_, tag, duration); }

void NetContext::cancel_timer(TimerTag tag) { sim_.cancel_timer(self_, tag); }

void NetContext::trace(std::string kind, Digest digest, Attrs attrs) {
    sim_.record(TraceRecord{sim_.now(), to_string(self_), std::move(kind), digest, attrs.take()});
}

Simulator::Simulator(TimingModel timing, std::uint64_t seed)
    : timing_(std::move(timing)), rng_(seed ^ 0x6a09e667f3bcc909ULL) {}

void Simulator::add_node(std::unique_ptr<Node> node) {
    const ReplicaId id = node->id();
    nodes_[id] = std::move(node);
    std::vector<Envelope> still;
    for (auto& e : parked_) {
        if (e.to == id) {
            e.deliver_at = std::max(e.deliver_at, now_);
            schedule_delivery(e);
        } else {
            still.push_back(std::move(e));
        }
    }
    parked_ = std::move(still);
}

Node* Simulator::node(ReplicaId id) {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : it->second.get();
}

void Simulator::at(SimTime when, ReplicaId id, std::function<void(NetContext&, Node&)> fn) {
    Event ev;
    ev.at = when;
    ev.cls = 0;
    ev.seq = next_seq_++;
    ev.owner = id;
    ev.call = std::make_shared<std::function<void(NetContext&, Node&)>>(std::move(fn));
    queue_.push(std::move(ev));
}

SimTime Simulator::draw_delay(const Envelope& e) {
    for (const auto& ld : timing_.link_delays)
        if (ld.from == e.from && ld.to == e.to && e.sent_at >= ld.from_time && e.sent_at < ld.until &&
            e.sent_at < timing_.gst)
            return ld.delay;
    if ((byzantine.count(e.from) || byzantine.count(e.to)) && byzantine_delay)
        if (auto d = byzantine_delay(e)) return *d;
    const SimTime d = uniform_u64(rng_, 1, e.sent_at >= timing_.gst ? timing_.delta : timing_.pre_gst_max);
    // A pre-GST send still lands by GST + delta.
    if (e.sent_at < timing_.gst) return std::min(d, timing_.gst + timing_.delta - e.sent_at);
    return d;
}

void Simulator::schedule_delivery(Envelope e) {
    Event ev;
    ev.at = e.deliver_at;
    ev.cls = 1;
    ev.prio = rng_();
    ev.seq = e.seq;
    ev.env = std::move(e);
    queue_.push(std::move(ev));
}

Envelope Simulator::apl_send(ReplicaId from, ReplicaId to, const PacketPtr& p) {
    Envelope e = send_one(from, to, p);
    trace_send(from, {to}, p);
    return e;
}

Envelope Simulator::send_one(ReplicaId from, ReplicaId to, const PacketPtr& p) {
    if (!current_ || *current_ != from)
        throw AuthenticationError("send on behalf of " + to_string(from) + " rejected");
    Envelope e{from, to, p, now_, 0, next_seq_++};
    e.deliver_at = now_ + draw_delay(e);
    if (!nodes_.count(to)) {
        parked_.push_back(e);
        return e;
    }
    schedule_delivery(e);
    return e;
}

std::vector<Envelope> Simulator::abeb_broadcast(ReplicaId from, const std::set<ReplicaId>& cluster,
                                                const PacketPtr& p) {
    std::vector<Envelope> out;
    out.reserve(cluster.size());
    for (auto to : cluster) out.push_back(send_one(from, to, p));
    trace_send(from, {cluster.begin(), cluster.end()}, p);
    return out;
}

void Simulator::trace_send(ReplicaId from, const std::vector<ReplicaId>& to, const PacketPtr& p) {
    Node* n = node(from);
    auto tagged = message_round(p->body);
    Attrs a;
    a("msg", std::string(message_name(p->body)))("n", std::uint64_t{to.size()});
    a("r", tagged ? *tagged : (n ? n->current_round() : 0));
    a("scope", is_global(p->body) ? "global" : "local");
    a("cat", std::string(message_category(p->body)));
    a("to", join_ids(to));
    record(TraceRecord{now_, to_string(from), "send", p->digest, a.take()});
}

void Simulator::set_timer(ReplicaId owner, TimerTag tag, SimTime duration) {
    const std::uint64_t gen = ++timer_generation_;
    live_timers_[{owner, tag}] = gen;
    Event ev;
    ev.at = now_ + duration;
    ev.cls = 2;
    ev.seq = next_seq_++;
    ev.owner = owner;
    ev.tag = tag;
    ev.generation = gen;
    queue_.push(std::move(ev));
}

void Simulator::cancel_timer(ReplicaId owner, TimerTag tag) { live_timers_.erase({owner, tag}); }

void Simulator::record(TraceRecord r) { trace_.add(std::move(r)); }

void Simulator::dispatch(const Event& ev) {
    switch (ev.cls) {
        case 0: {
            Node* n = node(ev.owner);
            if (!n) return;
            current_ = ev.owner;
            NetContext ctx(*this, ev.owner);
            (*ev.call)(ctx, *n);
            break;
        }
        case 1: {
            Node* n = node(ev.env.to);
            if (!n) return;
            ++stats_.delivered;
            if (on_deliver) on_deliver(ev.env);
            current_ = ev.env.to;
            NetContext ctx(*this, ev.env.to);
            n->on_message(ctx, ev.env.from, ev.env.payload);
            break;
        }
        default: {
            auto it = live_timers_.find({ev.owner, ev.tag});
            if (it == live_timers_.end() || it->second != ev.generation) return;
            live_timers_.erase(it);
            Node* n = node(ev.owner);
            if (!n) return;
            current_ = ev.owner;
            NetContext ctx(*this, ev.owner);
            n->on_timer(ctx, ev.tag);
            break;
        }
    }
    current_.reset();
}

RunStats Simulator::run(std::uint64_t max_events, SimTime horizon) {
    if (stats_.events == 0) {
        for (auto& [id, n] : nodes_) {
            current_ = id;
            NetContext ctx(*this, id);
            n->start(ctx);
        }
        current_.reset();
    }
    while (!queue_.empty()) {
        if (queue_.top().cls == 2) {
            const auto& top = queue_.top();
            auto it = live_timers_.find({top.owner, top.tag});
            if (it == live_timers_.end() || it->second != top.generation) {
                queue_.pop();
                continue;
            }
        }
        if (stats_.events >= max_events || queue_.top().at > horizon) {
            stats_.truncated = true;
            break;
        }
        Event ev = queue_.top();
        queue_.pop();
        now_ = std::max(now_, ev.at);
        ++stats_.events;
        dispatch(ev);
    }
    for (auto& [id, n] : nodes_) {
        current_ = id;
        NetContext ctx(*this, id);
        n->on_finish(ctx);
    }
    current_.reset();
    stats_.parked_dropped = parked_.size();
    return stats_;
}

}  // namespace hamava
