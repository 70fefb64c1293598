#include "hamava/adversary.hpp"

#include <algorithm>
#include <map>

namespace hamava {

namespace {

const std::pair<StrategyKind, std::string_view> kStrategyNames[] = {
    {StrategyKind::None, "none"},
    {StrategyKind::SilentLeader, "silent_leader"},
    {StrategyKind::BrdPartialLeader, "brd_partial_leader"},
    {StrategyKind::ComplaintReplay, "complaint_replay"},
    {StrategyKind::StaleViewForgery, "stale_view_forgery"},
};

class Honest : public Strategy {
public:
    PacketPtr outbound(NetContext&, Replica&, ReplicaId, const PacketPtr& p) override { return p; }
};

class Silent : public Strategy {
public:
    PacketPtr outbound(NetContext&, Replica&, ReplicaId, const PacketPtr&) override { return nullptr; }
};

/// Leader that shows the dissemination stages to chosen recipients only.
class PartialDissemination : public Strategy {
public:
    explicit PartialDissemination(const AdversaryPlan& plan)
        : agg_to_(plan.agg_to), echo_to_(plan.echo_to), ready_to_(plan.ready_to) {}

    PacketPtr outbound(NetContext& ctx, Replica&, ReplicaId to, const PacketPtr& p) override {
        if (to == ctx.self()) return p;
        if (std::holds_alternative<Agg>(p->body)) return agg_to_.count(to) ? p : nullptr;
        if (std::holds_alternative<Echo>(p->body)) return echo_to_.count(to) ? p : nullptr;
        if (std::holds_alternative<Ready>(p->body)) return ready_to_.count(to) ? p : nullptr;
        return p;
    }

private:
    std::set<ReplicaId> agg_to_, echo_to_, ready_to_;
};

/// Withholds its cluster's batch from remote clusters, keeps the complaint
/// relay that results, and re-sends it after every leader change.
class ComplaintReplayer : public Strategy {
public:
    ComplaintReplayer(std::uint64_t max_replays, SimTime delay) : max_replays_(max_replays), delay_(delay) {}

    PacketPtr outbound(NetContext&, Replica&, ReplicaId, const PacketPtr& p) override {
        return std::holds_alternative<Inter>(p->body) ? nullptr : p;
    }

    void inbound(NetContext&, Replica&, ReplicaId, const PacketPtr& p) override {
        if (std::holds_alternative<ComplaintRelay>(p->body) && !stored_) stored_ = p;
    }

    void after_event(NetContext& ctx, Replica& self) override {
        const LeaderTs ts = self.election().ts();
        if (ts == last_ts_) return;
        last_ts_ = ts;
        if (stored_ && replays_ < max_replays_) ctx.set_timer(TimerTag{kAdversaryTimer, ts}, delay_);
    }

    void on_timer(NetContext& ctx, Replica& self, TimerTag tag) override {
        if (tag.param != self.election().ts() || replays_ >= max_replays_) return;
        ++replays_;
        ctx.trace("replay", stored_->digest, Attrs{}("ts", tag.param)("n", replays_));
        ctx.broadcast(self.config().members(self.cluster()), stored_);
    }

private:
    std::uint64_t max_replays_;
    SimTime delay_;
    PacketPtr stored_;
    LeaderTs last_ts_ = 1;
    std::uint64_t replays_ = 0;
};

/// Sends its cluster's batch with certificates cut down to the quorum of an
/// older, smaller membership.
class StaleViewForger : public Strategy {
public:
    explicit StaleViewForger(std::size_t old_size) : old_quorum_(quorum_size(old_size)) {}

    PacketPtr outbound(NetContext&, Replica&, ReplicaId, const PacketPtr& p) override {
        const auto* inter = std::get_if<Inter>(&p->body);
        if (!inter) return p;
        Inter forged = *inter;
        for (auto& cert : forged.certs.trans)
            if (cert.sigs.size() > old_quorum_) cert.sigs.resize(old_quorum_);
        auto& ready = forged.certs.reconfig.ready_sigs;
        if (ready.size() > old_quorum_) ready.resize(old_quorum_);
        return make_packet(std::move(forged));
    }

private:
    std::size_t old_quorum_;
};

}  // namespace

std::optional<StrategyKind> parse_strategy(std::string_view name) {
    for (const auto& [k, n] : kStrategyNames)
        if (n == name) return k;
    return std::nullopt;
}

std::string_view strategy_name(StrategyKind k) {
    for (const auto& [kind, n] : kStrategyNames)
        if (kind == k) return n;
    return "?";
}

void validate_budget(const AdversaryPlan& plan, const Configuration& config) {
    std::map<ClusterId, std::size_t> used;
    for (auto id : plan.nodes) {
        const auto home = config.cluster_of(id);
        if (!home) throw ConfigurationError("byzantine replica " + to_string(id) + " is not a member");
        if (++used[*home] > config.f(*home))
            throw ConfigurationError("byzantine replicas exceed f in cluster " + to_string(*home));
    }
}

std::unique_ptr<Strategy> make_strategy(const AdversaryPlan& plan, const ProtocolParams& params) {
    switch (plan.kind) {
        case StrategyKind::None: return std::make_unique<Honest>();
        case StrategyKind::SilentLeader: return std::make_unique<Silent>();
        case StrategyKind::BrdPartialLeader: return std::make_unique<PartialDissemination>(plan);
        case StrategyKind::ComplaintReplay:
            return std::make_unique<ComplaintReplayer>(plan.max_replays, params.epsilon + 1);
        case StrategyKind::StaleViewForgery: return std::make_unique<StaleViewForger>(plan.old_size);
    }
    return std::make_unique<Honest>();
}

ByzantineNode::ByzantineNode(std::unique_ptr<Replica> inner, std::unique_ptr<Strategy> strategy)
    : inner_(std::move(inner)), strategy_(std::move(strategy)), filter_(*this) {
    inner_->set_transport(&filter_);
}

void ByzantineNode::start(NetContext& ctx) {
    inner_->start(ctx);
    strategy_->after_event(ctx, *inner_);
}

void ByzantineNode::on_message(NetContext& ctx, ReplicaId from, const PacketPtr& p) {
    strategy_->inbound(ctx, *inner_, from, p);
    inner_->on_message(ctx, from, p);
    strategy_->after_event(ctx, *inner_);
}

void ByzantineNode::on_timer(NetContext& ctx, TimerTag tag) {
    if (tag.kind >= kAdversaryTimer)
        strategy_->on_timer(ctx, *inner_, tag);
    else
        inner_->on_timer(ctx, tag);
    strategy_->after_event(ctx, *inner_);
}

void ByzantineNode::on_finish(NetContext& ctx) { inner_->on_finish(ctx); }

void ByzantineNode::Filter::send(NetContext& ctx, ReplicaId to, const PacketPtr& p) {
    if (auto out = owner_.strategy_->outbound(ctx, *owner_.inner_, to, p)) ctx.send(to, out);
}

void ByzantineNode::Filter::broadcast(NetContext& ctx, const std::set<ReplicaId>& to, const PacketPtr& p) {
    std::set<ReplicaId> unchanged;
    for (auto id : to) {
        auto out = owner_.strategy_->outbound(ctx, *owner_.inner_, id, p);
        if (out == p)
            unchanged.insert(id);
        else if (out)
            ctx.send(id, out);
    }
    if (!unchanged.empty()) ctx.broadcast(unchanged, p);
}

}  // namespace hamava
