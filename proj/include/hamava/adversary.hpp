#pragma once

#include "hamava/replica.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hamava {

enum class StrategyKind { None, SilentLeader, BrdPartialLeader, ComplaintReplay, StaleViewForgery };

std::optional<StrategyKind> parse_strategy(std::string_view name);
std::string_view strategy_name(StrategyKind k);

struct AdversaryPlan {
    StrategyKind kind = StrategyKind::None;
    std::vector<ReplicaId> nodes;
    // brd_partial_leader
    std::set<ReplicaId> agg_to;
    std::set<ReplicaId> echo_to;
    std::set<ReplicaId> ready_to;
    // complaint_replay
    std::uint64_t max_replays = 4;
    // stale_view_forgery: cluster size whose quorum the forged certificates meet
    std::size_t old_size = 4;
};

/// Throws ConfigurationError when the plan controls more than f replicas of
/// some cluster of `config`, or names a replica outside it.
void validate_budget(const AdversaryPlan& plan, const Configuration& config);

/// Behaviour of one Byzantine replica, layered over a correct replica whose
/// outbound traffic it filters and rewrites.
class Strategy {
public:
    virtual ~Strategy() = default;
    /// Returns the packet to send to `to` in place of `p`, or null to drop it.
    virtual PacketPtr outbound(NetContext& ctx, Replica& self, ReplicaId to, const PacketPtr& p) = 0;
    virtual void inbound(NetContext&, Replica&, ReplicaId, const PacketPtr&) {}
    virtual void after_event(NetContext&, Replica&) {}
    virtual void on_timer(NetContext&, Replica&, TimerTag) {}
};

std::unique_ptr<Strategy> make_strategy(const AdversaryPlan& plan, const ProtocolParams& params);

/// A Byzantine replica: the correct state machine driven by a Strategy.
class ByzantineNode : public Node {
public:
    ByzantineNode(std::unique_ptr<Replica> inner, std::unique_ptr<Strategy> strategy);

    ReplicaId id() const override { return inner_->id(); }
    void start(NetContext& ctx) override;
    void on_message(NetContext& ctx, ReplicaId from, const PacketPtr& p) override;
    void on_timer(NetContext& ctx, TimerTag tag) override;
    void on_finish(NetContext& ctx) override;
    Round current_round() const override { return inner_->current_round(); }

    Replica& replica() { return *inner_; }

private:
    class Filter : public Transport {
    public:
        explicit Filter(ByzantineNode& owner) : owner_(owner) {}
        void send(NetContext& ctx, ReplicaId to, const PacketPtr& p) override;
        void broadcast(NetContext& ctx, const std::set<ReplicaId>& to, const PacketPtr& p) override;

    private:
        ByzantineNode& owner_;
    };

    std::unique_ptr<Replica> inner_;
    std::unique_ptr<Strategy> strategy_;
    Filter filter_;
};

}  // namespace hamava
