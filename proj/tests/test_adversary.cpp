#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixture.hpp"
#include "hamava/adversary.hpp"

using namespace hamava;
using namespace hamava::testing;

namespace {

Configuration two_clusters() { return Configuration({{ClusterId{0}, id_range(1, 4)}, {ClusterId{1}, id_range(5, 11)}}, 1); }

struct Bench {
    KeyRing keys{1};
    Simulator sim{TimingModel{}, 1};
    NetContext ctx{sim, ReplicaId{2}};
    Replica self{ReplicaId{2}, keys, ProtocolParams{}, two_clusters()};
};

PacketPtr echo_packet() { return make_packet(Echo{1, 1, {}, {}}); }

Inter signed_inter(const KeyRing& keys, std::size_t signers) {
    Inter m{1, ClusterId{0}, {}, {}};
    for (int k = 0; k < 4; ++k) {
        TransCert c{1, {}};
        for (std::uint64_t i = 1; i <= signers; ++i) c.sigs.push_back(keys.signer_for(ReplicaId{i}).sign(k));
        m.certs.trans.push_back(c);
    }
    for (std::uint64_t i = 1; i <= signers; ++i) m.certs.reconfig.ready_sigs.push_back(keys.signer_for(ReplicaId{i}).sign(9));
    return m;
}

}  // namespace

TEST_CASE("strategy names round-trip") {
    for (auto k : {StrategyKind::None, StrategyKind::SilentLeader, StrategyKind::BrdPartialLeader,
                   StrategyKind::ComplaintReplay, StrategyKind::StaleViewForgery})
        CHECK(parse_strategy(strategy_name(k)) == k);
    CHECK_FALSE(parse_strategy("omniscient"));
}

TEST_CASE("the fault budget is checked per cluster") {
    const auto cfg = two_clusters();
    AdversaryPlan p;
    p.nodes = {ReplicaId{2}};
    CHECK_NOTHROW(validate_budget(p, cfg));
    p.nodes = {ReplicaId{2}, ReplicaId{5}, ReplicaId{6}};
    CHECK_NOTHROW(validate_budget(p, cfg));
    p.nodes = {ReplicaId{2}, ReplicaId{3}};
    CHECK_THROWS_AS(validate_budget(p, cfg), ConfigurationError);
    p.nodes = {ReplicaId{5}, ReplicaId{6}, ReplicaId{7}};
    CHECK_THROWS_AS(validate_budget(p, cfg), ConfigurationError);
    p.nodes = {ReplicaId{40}};
    CHECK_THROWS_AS(validate_budget(p, cfg), ConfigurationError);
}

TEST_CASE("silent replicas drop everything") {
    Bench b;
    AdversaryPlan plan{StrategyKind::SilentLeader, {ReplicaId{2}}, {}, {}, {}, 4, 4};
    auto s = make_strategy(plan, {});
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{1}, echo_packet()) == nullptr);
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{2}, echo_packet()) == nullptr);
}

TEST_CASE("partial dissemination shows each stage to its chosen recipients") {
    Bench b;
    AdversaryPlan plan;
    plan.kind = StrategyKind::BrdPartialLeader;
    plan.agg_to = {ReplicaId{1}, ReplicaId{4}};
    plan.echo_to = {ReplicaId{1}, ReplicaId{4}};
    plan.ready_to = {ReplicaId{1}};
    auto s = make_strategy(plan, {});
    const auto agg = make_packet(Agg{1, 1, {}, {}});
    const auto ready = make_packet(Ready{1, 1, {}, {}});
    const auto prep = make_packet(Prepare{1, 1, 0, 0, {}});
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{1}, agg) == agg);
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{3}, agg) == nullptr);
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{4}, echo_packet()) != nullptr);
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{3}, echo_packet()) == nullptr);
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{1}, ready) == ready);
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{4}, ready) == nullptr);
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{2}, ready) == ready);
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{3}, prep) == prep);
}

TEST_CASE("stale-view forgery trims certificates to the old quorum") {
    Bench b;
    AdversaryPlan plan;
    plan.kind = StrategyKind::StaleViewForgery;
    plan.old_size = 4;
    auto s = make_strategy(plan, {});
    const auto in = make_packet(signed_inter(b.keys, 5));
    const auto out = s->outbound(b.ctx, b.self, ReplicaId{5}, in);
    REQUIRE(out);
    const auto& forged = std::get<Inter>(out->body);
    for (const auto& c : forged.certs.trans) CHECK(c.sigs.size() == oracle_quorum(4));
    CHECK(forged.certs.reconfig.ready_sigs.size() == oracle_quorum(4));
    const auto echo = echo_packet();
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{1}, echo) == echo);
}

TEST_CASE("the complaint replayer withholds the cluster's batch") {
    Bench b;
    AdversaryPlan plan;
    plan.kind = StrategyKind::ComplaintReplay;
    auto s = make_strategy(plan, {});
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{5}, make_packet(signed_inter(b.keys, 3))) == nullptr);
    const auto echo = echo_packet();
    CHECK(s->outbound(b.ctx, b.self, ReplicaId{1}, echo) == echo);
}

TEST_CASE("a silent Byzantine leader sends nothing and the correct replicas still progress") {
    const auto cfg = Configuration({{ClusterId{0}, id_range(1, 4)}, {ClusterId{1}, id_range(5, 8)}}, 1);
    KeyRing keys(3);
    TimingModel t;
    t.gst = 0;
    Simulator sim(t, 3);
    std::map<ReplicaId, Replica*> reps;
    for (std::uint64_t id = 1; id <= 8; ++id) {
        auto r = std::make_unique<Replica>(ReplicaId{id}, keys, ProtocolParams{}, cfg);
        reps[ReplicaId{id}] = r.get();
        if (id == 2) {
            AdversaryPlan plan{StrategyKind::SilentLeader, {ReplicaId{2}}, {}, {}, {}, 4, 4};
            sim.add_node(std::make_unique<ByzantineNode>(std::move(r), make_strategy(plan, {})));
        } else {
            sim.add_node(std::move(r));
        }
    }
    for (std::uint64_t id : {1, 3, 4, 5, 6, 7, 8})
        sim.at(id, ReplicaId{id}, [id](NetContext& ctx, Node& n) {
            static_cast<Replica&>(n).submit(ctx, TxnKind::Write, id, id);
        });
    std::size_t from_byzantine = 0;
    sim.on_deliver = [&](const Envelope& e) { from_byzantine += e.from == ReplicaId{2}; };
    const auto stats = sim.run(5'000'000, 100'000);
    REQUIRE_FALSE(stats.truncated);
    CHECK(from_byzantine == 0);
    for (std::uint64_t id : {1, 3, 4}) {
        CHECK(reps[ReplicaId{id}]->election().leader() != ReplicaId{2});
        CHECK(reps[ReplicaId{id}]->state().store.size() == 7);
    }
    CHECK(reps[ReplicaId{5}]->state().log == reps[ReplicaId{1}]->state().log);
}
