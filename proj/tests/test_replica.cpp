#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixture.hpp"
#include "hamava/replica.hpp"

using namespace hamava;
using namespace hamava::testing;

namespace {

struct World {
    KeyRing keys;
    Simulator sim;
    Configuration initial;
    std::map<ReplicaId, Replica*> reps;
    std::map<std::uint64_t, std::uint64_t> expected;  // key -> value written

    World(std::uint64_t seed, std::vector<std::set<ReplicaId>> clusters, std::set<ReplicaId> extra = {},
          Round min_rounds = 1)
        : keys(seed), sim(timing(), seed) {
        std::map<ClusterId, std::set<ReplicaId>> m;
        for (std::size_t i = 0; i < clusters.size(); ++i) m[ClusterId{static_cast<std::uint32_t>(i)}] = clusters[i];
        initial = Configuration(m, 1);
        std::set<ReplicaId> all = extra;
        for (const auto& c : clusters) all.insert(c.begin(), c.end());
        for (auto id : all) {
            auto r = std::make_unique<Replica>(id, keys, ProtocolParams{}, initial);
            r->set_min_rounds(min_rounds);
            reps[id] = r.get();
            sim.add_node(std::move(r));
        }
    }

    static TimingModel timing() {
        TimingModel t;
        t.gst = 100;
        t.delta = 10;
        t.pre_gst_max = 30;
        return t;
    }

    Replica& operator[](std::uint64_t id) { return *reps.at(ReplicaId{id}); }

    void write(SimTime t, std::uint64_t id, std::uint64_t key, std::uint64_t value) {
        expected[key] = value;
        sim.at(t, ReplicaId{id}, [key, value](NetContext& ctx, Node& n) {
            static_cast<Replica&>(n).submit(ctx, TxnKind::Write, key, value);
        });
    }

    std::size_t count(std::string_view kind, std::uint64_t node) const {
        std::size_t n = 0;
        for (const auto& r : sim_trace().records) n += r.kind == kind && r.node == "n" + std::to_string(node);
        return n;
    }
    const Trace& sim_trace() const { return const_cast<Simulator&>(sim).trace(); }

    void run() {
        const auto stats = sim.run(5'000'000, 200'000);
        REQUIRE_FALSE(stats.truncated);
    }
};

}  // namespace

TEST_CASE("key-value transactions") {
    KvState s;
    CHECK(apply_txn(s, Txn{ReplicaId{1}, 1, TxnKind::Read, 5, 0}) == 0);
    CHECK(apply_txn(s, Txn{ReplicaId{1}, 2, TxnKind::Write, 5, 42}) == 42);
    CHECK(apply_txn(s, Txn{ReplicaId{1}, 3, TxnKind::Read, 5, 0}) == 42);
    CHECK(apply_txn(s, Txn{ReplicaId{1}, 4, TxnKind::Noop, 5, 7}) == 0);
    CHECK(s.store.at(5) == 42);
}

TEST_CASE("two clusters execute every submitted write in the same order") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        World w(seed, {id_range(1, 4), id_range(5, 8)});
        for (std::uint64_t id = 1; id <= 8; ++id) w.write(id, id, 100 + id, 1000 * seed + id);
        w.run();
        const auto& ref = w[1];
        CHECK(ref.state().store == w.expected);
        for (auto& [id, r] : w.reps) {
            CAPTURE(id.value);
            CHECK(r->mode() == Replica::Mode::Active);
            CHECK(r->round() == ref.round());
            CHECK(r->state().log == ref.state().log);
            CHECK(r->state().store == ref.state().store);
            CHECK(w.count("return", id.value) == 1);
        }
    }
}

TEST_CASE("a joiner becomes a member with the cluster's state") {
    World w(3, {id_range(1, 4), id_range(5, 8)}, {ReplicaId{9}}, 3);
    for (std::uint64_t id = 1; id <= 8; ++id) w.write(id, id, id, id);
    w.sim.at(5, ReplicaId{9}, [](NetContext& ctx, Node& n) {
        static_cast<Replica&>(n).request_join(ctx, ClusterId{1}, {ReplicaId{5}, ReplicaId{6}, ReplicaId{7}, ReplicaId{8}});
    });
    w.run();
    auto& j = w[9];
    CHECK(j.mode() == Replica::Mode::Active);
    CHECK(j.cluster() == ClusterId{1});
    CHECK(j.round() == w[1].round());
    CHECK(j.state().log == w[1].state().log);
    for (auto& [id, r] : w.reps) CHECK(r->config().members(ClusterId{1}) == id_range(5, 9));
    CHECK(w.count("joined", 9) == 1);
}

TEST_CASE("a scheduled leave removes the replica from every view") {
    World w(4, {id_range(1, 4), id_range(5, 8)}, {}, 3);
    for (std::uint64_t id = 1; id <= 7; ++id) w.write(id, id, id, id);
    w[8].schedule_leave(1);
    w.run();
    CHECK(w[8].mode() == Replica::Mode::Left);
    for (std::uint64_t id = 1; id <= 7; ++id) {
        CHECK(w[id].config().members(ClusterId{1}) == id_range(5, 7));
        CHECK(w[id].state().log == w[1].state().log);
    }
}

TEST_CASE("idle replicas refuse client transactions") {
    World w(5, {id_range(1, 4)}, {ReplicaId{9}});
    w.sim.at(1, ReplicaId{9}, [](NetContext& ctx, Node& n) {
        static_cast<Replica&>(n).submit(ctx, TxnKind::Write, 1, 1);
    });
    w.run();
    CHECK(w.count("reject", 9) == 1);
    CHECK(w[9].mode() == Replica::Mode::Idle);
    CHECK(w[1].state().store.empty());
}

TEST_CASE("a replica cut off during a round catches up afterwards") {
    World w(6, {id_range(1, 4), id_range(5, 8)}, {}, 2);
    TimingModel t = World::timing();
    for (std::uint64_t from = 1; from <= 8; ++from)
        if (from != 4) t.link_delays.push_back(LinkDelay{ReplicaId{from}, ReplicaId{4}, 0, 90, 2000});
    Simulator delayed(t, 6);
    std::map<ReplicaId, Replica*> reps;
    for (std::uint64_t id = 1; id <= 8; ++id) {
        auto r = std::make_unique<Replica>(ReplicaId{id}, w.keys, ProtocolParams{}, w.initial);
        r->set_min_rounds(2);
        reps[ReplicaId{id}] = r.get();
        delayed.add_node(std::move(r));
    }
    for (std::uint64_t id : {1, 2, 3, 5, 6, 7, 8})
        delayed.at(id, ReplicaId{id}, [id](NetContext& ctx, Node& n) {
            static_cast<Replica&>(n).submit(ctx, TxnKind::Write, id, id);
        });
    const auto stats = delayed.run(5'000'000, 200'000);
    REQUIRE_FALSE(stats.truncated);
    std::size_t catch_ups = 0;
    for (const auto& r : delayed.trace().records) catch_ups += r.kind == "catch_up" && r.node == "n4";
    CHECK(catch_ups >= 1);
    for (auto& [id, r] : reps) {
        CAPTURE(id.value);
        CHECK(r->round() == reps[ReplicaId{1}]->round());
        CHECK(r->state().log == reps[ReplicaId{1}]->state().log);
    }
}
