#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixture.hpp"
#include "hamava/leader.hpp"

using namespace hamava;
using namespace hamava::testing;

namespace {

struct ElectionNet : HostNet {
    std::map<ReplicaId, Election> el;
    std::map<ReplicaId, std::vector<std::pair<LeaderTs, std::string>>> changes;

    explicit ElectionNet(std::uint64_t n, std::uint64_t seed = 1) : HostNet(id_range(1, n), seed) {
        for (auto id : ids) {
            el[id] = Election(ClusterId{0}, ids);
            el[id].on_change = [this, id](Env&, ReplicaId, LeaderTs ts, std::string_view via) {
                changes[id].emplace_back(ts, std::string(via));
            };
            hosts[id]->on_msg = [this, id](Env& env, ReplicaId from, const Message& m) {
                if (const auto* c = std::get_if<ElectComplaint>(&m)) el[id].on_complaint(env, from, *c, 1);
            };
        }
    }

    void complain_at(SimTime t, std::uint64_t id) {
        at(t, id, [this, id](Env& env) { el[ReplicaId{id}].complain(env, "test", {}, 1); });
    }
};

}  // namespace

TEST_CASE("initial leader is sorted members at index ts mod n") {
    Election e(ClusterId{0}, id_range(1, 4));
    CHECK(e.ts() == 1);
    CHECK(e.leader() == ReplicaId{2});
}

TEST_CASE("f complaints do not move the leader") {
    ElectionNet net(4);
    net.complain_at(5, 3);
    net.sim.run(10000, 10000);
    for (auto& [id, e] : net.el) CHECK(e.ts() == 1);
}

TEST_CASE("f+1 complaints are amplified into a leader change everywhere") {
    ElectionNet net(4);
    net.complain_at(5, 3);
    net.complain_at(6, 4);
    net.sim.run(10000, 10000);
    for (auto& [id, e] : net.el) {
        CAPTURE(id.value);
        CHECK(e.ts() == 2);
        CHECK(e.leader() == ReplicaId{3});
        REQUIRE(net.changes[id].size() == 1);
        CHECK(net.changes[id][0].second == "quorum");
    }
}

TEST_CASE("the leader does not complain about itself") {
    ElectionNet net(4);
    bool sent = true;
    net.at(1, 2, [&](Env& env) { sent = net.el[ReplicaId{2}].complain(env, "test", {}, 1); });
    net.sim.run(1000, 1000);
    CHECK_FALSE(sent);
}

TEST_CASE("complaints from non-members and forged signatures are ignored") {
    ElectionNet net(4);
    for (std::uint64_t forger : {3, 4}) {
        net.at(5, forger, [&net](Env& env) {
            // Signed over the wrong statement.
            const auto bad = env.sign(12345);
            env.broadcast(net.ids, ElectComplaint{1, bad});
        });
    }
    net.sim.run(10000, 10000);
    for (auto& [id, e] : net.el) CHECK(e.ts() == 1);
}

TEST_CASE("f+1 members seen ahead make a replica jump") {
    ElectionNet net(7);
    const auto e7 = id_range(1, 7);
    Election& e = net.el[ReplicaId{1}];
    net.at(1, 1, [&](Env& env) {
        e.observe(env, ReplicaId{3}, 5, 1);
        CHECK(e.ts() == 1);
        e.observe(env, ReplicaId{4}, 6, 1);
        CHECK(e.ts() == 1);
        e.observe(env, ReplicaId{5}, 9, 1);
        // Three members ahead (f = 2): the third-highest timestamp is taken.
        CHECK(e.ts() == 5);
        CHECK(e.leader() == leader_for(e7, 5));
    });
    net.sim.run(1000, 1000);
    REQUIRE(net.changes[ReplicaId{1}].size() == 1);
    CHECK(net.changes[ReplicaId{1}][0] == std::pair<LeaderTs, std::string>{5, "jump"});
}

TEST_CASE("membership updates keep the timestamp and recompute the leader") {
    Election e(ClusterId{0}, id_range(1, 4), 3);
    CHECK(e.leader() == ReplicaId{4});
    e.set_members(id_range(1, 7));
    CHECK(e.ts() == 3);
    CHECK(e.leader() == ReplicaId{4});
    e.set_members(id_range(1, 5));
    CHECK(e.leader() == ReplicaId{4});
    e.adopt(7, 100);
    CHECK(e.ts() == 7);
    CHECK(e.leader() == ReplicaId{3});
    CHECK(e.installed_at() == 100);
}
