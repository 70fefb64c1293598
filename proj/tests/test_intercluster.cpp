#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixture.hpp"
#include "hamava/brd.hpp"
#include "hamava/intercluster.hpp"

using namespace hamava;
using namespace hamava::testing;

namespace {

constexpr ClusterId kA{0};
constexpr ClusterId kB{1};
constexpr std::size_t kBatch = 4;

struct Batch {
    std::vector<Operation> ops;
    OpsCerts certs;
};

std::vector<ReplicaId> first(const std::set<ReplicaId>& members, std::size_t k) {
    return std::vector<ReplicaId>(members.begin(), std::next(members.begin(), static_cast<long>(k)));
}

/// A round batch of cluster j whose certificates carry `trans_signers`
/// commit signatures and `ready_signers` ready signatures.
Batch make_batch(const KeyRing& keys, ClusterId j, Round r, const std::set<ReplicaId>& members,
                 std::size_t trans_signers, std::size_t ready_signers, std::size_t contributors = 0) {
    const std::size_t q = oracle_quorum(members.size());
    if (contributors == 0) contributors = q;
    Batch b;
    for (std::uint64_t k = 0; k < kBatch; ++k) {
        const Txn t{*members.begin(), k, TxnKind::Write, k, 10 + k};
        b.ops.emplace_back(Trans{t.origin, t});
        TransCert cert{1, {}};
        for (auto id : first(members, trans_signers))
            cert.sigs.push_back(keys.signer_for(id).sign(commit_statement(j, r, 1, k, txn_digest(t))));
        b.certs.trans.push_back(cert);
    }
    AttributedSet set;
    for (auto id : first(members, contributors)) {
        RecsMsg m{id, r, {}, {}};
        m.sig = keys.signer_for(id).sign(recs_statement(j, r, digest_of(m.recs)));
        set[id] = m;
    }
    b.ops.emplace_back(Reconfig{union_of(set)});
    b.certs.reconfig.set = set;
    b.certs.reconfig.ready_ts = 1;
    for (auto id : first(members, ready_signers))
        b.certs.reconfig.ready_sigs.push_back(keys.signer_for(id).sign(ready_statement(j, r, 1, set_digest(set))));
    return b;
}

bool certified(const KeyRing& keys, const Batch& b, const std::set<ReplicaId>& members, Round r = 1) {
    return ops_certified(kA, r, b.ops, b.certs, members, kBatch, keys);
}

}  // namespace

TEST_CASE("certification holds at the quorum boundary and fails one below it") {
    KeyRing keys(1);
    for (std::uint64_t n : {4, 5, 7}) {
        CAPTURE(n);
        const auto members = id_range(1, n);
        const auto q = oracle_quorum(n);
        CHECK(certified(keys, make_batch(keys, kA, 1, members, q, q), members));
        CHECK_FALSE(certified(keys, make_batch(keys, kA, 1, members, q - 1, q), members));
        CHECK_FALSE(certified(keys, make_batch(keys, kA, 1, members, q, q - 1), members));
        CHECK_FALSE(certified(keys, make_batch(keys, kA, 1, members, q, q, q - 1), members));
    }
}

TEST_CASE("certificates sized for an older, smaller view fail against the grown view") {
    KeyRing keys(2);
    const auto old_view = id_range(1, 4);
    const auto grown = id_range(1, 7);
    const auto stale = make_batch(keys, kA, 1, grown, oracle_quorum(4), oracle_quorum(4), oracle_quorum(4));
    CHECK(certified(keys, stale, old_view));
    CHECK_FALSE(certified(keys, stale, grown));
}

TEST_CASE("certification rejects malformed batches") {
    KeyRing keys(3);
    const auto members = id_range(1, 4);
    const auto good = make_batch(keys, kA, 1, members, 3, 3);
    REQUIRE(certified(keys, good, members));

    auto wrong_round = good;
    CHECK_FALSE(certified(keys, wrong_round, members, 2));

    auto swapped = good;
    std::swap(swapped.ops[0], swapped.ops[1]);
    std::swap(swapped.certs.trans[0], swapped.certs.trans[1]);
    CHECK_FALSE(certified(keys, swapped, members));

    auto short_batch = good;
    short_batch.ops.erase(short_batch.ops.begin());
    short_batch.certs.trans.erase(short_batch.certs.trans.begin());
    CHECK_FALSE(certified(keys, short_batch, members));

    auto duplicated = good;
    for (auto& c : duplicated.certs.trans) {
        c.sigs.resize(2);
        c.sigs.push_back(c.sigs[0]);
    }
    CHECK_FALSE(certified(keys, duplicated, members));

    auto outsiders = make_batch(keys, kA, 1, id_range(3, 9), 3, 3);
    CHECK_FALSE(certified(keys, outsiders, members));

    auto tampered = good;
    std::get<Trans>(tampered.ops[2]).txn.value += 1;
    CHECK_FALSE(certified(keys, tampered, members));

    auto extra_request = good;
    ReconfigRequest req{ReconfigKind::Join, ReplicaId{40}, kA, 1, {}};
    req.signature = keys.signer_for(req.subject).sign(req.statement());
    std::get<Reconfig>(extra_request.ops.back()).recs.insert(req);
    CHECK_FALSE(certified(keys, extra_request, members));
}

namespace {

/// Cluster A = {1..4}, cluster B = {5..8}; B's members run InterCluster.
struct TwoClusters : HostNet {
    Configuration config{{{kA, id_range(1, 4)}, {kB, id_range(5, 8)}}, 1};
    std::map<ReplicaId, InterCluster> ic;
    std::map<ReplicaId, Election> el;
    bool watchdogs = true;

    explicit TwoClusters(std::uint64_t seed, ProtocolParams params = {}) : HostNet(id_range(1, 8), seed, {}, params) {
        for (auto id : ids) {
            const ClusterId self = *config.cluster_of(id);
            ic[id].begin_round(self, 1, config, config);
            el[id] = Election(self, config.members(self));
            auto* me = hosts[id];
            me->on_start = [this, id](Env& env) {
                if (watchdogs && config.cluster_of(id) == kB) ic[id].arm_timers(env);
            };
            me->on_msg = [this, id, me](Env& env, ReplicaId from, const Message& m) {
                auto& x = ic[id];
                if (const auto* i = std::get_if<Inter>(&m)) x.on_inter(env, from, *i);
                if (const auto* l = std::get_if<Local>(&m)) x.on_local(env, from, *l);
                if (const auto* lc = std::get_if<LComplaint>(&m)) x.on_lcomplaint(env, from, *lc);
                if (const auto* rc = std::get_if<RComplaint>(&m)) x.on_rcomplaint(env, from, *rc);
                if (const auto* cr = std::get_if<ComplaintRelay>(&m)) x.on_relay(env, from, *cr, el[id], *me);
            };
            me->on_tmr = [this, id](Env& env, TimerTag tag) {
                if (tag.kind == kRemoteTimer) ic[id].on_timer(env, ClusterId{static_cast<std::uint32_t>(tag.param % 1024)});
            };
        }
    }

    void send_inter(SimTime t, std::uint64_t from, const Batch& b) {
        at(t, from, [b](Env& env) {
            for (auto to : {ReplicaId{5}, ReplicaId{6}}) env.send(to, Inter{1, kA, b.ops, b.certs});
        });
    }

    template <class T>
    std::size_t count(std::uint64_t id) {
        std::size_t n = 0;
        for (const auto& [from, m] : (*this)[id].inbox) n += std::holds_alternative<T>(m);
        return n;
    }
};

}  // namespace

TEST_CASE("a certified batch sent to f+1 members reaches the whole remote cluster") {
    TwoClusters net(4);
    const auto b = make_batch(net.keys, kA, 1, id_range(1, 4), 3, 3);
    net.send_inter(10, 1, b);
    net.sim.run(100000, 100000);
    for (std::uint64_t id = 5; id <= 8; ++id) {
        CAPTURE(id);
        CHECK(net.ic[ReplicaId{id}].has(kA));
        CHECK(ops_digest(net.ic[ReplicaId{id}].batches().at(kA).ops) == ops_digest(b.ops));
    }
    for (std::uint64_t id = 1; id <= 2; ++id) CHECK(net.count<RComplaint>(id) == 0);
}

TEST_CASE("an uncertified batch is dropped and the remote cluster complains with a quorum") {
    TwoClusters net(5);
    net.send_inter(10, 1, make_batch(net.keys, kA, 1, id_range(1, 4), 2, 3));
    net.sim.run(100000, 700);
    for (std::uint64_t id = 5; id <= 8; ++id) CHECK_FALSE(net.ic[ReplicaId{id}].has(kA));
    for (std::uint64_t id : {1, 2}) {
        CAPTURE(id);
        bool found = false;
        for (const auto& [from, m] : net[id].inbox)
            if (const auto* rc = std::get_if<RComplaint>(&m)) {
                found = true;
                CHECK(rc->c == 0);
                CHECK(oracle_signers(rc->sigs, lcomplaint_statement(kB, kA, 0, 1), id_range(5, 8), net.keys) >=
                      oracle_quorum(4));
            }
        CHECK(found);
    }
    CHECK(net.count<RComplaint>(3) == 0);
    CHECK(net.count<RComplaint>(4) == 0);
}

namespace {

RComplaint remote_complaint(const KeyRing& keys, std::uint64_t c, std::size_t signers) {
    RComplaint rc{c, kB, {}, 1};
    for (auto id : first(id_range(5, 8), signers))
        rc.sigs.push_back(keys.signer_for(id).sign(lcomplaint_statement(kB, kA, c, 1)));
    return rc;
}

/// Delivers `rc` to cluster A at `t` and again at `t2`, then counts the
/// remote complaints A's members raise.
std::size_t remote_complaints(bool disable_check, std::uint64_t replay_c) {
    ProtocolParams p;
    p.disable_rcn_check = disable_check;
    TwoClusters net(6, p);
    net.watchdogs = false;
    net.at(200, 5, [&net](Env& env) { env.send(ReplicaId{1}, remote_complaint(net.keys, 1, 3)); });
    net.at(400, 5, [&net, replay_c](Env& env) { env.send(ReplicaId{1}, remote_complaint(net.keys, replay_c, 3)); });
    net.sim.run(100000, 1000);
    std::size_t n = 0;
    for (std::uint64_t id = 1; id <= 4; ++id)
        for (const auto& c : net[id].complaints) n += c == "remote";
    return n;
}

}  // namespace

TEST_CASE("remote complaints are relayed once and stale numbers are refused") {
    // The first complaint reaches all four members of A.
    CHECK(remote_complaints(false, 1) == 4);
    CHECK(remote_complaints(false, 0) == 4);
    CHECK(remote_complaints(false, 2) == 8);
    // Without the counter check a lower number is accepted again.
    CHECK(remote_complaints(true, 0) == 8);
}

TEST_CASE("remote complaints without a quorum of signatures are ignored") {
    TwoClusters net(7);
    net.watchdogs = false;
    net.at(200, 5, [&net](Env& env) { env.send(ReplicaId{1}, remote_complaint(net.keys, 0, 2)); });
    net.sim.run(100000, 1000);
    for (std::uint64_t id = 1; id <= 4; ++id) CHECK(net[id].complaints.empty());
}
