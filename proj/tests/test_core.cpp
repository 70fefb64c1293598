#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hamava/core.hpp"
#include "hamava/messages.hpp"

#include <algorithm>
#include <vector>

using namespace hamava;

namespace {

// Smallest q no larger than n - f whose pairwise intersections reach f + 1,
// found by enumerating every pair of q-subsets of {0..n-1}.
std::size_t brute_force_quorum(std::size_t n) {
    const std::size_t f = (n - 1) / 3;
    for (std::size_t q = 2 * f + 1; q <= n - f; ++q) {
        std::vector<unsigned> subsets;
        for (unsigned mask = 0; mask < (1u << n); ++mask)
            if (static_cast<std::size_t>(__builtin_popcount(mask)) == q) subsets.push_back(mask);
        bool ok = true;
        for (auto a : subsets) {
            for (auto b : subsets)
                if (static_cast<std::size_t>(__builtin_popcount(a & b)) < f + 1) {
                    ok = false;
                    break;
                }
            if (!ok) break;
        }
        if (ok) return q;
    }
    return 0;
}

std::set<ReplicaId> ids(std::initializer_list<std::uint64_t> v) {
    std::set<ReplicaId> out;
    for (auto x : v) out.insert(ReplicaId{x});
    return out;
}

}  // namespace

TEST_CASE("fault threshold is the largest f with 3f+1 <= n") {
    for (std::size_t n = 1; n <= 40; ++n) {
        const auto f = fault_threshold(n);
        CHECK(3 * f + 1 <= n);
        CHECK(3 * (f + 1) + 1 > n);
    }
}

TEST_CASE("quorum size matches an exhaustive intersection search for n = 1..10") {
    for (std::size_t n = 1; n <= 10; ++n) {
        CAPTURE(n);
        CHECK(quorum_size(n) == brute_force_quorum(n));
        CHECK(quorum_size(n) + fault_threshold(n) <= n);
    }
}

TEST_CASE("quorum size is 2f+1 exactly when n = 3f+1") {
    for (std::size_t f = 0; f <= 10; ++f) CHECK(quorum_size(3 * f + 1) == 2 * f + 1);
    CHECK(quorum_size(5) == 4);
    CHECK(quorum_size(6) == 4);
    CHECK(quorum_size(8) == 6);
}

TEST_CASE("round-robin leader follows sorted ids") {
    const auto m = ids({9, 3, 5, 1});
    CHECK(leader_for(m, 0) == ReplicaId{1});
    CHECK(leader_for(m, 1) == ReplicaId{3});
    CHECK(leader_for(m, 2) == ReplicaId{5});
    CHECK(leader_for(m, 3) == ReplicaId{9});
    CHECK(leader_for(m, 5) == ReplicaId{3});
}

TEST_CASE("sender set is the f+1 smallest ids") {
    const auto s = sender_set(ids({10, 4, 7, 2, 8, 11, 12}), 2);
    CHECK(s == std::vector<ReplicaId>{ReplicaId{2}, ReplicaId{4}, ReplicaId{7}});
}

TEST_CASE("signatures verify only with the signer's key") {
    KeyRing keys(7);
    const auto tok = keys.signer_for(ReplicaId{3}).sign(42);
    CHECK(keys.verify(tok));
    auto forged = tok;
    forged.signer = ReplicaId{4};
    CHECK_FALSE(keys.verify(forged));
    auto altered = tok;
    altered.digest = 43;
    CHECK_FALSE(keys.verify(altered));
    CHECK_FALSE(KeyRing(8).verify(tok));
}

TEST_CASE("certificates count distinct member signers") {
    KeyRing keys(1);
    const auto members = ids({1, 2, 3, 4});
    Certificate c{99, {}};
    for (std::uint64_t i : {1, 2, 2, 3}) c.signatures.push_back(keys.signer_for(ReplicaId{i}).sign(99));
    CHECK(count_valid_signers(c.signatures, 99, members, keys) == 3);
    CHECK(validate_certificate(c, members, 3, keys));
    CHECK_FALSE(validate_certificate(c, members, 4, keys));

    c.signatures.push_back(keys.signer_for(ReplicaId{9}).sign(99));
    CHECK_FALSE(validate_certificate(c, members, 3, keys));
    CHECK(count_valid_signers(c.signatures, 99, members, keys) == 3);
}

TEST_CASE("request sets keep one join and one leave per subject") {
    KeyRing keys(2);
    ReconfigRequest a{ReconfigKind::Join, ReplicaId{5}, ClusterId{0}, 1, {}};
    a.signature = keys.signer_for(a.subject).sign(a.statement());
    auto b = a;
    b.round = 2;
    b.signature = keys.signer_for(b.subject).sign(b.statement());
    ReconfigRequest c{ReconfigKind::Leave, ReplicaId{5}, ClusterId{0}, 2, {}};

    RecsSet s;
    CHECK(s.insert(a));
    CHECK_FALSE(s.insert(b));
    CHECK(s.insert(c));
    CHECK(s.size() == 2);
    CHECK(request_signature_valid(a, keys));
    CHECK_FALSE(request_signature_valid(c, keys));

    RecsSet t;
    t.insert(a);
    s.erase_all(t);
    CHECK(s.size() == 1);
    CHECK(s.contains(ReplicaId{5}, ReconfigKind::Leave));
}

TEST_CASE("configuration validation rejects empty clusters and repeated ids") {
    Configuration ok({{ClusterId{0}, ids({1, 2, 3, 4})}, {ClusterId{1}, ids({5, 6, 7, 8})}}, 1);
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.cluster_of(ReplicaId{6}) == ClusterId{1});
    CHECK_FALSE(ok.cluster_of(ReplicaId{9}));
    CHECK(ok.quorum(ClusterId{0}) == 3);

    Configuration dup({{ClusterId{0}, ids({1, 2})}, {ClusterId{1}, ids({2, 3})}}, 1);
    CHECK_THROWS_AS(dup.validate(), ConfigurationError);
    Configuration empty({{ClusterId{0}, ids({1})}, {ClusterId{1}, {}}}, 1);
    CHECK_THROWS_AS(empty.validate(), ConfigurationError);
}

TEST_CASE("message digests are stable and content sensitive") {
    Txn t{ReplicaId{1}, 3, TxnKind::Write, 7, 9};
    const auto d1 = make_packet(TxnForward{t})->digest;
    CHECK(d1 == make_packet(TxnForward{t})->digest);
    t.value = 10;
    CHECK(d1 != make_packet(TxnForward{t})->digest);
}
