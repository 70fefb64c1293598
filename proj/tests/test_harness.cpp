#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hamava/harness.hpp"

#include <algorithm>
#include <sstream>

using namespace hamava;
using nlohmann::json;

namespace {

json base_doc() {
    return json::parse(R"({
        "schema": 1,
        "name": "t",
        "clusters": [{"size": 4}, {"size": 4}],
        "workload": {"txns": 8, "interval": 2},
        "protocol": {"min_rounds": 2},
        "seeds": "1..3",
        "horizon": 50000
    })");
}

std::vector<std::string> diagnostics_of(const json& doc) {
    try {
        parse_scenario(doc);
    } catch (const ScenarioError& e) {
        return e.diagnostics();
    }
    return {};
}

bool mentions(const std::vector<std::string>& diags, std::string_view word) {
    return std::any_of(diags.begin(), diags.end(), [&](const std::string& d) { return d.find(word) != std::string::npos; });
}

}  // namespace

TEST_CASE("a minimal scenario parses with sequential ids") {
    const auto s = parse_scenario(base_doc());
    CHECK(s.name == "t");
    CHECK(s.initial.cluster_count() == 2);
    CHECK(s.initial.sorted(ClusterId{1}).front() == ReplicaId{5});
    CHECK(s.seed_lo == 1);
    CHECK(s.seed_hi == 3);
    CHECK(s.min_rounds == 2);
    CHECK(s.workload.txns == 8);
}

TEST_CASE("every problem in a document is reported") {
    auto doc = base_doc();
    doc["colour"] = "blue";
    doc["byzantine"] = json::array({0});
    doc["timing"] = json::object({{"delta", "fast"}});
    const auto d = diagnostics_of(doc);
    CHECK(d.size() >= 3);
    CHECK(mentions(d, "byzantine"));
    CHECK(mentions(d, "colour"));
    CHECK(mentions(d, "delta"));
}

TEST_CASE("the fault budget is enforced at every scheduled configuration") {
    auto doc = base_doc();
    doc["byzantine"] = {2};
    doc["adversary"] = json::object({{"strategy", "silent_leader"}});
    CHECK(diagnostics_of(doc).empty());

    auto two = doc;
    two["byzantine"] = {2, 3};
    CHECK_FALSE(diagnostics_of(two).empty());

    // Shrinking cluster 0 to three members leaves no room for a fault.
    auto shrink = doc;
    shrink["reconfig"] = json::array({{{"round", 2}, {"subject", 4}, {"op", "leave"}, {"cluster", 0}}});
    CHECK_FALSE(diagnostics_of(shrink).empty());
}

TEST_CASE("reconfiguration schedules are checked") {
    auto member_join = base_doc();
    member_join["reconfig"] = json::array({{{"time", 5}, {"subject", 3}, {"op", "join"}, {"cluster", 1}}});
    CHECK_FALSE(diagnostics_of(member_join).empty());

    auto round_join = base_doc();
    round_join["reconfig"] = json::array({{{"round", 2}, {"subject", 20}, {"op", "join"}, {"cluster", 1}}});
    CHECK_FALSE(diagnostics_of(round_join).empty());

    auto bad_contact = base_doc();
    bad_contact["reconfig"] = json::array(
        {{{"time", 5}, {"subject", 20}, {"op", "join"}, {"cluster", 1}, {"contacts", {5, 6, 77}}}});
    CHECK_FALSE(diagnostics_of(bad_contact).empty());

    auto empty = base_doc();
    empty["clusters"] = json::array({{{"size", 1}}, {{"size", 4}}});
    empty["reconfig"] = json::array({{{"round", 2}, {"subject", 1}, {"op", "leave"}, {"cluster", 0}}});
    CHECK_FALSE(diagnostics_of(empty).empty());

    auto ok = base_doc();
    ok["reconfig"] = json::array({{{"time", 5}, {"subject", 20}, {"op", "join"}, {"cluster", 1}}});
    CHECK(diagnostics_of(ok).empty());
}

TEST_CASE("seed ranges") {
    CHECK(parse_seed_range("3..7") == std::pair<std::uint64_t, std::uint64_t>{3, 7});
    CHECK(parse_seed_range("5") == std::pair<std::uint64_t, std::uint64_t>{5, 5});
    CHECK_THROWS(parse_seed_range("7..3"));
    CHECK_THROWS(parse_seed_range("x"));
}

TEST_CASE("workload generation is seeded and follows the requested mix") {
    WorkloadSpec w;
    w.txns = 20000;
    w.read_ratio = 0.8;
    w.keys = 16;
    w.start = 10;
    w.interval = 3;
    const std::vector<ReplicaId> subs{ReplicaId{1}, ReplicaId{3}, ReplicaId{9}};
    const auto a = gen_workload(w, subs, 42);
    const auto b = gen_workload(w, subs, 42);
    REQUIRE(a.size() == w.txns);
    CHECK(std::equal(a.begin(), a.end(), b.begin(), [](const GenTxn& x, const GenTxn& y) {
        return x.at == y.at && x.submitter == y.submitter && x.kind == y.kind && x.key == y.key && x.value == y.value;
    }));
    std::size_t reads = 0;
    std::map<std::uint64_t, std::size_t> per_key;
    for (std::size_t i = 0; i < a.size(); ++i) {
        reads += a[i].kind == TxnKind::Read;
        CHECK(a[i].key < w.keys);
        CHECK(std::find(subs.begin(), subs.end(), a[i].submitter) != subs.end());
        if (i) CHECK(a[i].at >= a[i - 1].at);
        ++per_key[a[i].key];
    }
    CHECK(a.front().at >= w.start);
    const double ratio = double(reads) / double(a.size());
    CHECK(ratio > 0.78);
    CHECK(ratio < 0.82);
    // Skewed draws favour low keys.
    CHECK(per_key[0] > per_key[15]);

    const auto c = gen_workload(w, subs, 43);
    CHECK_FALSE(std::equal(a.begin(), a.end(), c.begin(), [](const GenTxn& x, const GenTxn& y) {
        return x.key == y.key && x.kind == y.kind;
    }));
}

TEST_CASE("every matrix scenario validates") {
    for (auto t : kTopologies)
        for (auto k : kStrategies) {
            CAPTURE(std::string(topology_name(t)) + "/" + std::string(strategy_name(k)));
            CHECK_NOTHROW(validate_scenario(matrix_scenario(t, k)));
        }
}

namespace {

Trace small_run() {
    auto s = parse_scenario(base_doc());
    return run_scenario(s, 1).trace;
}

std::size_t index_of(const Trace& t, std::string_view kind, std::string_view node, std::size_t skip = 0) {
    for (std::size_t i = 0; i < t.records.size(); ++i)
        if (t.records[i].kind == kind && t.records[i].node == node && skip-- == 0) return i;
    FAIL("record not found");
    return 0;
}

}  // namespace

TEST_CASE("traces round-trip through text") {
    const auto t = small_run();
    std::stringstream ss;
    t.write(ss);
    const auto back = Trace::parse(ss);
    CHECK(back.records.size() == t.records.size());
    CHECK(back.digest() == t.digest());
}

TEST_CASE("a clean run passes and injected faults are detected") {
    const auto clean = small_run();
    REQUIRE(check_invariants(clean).ok());

    SUBCASE("diverging execution") {
        auto t = clean;
        t.records[index_of(t, "execute", "n3")].digest ^= 1;
        const auto r = check_invariants(t);
        CHECK_FALSE(r.safety_ok());
        CHECK_FALSE(r.find("state_agreement")->ok);
    }
    SUBCASE("duplicate ordered delivery") {
        auto t = clean;
        const auto i = index_of(t, "tob_deliver", "n1");
        t.records.insert(t.records.begin() + static_cast<long>(i) + 1, t.records[i]);
        CHECK_FALSE(check_invariants(t).find("tob_no_duplication")->ok);
    }
    SUBCASE("different disseminated sets") {
        auto t = clean;
        t.records[index_of(t, "brd_deliver", "n4")].digest ^= 1;
        CHECK_FALSE(check_invariants(t).find("brd_uniformity")->ok);
    }
    SUBCASE("a lost return breaks liveness only") {
        auto t = clean;
        t.records.erase(t.records.begin() + static_cast<long>(index_of(t, "return", "n1")));
        const auto r = check_invariants(t);
        CHECK(r.safety_ok());
        CHECK_FALSE(r.liveness_ok());
        CHECK_FALSE(r.find("txn_validity")->ok);
    }
    SUBCASE("a leader change without a complaint") {
        auto t = clean;
        const auto i = index_of(t, "execute", "n1");
        for (std::uint64_t n = 1; n <= 4; ++n) {
            TraceRecord nl{t.records[i].time, "n" + std::to_string(n), "new_leader", 0,
                           Attrs{}("c", std::uint64_t{0})("ts", std::uint64_t{2})("leader", std::uint64_t{3})(
                                   "via", "quorum")("r", std::uint64_t{1})
                               .take()};
            t.records.insert(t.records.begin() + static_cast<long>(i), nl);
        }
        CHECK_FALSE(check_invariants(t).find("overthrow_resistance")->ok);
    }
}

TEST_CASE("metrics count messages from send records") {
    Trace t;
    t.add(TraceRecord{0, "harness", "scenario", 0, Attrs{}("byzantine", "").take()});
    t.add(TraceRecord{1, "n1", "send", 0, Attrs{}("msg", "Inter")("n", std::uint64_t{2})("r", std::uint64_t{1})("scope", "global")("cat", "inter").take()});
    t.add(TraceRecord{2, "n5", "send", 0, Attrs{}("msg", "Local")("n", std::uint64_t{7})("r", std::uint64_t{1})("scope", "local")("cat", "local").take()});
    t.add(TraceRecord{3, "n1", "send", 0, Attrs{}("msg", "Echo")("n", std::uint64_t{4})("r", std::uint64_t{2})("scope", "local")("cat", "brd").take()});
    t.add(TraceRecord{9, "n1", "execute", 0, Attrs{}("r", std::uint64_t{1})("ops", std::uint64_t{10}).take()});
    t.add(TraceRecord{20, "n1", "execute", 0, Attrs{}("r", std::uint64_t{2})("ops", std::uint64_t{10}).take()});
    const auto m = count_messages(t);
    CHECK(m.messages == 13);
    CHECK(m.global == 2);
    CHECK(m.local == 11);
    CHECK(m.send_records == 3);
    REQUIRE(m.round(1));
    CHECK(m.round(1)->global == 2);
    CHECK(m.round(1)->by_category.at("local") == 7);
    CHECK(m.round(1)->latency == 9);
    CHECK(m.round(2)->latency == 11);

    const auto recs = report_records(check_invariants(t), m);
    CHECK(std::any_of(recs.begin(), recs.end(), [](const json& j) {
        return j["type"] == "metric" && j["name"] == "global_messages" && j["value"] == 2;
    }));
    CHECK(std::any_of(recs.begin(), recs.end(), [](const json& j) { return j["type"] == "invariant"; }));
}
