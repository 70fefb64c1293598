#include "hamava/harness.hpp"

namespace hamava {

namespace {

Replica& replica_of(Node& n) {
    if (auto* byz = dynamic_cast<ByzantineNode*>(&n)) return byz->replica();
    return dynamic_cast<Replica&>(n);
}

std::vector<ReplicaId> submitters_of(const Scenario& s) {
    std::set<ReplicaId> leaving;
    for (const auto& ev : s.reconfig)
        if (ev.kind == ReconfigKind::Leave) leaving.insert(ev.subject);
    std::vector<ReplicaId> out;
    for (auto c : s.initial.clusters())
        for (auto id : s.initial.members(c))
            if (!s.byzantine.count(id) && !leaving.count(id)) out.push_back(id);
    return out;
}

}  // namespace

RunResult run_scenario(const Scenario& s, std::uint64_t seed, const RunSetup& setup) {
    KeyRing keys(seed);
    Simulator sim(s.timing, seed);

    std::vector<ReplicaId> byz(s.byzantine.begin(), s.byzantine.end());
    sim.record(TraceRecord{0, "harness", "scenario", 0,
                           Attrs{}("name", s.name)("strategy", std::string(strategy_name(s.adversary.kind)))(
                                   "seed", seed)("byzantine", join_ids(byz))("batch", s.params.batch_size)(
                                   "rcn_check", std::uint64_t{!s.params.disable_rcn_check})
                               .take()});
    for (auto c : s.initial.clusters())
        sim.record(TraceRecord{0, "harness", "cluster", 0,
                               Attrs{}("c", c)("members", join_ids(s.initial.sorted(c))).take()});

    std::set<ReplicaId> ids;
    for (const auto& [c, m] : s.initial.all()) ids.insert(m.begin(), m.end());
    for (const auto& ev : s.reconfig) ids.insert(ev.subject);
    for (auto id : ids) {
        auto rep = std::make_unique<Replica>(id, keys, s.params, s.initial);
        rep->set_min_rounds(s.min_rounds);
        if (s.stale_view && s.stale_view->first == id) rep->freeze_cluster_view(s.stale_view->second);
        if (s.byzantine.count(id)) {
            sim.byzantine.insert(id);
            sim.add_node(std::make_unique<ByzantineNode>(std::move(rep), make_strategy(s.adversary, s.params)));
        } else {
            sim.add_node(std::move(rep));
        }
    }

    for (const auto& t : gen_workload(s.workload, submitters_of(s), seed))
        sim.at(t.at, t.submitter,
               [t](NetContext& ctx, Node& n) { replica_of(n).submit(ctx, t.kind, t.key, t.value); });

    for (const auto& ev : s.reconfig) {
        if (ev.kind == ReconfigKind::Join) {
            auto contacts = ev.contacts;
            if (contacts.empty()) contacts = s.initial.sorted(ev.cluster);
            sim.at(*ev.time, ev.subject, [c = ev.cluster, contacts](NetContext& ctx, Node& n) {
                replica_of(n).request_join(ctx, c, contacts);
            });
        } else if (ev.round) {
            replica_of(*sim.node(ev.subject)).schedule_leave(*ev.round);
        } else {
            sim.at(*ev.time, ev.subject, [](NetContext& ctx, Node& n) { replica_of(n).request_leave(ctx); });
        }
    }

    if (setup) setup(sim);
    RunResult out;
    out.stats = sim.run(s.max_events, s.horizon);
    sim.record(TraceRecord{sim.now(), "harness", "run_end", 0,
                           Attrs{}("events", out.stats.events)("truncated", std::uint64_t{out.stats.truncated})
                               .take()});
    out.trace = sim.take_trace();
    return out;
}

}  // namespace hamava
