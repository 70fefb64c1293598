#include "hamava/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hamava {

using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += (out.empty() ? "" : "; ") + l;
    return out;
}

/// Collects diagnostics while reading a JSON object, flagging unknown keys.
class Reader {
public:
    Reader(const json& obj, std::string path, std::vector<std::string>& diag)
        : obj_(obj), path_(std::move(path)), diag_(diag) {
        if (!obj_.is_object()) diag_.push_back(path_ + ": expected an object");
    }

    ~Reader() {
        if (!obj_.is_object()) return;
        for (const auto& [key, value] : obj_.items())
            if (!used_.count(key)) diag_.push_back(path_ + "." + key + ": unknown key");
    }

    bool has(const std::string& key) {
        used_.insert(key);
        return obj_.is_object() && obj_.contains(key);
    }

    const json* child(const std::string& key) { return has(key) ? &obj_.at(key) : nullptr; }

    template <class T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const json::exception&) {
            diag_.push_back(path_ + "." + key + ": wrong type");
        }
    }

    std::string at(const std::string& key) const { return path_ + "." + key; }

private:
    const json& obj_;
    std::string path_;
    std::vector<std::string>& diag_;
    std::set<std::string> used_;
};

bool positive_integer(const json& v) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>() > 0;
    return v.is_number_integer() && v.get<std::int64_t>() > 0;
}

std::vector<ReplicaId> read_ids(const json* j, const std::string& path, std::vector<std::string>& diag) {
    std::vector<ReplicaId> out;
    if (!j) return out;
    if (!j->is_array()) {
        diag.push_back(path + ": expected an array of ids");
        return out;
    }
    for (const auto& v : *j) {
        if (!positive_integer(v)) {
            diag.push_back(path + ": ids are positive integers");
            continue;
        }
        out.push_back(ReplicaId{v.get<std::uint64_t>()});
    }
    return out;
}

std::set<ReplicaId> to_set(const std::vector<ReplicaId>& v) { return {v.begin(), v.end()}; }

void read_adversary(const json& j, Scenario& s, std::vector<std::string>& diag) {
    Reader r(j, "adversary", diag);
    std::string name = "none";
    r.get("strategy", name);
    if (auto k = parse_strategy(name))
        s.adversary.kind = *k;
    else
        diag.push_back("adversary.strategy: unknown strategy '" + name + "'");
    if (const auto* o = r.child("options")) {
        Reader opt(*o, "adversary.options", diag);
        s.adversary.agg_to = to_set(read_ids(opt.child("agg_to"), opt.at("agg_to"), diag));
        s.adversary.echo_to = to_set(read_ids(opt.child("echo_to"), opt.at("echo_to"), diag));
        s.adversary.ready_to = to_set(read_ids(opt.child("ready_to"), opt.at("ready_to"), diag));
        opt.get("max_replays", s.adversary.max_replays);
        opt.get("old_size", s.adversary.old_size);
    }
}

void read_timing(const json& j, Scenario& s, std::vector<std::string>& diag) {
    Reader r(j, "timing", diag);
    r.get("gst", s.timing.gst);
    r.get("delta", s.timing.delta);
    r.get("pre_gst_max", s.timing.pre_gst_max);
    if (const auto* links = r.child("link_delays")) {
        if (!links->is_array()) diag.push_back("timing.link_delays: expected an array");
        for (const auto& l : links->is_array() ? *links : json::array()) {
            Reader lr(l, "timing.link_delays[]", diag);
            LinkDelay d;
            lr.get("from", d.from.value);
            lr.get("to", d.to.value);
            lr.get("from_time", d.from_time);
            lr.get("until", d.until);
            lr.get("delay", d.delay);
            s.timing.link_delays.push_back(d);
        }
    }
}

void read_protocol(const json& j, Scenario& s, std::vector<std::string>& diag) {
    Reader r(j, "protocol", diag);
    auto& p = s.params;
    r.get("batch_size", p.batch_size);
    r.get("alpha", p.alpha);
    r.get("tob_timeout", p.tob_timeout);
    r.get("brd_timeout", p.brd_timeout);
    r.get("remote_timeout", p.remote_timeout);
    r.get("epsilon", p.epsilon);
    r.get("client_timeout", p.client_timeout);
    r.get("fill_timeout", p.fill_timeout);
    r.get("disable_rcn_check", p.disable_rcn_check);
    r.get("min_rounds", s.min_rounds);
}

void read_workload(const json& j, Scenario& s, std::vector<std::string>& diag) {
    Reader r(j, "workload", diag);
    auto& w = s.workload;
    r.get("txns", w.txns);
    r.get("read_ratio", w.read_ratio);
    r.get("keys", w.keys);
    r.get("skew", w.skew);
    r.get("start", w.start);
    r.get("interval", w.interval);
}

void read_reconfig(const json& j, Scenario& s, std::vector<std::string>& diag) {
    if (!j.is_array()) {
        diag.push_back("reconfig: expected an array");
        return;
    }
    for (const auto& e : j) {
        Reader r(e, "reconfig[]", diag);
        ReconfigEvent ev;
        if (r.has("time")) {
            SimTime t = 0;
            r.get("time", t);
            ev.time = t;
        }
        if (r.has("round")) {
            Round rd = 0;
            r.get("round", rd);
            ev.round = rd;
        }
        r.get("subject", ev.subject.value);
        std::string op;
        r.get("op", op);
        if (op == "join")
            ev.kind = ReconfigKind::Join;
        else if (op == "leave")
            ev.kind = ReconfigKind::Leave;
        else
            diag.push_back("reconfig[].op: expected join or leave");
        r.get("cluster", ev.cluster.index);
        ev.contacts = read_ids(r.child("contacts"), r.at("contacts"), diag);
        s.reconfig.push_back(ev);
    }
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> diagnostics)
    : std::runtime_error("invalid scenario: " + join_lines(diagnostics)), diagnostics_(std::move(diagnostics)) {}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(std::string_view text) {
    const auto parse = [&](std::string_view part) {
        if (part.empty() || part.find_first_not_of("0123456789") != std::string_view::npos)
            throw ScenarioError({"seeds: expected 'a..b' or an integer, got '" + std::string(text) + "'"});
        return std::stoull(std::string(part));
    };
    const auto dots = text.find("..");
    if (dots == std::string_view::npos) {
        const auto v = parse(text);
        return {v, v};
    }
    const auto lo = parse(text.substr(0, dots));
    const auto hi = parse(text.substr(dots + 2));
    if (lo > hi) throw ScenarioError({"seeds: empty range '" + std::string(text) + "'"});
    return {lo, hi};
}

Scenario parse_scenario(const json& doc) {
    std::vector<std::string> diag;
    Scenario s;
    {
        Reader top(doc, "scenario", diag);
        int schema = 0;
        top.get("schema", schema);
        if (schema != kScenarioSchema)
            diag.push_back("schema: expected " + std::to_string(kScenarioSchema) + ", got " + std::to_string(schema));
        top.get("name", s.name);

        std::map<ClusterId, std::set<ReplicaId>> members;
        if (const auto* cl = top.child("clusters"); cl && cl->is_array() && !cl->empty()) {
            std::set<ReplicaId> explicit_ids;
            std::vector<std::pair<std::size_t, std::vector<ReplicaId>>> specs;
            for (const auto& c : *cl) {
                Reader cr(c, "clusters[]", diag);
                std::size_t size = 0;
                cr.get("size", size);
                auto ids = read_ids(cr.child("members"), cr.at("members"), diag);
                if (!ids.empty() && size != 0 && size != ids.size())
                    diag.push_back("clusters[]: size disagrees with members");
                for (auto id : ids) explicit_ids.insert(id);
                specs.emplace_back(size, std::move(ids));
            }
            std::uint64_t next = 1;
            for (std::size_t i = 0; i < specs.size(); ++i) {
                auto& m = members[ClusterId{static_cast<std::uint32_t>(i)}];
                for (auto id : specs[i].second) m.insert(id);
                for (std::size_t k = 0; specs[i].second.empty() && k < specs[i].first; ++k) {
                    while (explicit_ids.count(ReplicaId{next})) ++next;
                    m.insert(ReplicaId{next++});
                }
            }
        } else {
            diag.push_back("clusters: expected a non-empty array");
        }
        s.initial = Configuration(members, 1);

        s.byzantine = to_set(read_ids(top.child("byzantine"), "byzantine", diag));
        s.adversary.nodes.assign(s.byzantine.begin(), s.byzantine.end());
        if (const auto* a = top.child("adversary")) read_adversary(*a, s, diag);
        if (const auto* t = top.child("timing")) read_timing(*t, s, diag);
        if (const auto* p = top.child("protocol")) read_protocol(*p, s, diag);
        if (const auto* w = top.child("workload")) read_workload(*w, s, diag);
        if (const auto* rc = top.child("reconfig")) read_reconfig(*rc, s, diag);
        if (const auto* sv = top.child("stale_view")) {
            Reader r(*sv, "stale_view", diag);
            ReplicaId node;
            ClusterId c;
            r.get("node", node.value);
            r.get("cluster", c.index);
            s.stale_view = std::make_pair(node, c);
        }
        if (const auto* seeds = top.child("seeds")) {
            try {
                if (positive_integer(*seeds))
                    s.seed_lo = s.seed_hi = seeds->get<std::uint64_t>();
                else if (seeds->is_string())
                    std::tie(s.seed_lo, s.seed_hi) = parse_seed_range(seeds->get<std::string>());
                else
                    diag.push_back("seeds: expected 'a..b' or an integer");
            } catch (const ScenarioError& e) {
                diag.insert(diag.end(), e.diagnostics().begin(), e.diagnostics().end());
            }
        }
        top.get("horizon", s.horizon);
        top.get("max_events", s.max_events);
    }
    if (!diag.empty()) throw ScenarioError(diag);
    validate_scenario(s);
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError({path + ": cannot open"});
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ScenarioError({path + ": " + e.what()});
    }
    return parse_scenario(doc);
}

void validate_scenario(const Scenario& s) {
    std::vector<std::string> diag;
    try {
        s.initial.validate();
    } catch (const ConfigurationError& e) {
        diag.push_back(std::string("clusters: ") + e.what());
    }
    if (s.initial.cluster_count() == 0) diag.push_back("clusters: no clusters");
    if (s.timing.delta == 0) diag.push_back("timing.delta: must be positive");
    if (s.timing.pre_gst_max == 0) diag.push_back("timing.pre_gst_max: must be positive");
    if (s.params.batch_size == 0) diag.push_back("protocol.batch_size: must be positive");
    if (!(s.params.alpha > 0 && s.params.alpha <= 1)) diag.push_back("protocol.alpha: must be in (0, 1]");
    if (s.workload.read_ratio < 0 || s.workload.read_ratio > 1) diag.push_back("workload.read_ratio: must be in [0, 1]");
    if (s.workload.keys == 0) diag.push_back("workload.keys: must be positive");
    if (s.workload.skew < 0) diag.push_back("workload.skew: must be non-negative");
    if (s.horizon == 0) diag.push_back("horizon: must be positive");
    if (s.adversary.kind != StrategyKind::None && s.byzantine.empty())
        diag.push_back("adversary: strategy needs at least one byzantine replica");
    for (const auto& group : {s.adversary.agg_to, s.adversary.echo_to, s.adversary.ready_to})
        for (auto id : group)
            if (!s.initial.cluster_of(id)) diag.push_back("adversary.options: unknown replica " + to_string(id));

    // Walk the schedule, checking ids and the fault budget at every step.
    Configuration cfg = s.initial;
    const auto check_budget = [&](const std::string& when) {
        std::map<ClusterId, std::size_t> used;
        for (auto id : s.byzantine)
            if (auto home = cfg.cluster_of(id)) ++used[*home];
        for (const auto& [c, n] : used)
            if (n > cfg.f(c))
                diag.push_back(when + ": " + std::to_string(n) + " byzantine replicas exceed f=" +
                               std::to_string(cfg.f(c)) + " of " + to_string(c));
    };
    for (auto id : s.byzantine)
        if (!s.initial.cluster_of(id)) diag.push_back("byzantine: " + to_string(id) + " is not an initial member");
    check_budget("initial configuration");
    for (std::size_t i = 0; i < s.reconfig.size(); ++i) {
        const auto& ev = s.reconfig[i];
        const std::string where = "reconfig[" + std::to_string(i) + "]";
        if (ev.time.has_value() == ev.round.has_value()) diag.push_back(where + ": give exactly one of time or round");
        if (!cfg.contains(ev.cluster)) {
            diag.push_back(where + ": unknown " + to_string(ev.cluster));
            continue;
        }
        if (s.byzantine.count(ev.subject)) diag.push_back(where + ": byzantine replicas do not reconfigure");
        if (ev.kind == ReconfigKind::Join) {
            if (ev.round) diag.push_back(where + ": joins are scheduled by time");
            if (cfg.cluster_of(ev.subject)) diag.push_back(where + ": " + to_string(ev.subject) + " is already a member");
            for (auto id : ev.contacts)
                if (!s.initial.cluster_of(id)) diag.push_back(where + ": contact " + to_string(id) + " is unknown");
            cfg.add(ev.cluster, ev.subject);
        } else {
            if (cfg.cluster_of(ev.subject) != ev.cluster) {
                diag.push_back(where + ": " + to_string(ev.subject) + " is not a member of " + to_string(ev.cluster));
                continue;
            }
            if (cfg.size(ev.cluster) == 1) {
                diag.push_back(where + ": leaving would empty " + to_string(ev.cluster));
                continue;
            }
            cfg.remove(ev.cluster, ev.subject);
        }
        check_budget(where);
    }
    if (s.stale_view) {
        const auto [node, c] = *s.stale_view;
        if (!s.initial.cluster_of(node) || s.byzantine.count(node))
            diag.push_back("stale_view.node: must be a correct initial member");
        if (!s.initial.contains(c)) diag.push_back("stale_view.cluster: unknown cluster");
    }
    if (!diag.empty()) throw ScenarioError(diag);
}

std::vector<GenTxn> gen_workload(const WorkloadSpec& spec, const std::vector<ReplicaId>& submitters,
                                 std::uint64_t seed) {
    std::vector<GenTxn> out;
    if (submitters.empty()) return out;
    std::mt19937_64 rng(seed ^ 0x5eed'f00d'cafe'0001ULL);
    out.reserve(spec.txns);
    for (std::size_t i = 0; i < spec.txns; ++i) {
        GenTxn t;
        t.at = spec.start + i * spec.interval;
        t.submitter = submitters[i % submitters.size()];
        t.kind = uniform_unit(rng) < spec.read_ratio ? TxnKind::Read : TxnKind::Write;
        const double u = uniform_unit(rng);
        t.key = std::min<std::uint64_t>(spec.keys - 1,
                                        static_cast<std::uint64_t>(std::pow(u, 1.0 + spec.skew) *
                                                                   static_cast<double>(spec.keys)));
        t.value = t.kind == TxnKind::Write ? uniform_u64(rng, 1, 1'000'000) : 0;
        out.push_back(t);
    }
    return out;
}

std::string_view topology_name(Topology t) {
    switch (t) {
        case Topology::Pair4x7: return "4+7";
        case Topology::Three4: return "4+4+4";
        case Topology::Mixed4_7_10: return "4+7+10";
    }
    return "?";
}

Scenario matrix_scenario(Topology t, StrategyKind k) {
    std::vector<std::size_t> sizes;
    switch (t) {
        case Topology::Pair4x7: sizes = {4, 7}; break;
        case Topology::Three4: sizes = {4, 4, 4}; break;
        case Topology::Mixed4_7_10: sizes = {4, 7, 10}; break;
    }
    Scenario s;
    s.name = std::string(topology_name(t)) + "/" + std::string(strategy_name(k));
    std::map<ClusterId, std::set<ReplicaId>> members;
    std::uint64_t next = 1;
    for (std::size_t i = 0; i < sizes.size(); ++i)
        for (std::size_t n = 0; n < sizes[i]; ++n) members[ClusterId{static_cast<std::uint32_t>(i)}].insert(ReplicaId{next++});
    s.initial = Configuration(members, 1);

    s.timing.gst = 200;
    s.timing.delta = 10;
    s.timing.pre_gst_max = 40;
    s.min_rounds = 2;
    s.workload = WorkloadSpec{static_cast<std::size_t>(4 * sizes.size()), 0.85, 32, 1.0, 1, 5};
    s.horizon = 60000;

    // Cluster 1 gains a replica; the last cluster loses its largest member.
    const ClusterId last{static_cast<std::uint32_t>(sizes.size() - 1)};
    s.reconfig.push_back(ReconfigEvent{SimTime{30}, std::nullopt, ReplicaId{next++}, ReconfigKind::Join, ClusterId{1}, {}});
    s.reconfig.push_back(
        ReconfigEvent{std::nullopt, Round{2}, *members[last].rbegin(), ReconfigKind::Leave, last, {}});

    if (k == StrategyKind::None) return s;
    // Replica 2 is the first leader of cluster 0.
    s.byzantine = {ReplicaId{2}};
    s.adversary.kind = k;
    s.adversary.nodes = {ReplicaId{2}};
    switch (k) {
        case StrategyKind::BrdPartialLeader:
            s.adversary.agg_to = {ReplicaId{1}, ReplicaId{4}};
            s.adversary.echo_to = {ReplicaId{1}, ReplicaId{4}};
            s.adversary.ready_to = {ReplicaId{1}};
            break;
        case StrategyKind::ComplaintReplay:
            s.adversary.max_replays = 4;
            break;
        case StrategyKind::StaleViewForgery:
            s.adversary.old_size = 4;
            for (int i = 0; i < 3; ++i)
                s.reconfig.push_back(
                    ReconfigEvent{SimTime{30}, std::nullopt, ReplicaId{next++}, ReconfigKind::Join, ClusterId{0}, {}});
            break;
        default:
            break;
    }
    return s;
}

}  // namespace hamava
