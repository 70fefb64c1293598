// Command-line driver: run, sweep, check and report.

#include "hamava/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace hamava;

namespace {

constexpr const char* kScenarioDirEnv = "HAMAVA_SCENARIO_DIR";
constexpr const char* kBuiltinPrefix = "builtin:";

/// "builtin:<topology>/<strategy>" names a matrix scenario; other values are
/// paths, looked up in $HAMAVA_SCENARIO_DIR when not found as given.
Scenario resolve_scenario(const std::string& ref) {
    if (ref.rfind(kBuiltinPrefix, 0) == 0) {
        const std::string rest = ref.substr(std::string(kBuiltinPrefix).size());
        const auto slash = rest.find('/');
        const std::string topo = rest.substr(0, slash);
        const auto strategy = parse_strategy(slash == std::string::npos ? "none" : rest.substr(slash + 1));
        for (auto t : kTopologies)
            if (topology_name(t) == topo && strategy) return matrix_scenario(t, *strategy);
        throw ScenarioError({"unknown builtin scenario '" + ref + "'"});
    }
    namespace fs = std::filesystem;
    fs::path p(ref);
    if (!fs::exists(p) && p.is_relative())
        if (const char* dir = std::getenv(kScenarioDirEnv)) {
            fs::path alt = fs::path(dir) / p;
            if (fs::exists(alt)) p = alt;
            else if (fs::exists(alt.string() + ".json")) p = alt.string() + ".json";
        }
    return load_scenario(p.string());
}

Trace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    return Trace::parse(in);
}

void write_report(const std::string& path, const CheckReport& check, const Metrics& metrics) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot write");
    for (const auto& rec : report_records(check, metrics)) out << rec.dump() << '\n';
}

void print_check(const CheckReport& check) {
    for (const auto& r : check.results) {
        std::printf("%-22s %-8s %s", r.name.c_str(), r.safety ? "safety" : "liveness", r.ok ? "ok" : "FAIL");
        if (!r.ok) std::printf("  at record %zu: %s", r.first.value_or(0), r.detail.c_str());
        std::printf("\n");
    }
}

void print_metrics(const Metrics& m) {
    std::printf("%6s %6s %8s %8s %8s %6s %6s %6s %6s %8s %9s %9s\n", "round", "ops", "latency", "global", "local",
                "tob", "brd", "inter", "local*", "catch_up", "complaint", "reconfig");
    for (const auto& rm : m.rounds) {
        const auto cat = [&](const char* k) {
            auto it = rm.by_category.find(k);
            return it == rm.by_category.end() ? std::uint64_t{0} : it->second;
        };
        std::printf("%6llu %6llu %8llu %8llu %8llu %6llu %6llu %6llu %6llu %8llu %9llu %9llu\n",
                    (unsigned long long)rm.r, (unsigned long long)rm.ops, (unsigned long long)rm.latency,
                    (unsigned long long)rm.global, (unsigned long long)rm.local, (unsigned long long)cat("tob"),
                    (unsigned long long)cat("brd"), (unsigned long long)cat("inter"),
                    (unsigned long long)cat("local"), (unsigned long long)cat("catch_up"),
                    (unsigned long long)(cat("complaint") + cat("election")), (unsigned long long)cat("reconfig"));
    }
    std::printf("messages %llu (global %llu, local %llu) in %llu send records; leader changes %llu\n",
                (unsigned long long)m.messages, (unsigned long long)m.global, (unsigned long long)m.local,
                (unsigned long long)m.send_records, (unsigned long long)m.leader_changes);
    for (const auto& rc : m.reconfigs)
        std::printf("reconfig %s n%llu requested r%llu installed %s\n", rc.kind.c_str(),
                    (unsigned long long)rc.subject.value, (unsigned long long)rc.requested,
                    rc.installed ? ("r" + std::to_string(*rc.installed)).c_str() : "never");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clustered BFT replication simulator"};
    app.require_subcommand(1);

    std::string scenario_ref, trace_path, report_path, seeds;
    std::uint64_t seed = 0;
    std::uint64_t max_events = 0;

    auto* run = app.add_subcommand("run", "Run one scenario with one seed");
    run->add_option("--scenario", scenario_ref, "Scenario file or builtin:<topology>/<strategy>")->required();
    run->add_option("--seed", seed, "Seed (defaults to the scenario's first seed)");
    run->add_option("--trace", trace_path, "Write the trace here");
    run->add_option("--report", report_path, "Write JSON-lines invariant and metric records here");
    run->add_option("--max-events", max_events, "Event budget");

    auto* sweep = app.add_subcommand("sweep", "Run a scenario over a seed range and check every run");
    sweep->add_option("--scenario", scenario_ref, "Scenario file or builtin:<topology>/<strategy>")->required();
    sweep->add_option("--seeds", seeds, "Seed range a..b (defaults to the scenario's)");
    sweep->add_option("--report", report_path, "Write per-seed JSON-lines records here");
    sweep->add_option("--max-events", max_events, "Event budget per run");

    auto* check = app.add_subcommand("check", "Check invariants over a saved trace");
    check->add_option("--trace", trace_path, "Trace file")->required();
    check->add_option("--report", report_path, "Write JSON-lines records here");

    auto* report = app.add_subcommand("report", "Print metric tables for a saved trace");
    report->add_option("--trace", trace_path, "Trace file")->required();
    report->add_option("--report", report_path, "Write JSON-lines records here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            Scenario s = resolve_scenario(scenario_ref);
            if (max_events) s.max_events = max_events;
            const std::uint64_t use_seed = run->count("--seed") ? seed : s.seed_lo;
            auto result = run_scenario(s, use_seed);
            if (!trace_path.empty()) {
                std::ofstream out(trace_path);
                result.trace.write(out);
            }
            const auto c = check_invariants(result.trace);
            const auto m = count_messages(result.trace);
            write_report(report_path, c, m);
            std::printf("scenario %s seed %llu: %llu events, trace digest %016llx\n", s.name.c_str(),
                        (unsigned long long)use_seed, (unsigned long long)result.stats.events,
                        (unsigned long long)result.trace.digest());
            print_check(c);
            return c.ok() ? 0 : 1;
        }
        if (sweep->parsed()) {
            Scenario s = resolve_scenario(scenario_ref);
            if (max_events) s.max_events = max_events;
            auto [lo, hi] = seeds.empty() ? std::pair{s.seed_lo, s.seed_hi} : parse_seed_range(seeds);
            std::ofstream out;
            if (!report_path.empty()) out.open(report_path);
            std::uint64_t failed = 0;
            for (std::uint64_t sd = lo; sd <= hi; ++sd) {
                auto result = run_scenario(s, sd);
                const auto c = check_invariants(result.trace);
                if (out.is_open())
                    for (auto rec : report_records(c, count_messages(result.trace))) {
                        rec["seed"] = sd;
                        out << rec.dump() << '\n';
                    }
                if (c.ok()) continue;
                ++failed;
                for (const auto& r : c.results)
                    if (!r.ok) std::printf("seed %llu: %s failed: %s\n", (unsigned long long)sd, r.name.c_str(), r.detail.c_str());
            }
            std::printf("scenario %s seeds %llu..%llu: %llu failed\n", s.name.c_str(), (unsigned long long)lo,
                        (unsigned long long)hi, (unsigned long long)failed);
            return failed ? 1 : 0;
        }
        const Trace t = read_trace(trace_path);
        const auto c = check_invariants(t);
        const auto m = count_messages(t);
        write_report(report_path, c, m);
        if (check->parsed()) {
            print_check(c);
            return c.ok() ? 0 : 1;
        }
        print_metrics(m);
        return 0;
    } catch (const ScenarioError& e) {
        for (const auto& d : e.diagnostics()) std::fprintf(stderr, "error: %s\n", d.c_str());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
