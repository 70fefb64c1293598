#pragma once

#include "hamava/adversary.hpp"
#include "hamava/netsim.hpp"
#include "hamava/replica.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hamava {

inline constexpr int kScenarioSchema = 1;

struct WorkloadSpec {
    std::size_t txns = 0;
    double read_ratio = 0.85;
    std::uint64_t keys = 64;
    /// 0 is uniform; larger values concentrate draws on low keys.
    double skew = 1.0;
    SimTime start = 1;
    SimTime interval = 5;
};

struct ReconfigEvent {
    std::optional<SimTime> time;
    std::optional<Round> round;  ///< leaves only: requested once the subject reaches this round
    ReplicaId subject;
    ReconfigKind kind = ReconfigKind::Join;
    ClusterId cluster;
    std::vector<ReplicaId> contacts;  ///< joins; defaults to the target's initial members
};

struct Scenario {
    std::string name = "unnamed";
    Configuration initial;
    std::set<ReplicaId> byzantine;
    AdversaryPlan adversary;
    TimingModel timing;
    ProtocolParams params;
    Round min_rounds = 1;
    WorkloadSpec workload;
    std::vector<ReconfigEvent> reconfig;
    /// Test-only: this replica ignores membership changes of the cluster.
    std::optional<std::pair<ReplicaId, ClusterId>> stale_view;
    std::uint64_t seed_lo = 1;
    std::uint64_t seed_hi = 1;
    SimTime horizon = 100000;
    std::uint64_t max_events = 5'000'000;
};

class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(std::vector<std::string> diagnostics);
    const std::vector<std::string>& diagnostics() const { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

/// Parses and validates a scenario document. Throws ScenarioError listing
/// every problem found.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);
/// Schema checks, fault budget at every scheduled configuration, dangling ids.
void validate_scenario(const Scenario& s);

/// Parses "a..b" or "n".
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(std::string_view text);

struct GenTxn {
    SimTime at = 0;
    ReplicaId submitter;
    TxnKind kind = TxnKind::Read;
    std::uint64_t key = 0;
    std::uint64_t value = 0;
};

std::vector<GenTxn> gen_workload(const WorkloadSpec& spec, const std::vector<ReplicaId>& submitters,
                                 std::uint64_t seed);

struct RunResult {
    Trace trace;
    RunStats stats;
};

/// Called after the nodes are installed and before the run starts.
using RunSetup = std::function<void(Simulator&)>;

RunResult run_scenario(const Scenario& s, std::uint64_t seed, const RunSetup& setup = {});

struct InvariantResult {
    std::string name;
    bool safety = true;
    bool ok = true;
    std::optional<std::size_t> first;  ///< index of the first violating record
    std::string detail;
};

struct CheckReport {
    std::vector<InvariantResult> results;
    bool ok() const;
    bool safety_ok() const;
    bool liveness_ok() const;
    const InvariantResult* find(std::string_view name) const;
};

CheckReport check_invariants(const Trace& trace);

struct RoundMetrics {
    Round r = 0;
    std::uint64_t ops = 0;
    SimTime completed_at = 0;
    SimTime latency = 0;
    std::uint64_t global = 0;
    std::uint64_t local = 0;
    std::map<std::string, std::uint64_t> by_category;
};

struct ReconfigCompletion {
    ReplicaId subject;
    std::string kind;
    Round requested = 0;
    std::optional<Round> installed;
};

struct Metrics {
    std::vector<RoundMetrics> rounds;
    std::uint64_t global = 0;
    std::uint64_t local = 0;
    std::uint64_t send_records = 0;
    std::uint64_t messages = 0;
    std::uint64_t leader_changes = 0;
    std::vector<ReconfigCompletion> reconfigs;
    const RoundMetrics* round(Round r) const;
};

Metrics count_messages(const Trace& trace);

/// One JSON object per invariant and per metric.
std::vector<nlohmann::json> report_records(const CheckReport& check, const Metrics& metrics);

// Standard matrix used by the acceptance runs.

enum class Topology { Pair4x7, Three4, Mixed4_7_10 };
inline constexpr Topology kTopologies[] = {Topology::Pair4x7, Topology::Three4, Topology::Mixed4_7_10};
inline constexpr StrategyKind kStrategies[] = {StrategyKind::None, StrategyKind::SilentLeader,
                                               StrategyKind::BrdPartialLeader, StrategyKind::ComplaintReplay,
                                               StrategyKind::StaleViewForgery};

std::string_view topology_name(Topology t);
Scenario matrix_scenario(Topology t, StrategyKind k);

}  // namespace hamava
