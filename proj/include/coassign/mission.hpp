#pragma once

#include "coassign/parallel.hpp"
#include "coassign/scenario.hpp"

#include <optional>
#include <string>
#include <vector>

namespace coassign {

struct Event {
    double t = 0.0;
    std::string kind;
    std::optional<int> agent;
    std::optional<int> task;
    std::string detail;

    bool operator==(const Event&) const = default;
};

using EventLog = std::vector<Event>;

struct TraceSample {
    double t = 0.0;
    Point2 x;
    std::string task;
    double alpha_p = 0.0;
    double alpha_sec = 0.0;
    std::vector<double> alpha_o;  // one per scenario online task, scenario order
};

struct AgentTrace {
    int agent = 0;
    int team = 0;
    std::vector<TraceSample> samples;
};

struct ControlRecord {
    double t = 0.0;
    int agent = 0;
    double u_x = 0.0;
    double u_y = 0.0;
    int active_barriers = 0;
    double min_h = 0.0;  // over enforced barriers; +inf when none
    std::string qp_status;
};

struct AssignmentEntry {
    double t = 0.0;
    int team = 0;
    std::string row;
    std::string column;
    double alpha = 0.0;
};

struct Metrics {
    int tasks_total = 0;
    int fulfilled = 0;
    int abandoned = 0;
    int rejected = 0;
    int admm_solves = 0;
    int admm_rounds = 0;
    int admm_nonconverged = 0;
    std::size_t messages = 0;
    int assignment_skips = 0;
    int filter_fallbacks = 0;
    double min_enforced_h = 0.0;
    double min_pair_distance = 0.0;
    std::uint64_t seed = 0;
};

struct MissionResult {
    std::vector<AgentTrace> traces;
    EventLog events;
    std::vector<ControlRecord> control;
    std::vector<AssignmentEntry> assignments;
    Metrics metrics;
};

// Global agent numbering follows team order, then start-position order.
struct AgentRef {
    int team = 0;
    std::size_t team_index = 0;
    std::size_t local = 0;
};
std::vector<AgentRef> agent_refs(const Scenario& s);

// Exec::Parallel evaluates the per-agent controllers of a tick concurrently;
// results are identical to the serial path.
MissionResult run_mission(const Scenario& s, Exec exec = Exec::Serial);

}  // namespace coassign
