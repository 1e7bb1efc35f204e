#pragma once

#include "coassign/assignment.hpp"
#include "coassign/control.hpp"
#include "coassign/geometry.hpp"
#include "coassign/security.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace coassign {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed JSON.
class ParseError : public ScenarioError {
public:
    using ScenarioError::ScenarioError;
};

// Missing, unknown, or mistyped field.
class SchemaError : public ScenarioError {
public:
    using ScenarioError::ScenarioError;
};

// Well-formed but violates a domain invariant.
class InvariantError : public ScenarioError {
public:
    using ScenarioError::ScenarioError;
};

struct Workspace {
    Point2 lo;
    Point2 hi;

    double diameter() const { return distance(lo, hi); }
    bool contains(const Point2& p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
    Point2 clamp(const Point2& p) const;
};

struct TeamSpec {
    int id = 0;
    std::vector<Point2> agents;  // start positions
    ReferenceTrajectory trajectory;
    std::vector<std::pair<AgentIndex, AgentIndex>> edges;  // local indices; empty means complete

    CommGraph graph() const;
};

struct CoObservationSpec {
    int time = 0;
    int team_a = 0;
    int team_b = 0;
    Point2 location;
    double r1 = 0.0;
    double r2 = 0.0;
};

struct MissionParams {
    double fulfill_radius = 0.1;
    double tube_radius = 0.3;
    double regroup_radius = 0.5;
    // Barriers aim this fraction of the checked radius to leave a margin.
    double barrier_radius_fraction = 0.8;
    double obstacle_margin = 0.05;
    double collision_range = 1.0;
};

struct Scenario {
    std::string name;
    Workspace workspace;
    std::vector<ConvexPolygon> obstacles;
    ForbiddenSet forbidden;
    std::vector<TeamSpec> teams;
    std::vector<CoObservationSpec> co_observations;
    std::vector<OnlineTask> online_tasks;
    double v_max = 0.5;
    int T = 20;
    double timestep_duration = 1.0;
    double dt = 0.01;
    AdmmConfig admm;
    ControlConfig control;
    MissionParams mission;
    std::uint64_t seed = 0;

    std::size_t agent_count() const;
    const TeamSpec& team(int id) const;
    CoObservationSchedule schedule_for(int team_id) const;
};

Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");
Scenario load_scenario(const std::string& path);

// Checks the cross-field invariants; parse_scenario already calls it.
void validate_scenario(const Scenario& s);

}  // namespace coassign
