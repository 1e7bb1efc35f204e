#pragma once

#include "coassign/geometry.hpp"
#include "coassign/parallel.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coassign {

class SecurityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Waypoints q_1..q_T; waypoint(t) is 1-based.
class ReferenceTrajectory {
public:
    ReferenceTrajectory() = default;
    ReferenceTrajectory(std::vector<Point2> waypoints, double timestep_duration);

    int horizon() const { return static_cast<int>(waypoints_.size()); }
    const Point2& waypoint(int t) const;
    const std::vector<Point2>& waypoints() const { return waypoints_; }
    double timestep_duration() const { return dt_; }

    // Throws unless every hop is at most v_max * timestep_duration.
    void check_followable(double v_max) const;

private:
    std::vector<Point2> waypoints_;
    double dt_ = 1.0;
};

struct ForbiddenSet {
    std::vector<ConvexPolygon> regions;

    bool empty() const { return regions.empty(); }
    bool contains(const Point2& p) const;
};

struct CoObservation {
    int time = 0;
    Point2 location;
    int partner_team = 0;
    double r1 = 0.0;
    double r2 = 0.0;
};

// Validated on construction: times strictly increasing, radii positive.
class CoObservationSchedule {
public:
    CoObservationSchedule() = default;
    explicit CoObservationSchedule(std::vector<CoObservation> entries);

    const std::vector<CoObservation>& entries() const { return entries_; }

private:
    std::vector<CoObservation> entries_;
};

enum class TaskStatus { Unassigned, Admissible, Assigned, Fulfilled, Abandoned, Rejected };

std::string to_string(TaskStatus s);
bool transition_allowed(TaskStatus from, TaskStatus to);

struct OnlineTask {
    int id = 0;
    int appear_time = 0;
    Point2 location;
    int team = 0;
    TaskStatus status = TaskStatus::Unassigned;
    int agent = -1;
    int regroup_time = 0;

    // Throws SecurityError on a transition outside the status machine.
    void advance(TaskStatus next);
};

// Deviating from x1 at step t1 and rejoining at x2 at step t2 stays clear of
// every forbidden region.
bool deviation_secured(const Point2& x1, int t1, const Point2& x2, int t2, const ForbiddenSet& F, double v_max,
                       double timestep_duration = 1.0);

// entries[t - 1] = latest secured regroup step from waypoint t; t_r == t
// means no deviation is secured from t.
class RegroupLookupTable {
public:
    RegroupLookupTable() = default;
    explicit RegroupLookupTable(std::vector<int> entries) : entries_(std::move(entries)) {}

    int horizon() const { return static_cast<int>(entries_.size()); }
    int at(int t) const;
    const std::vector<int>& entries() const { return entries_; }

    bool operator==(const RegroupLookupTable&) const = default;

private:
    std::vector<int> entries_;
};

RegroupLookupTable build_lookup_table(const ReferenceTrajectory& traj, const ForbiddenSet& F, double v_max,
                                      Exec exec = Exec::Serial);

void write_lookup_csv(std::ostream& os, const RegroupLookupTable& table);

// t_r when the task fits inside the deviation ellipse from (q_t, t) to
// (q_{t_r}, t_r); otherwise none.
std::optional<int> online_task_admissible(const Point2& location, int appear_time, int t,
                                          const RegroupLookupTable& table, const ReferenceTrajectory& traj,
                                          double v_max);

}  // namespace coassign
