#include "coassign/security.hpp"

#include <cmath>
#include <ostream>

namespace coassign {

ReferenceTrajectory::ReferenceTrajectory(std::vector<Point2> waypoints, double timestep_duration)
    : waypoints_(std::move(waypoints)), dt_(timestep_duration)
{
    if (waypoints_.empty())
        throw SecurityError("reference trajectory has no waypoints");
    if (!(dt_ > 0.0) || !std::isfinite(dt_))
        throw SecurityError("timestep duration must be positive");
    for (const auto& q : waypoints_)
        if (!std::isfinite(q.x) || !std::isfinite(q.y))
            throw SecurityError("reference trajectory has a non-finite waypoint");
}

const Point2& ReferenceTrajectory::waypoint(int t) const
{
    if (t < 1 || t > horizon())
        throw SecurityError("waypoint index " + std::to_string(t) + " outside 1.." + std::to_string(horizon()));
    return waypoints_[static_cast<std::size_t>(t - 1)];
}

void ReferenceTrajectory::check_followable(double v_max) const
{
    for (int t = 1; t < horizon(); ++t) {
        const double hop = distance(waypoint(t), waypoint(t + 1));
        if (hop > v_max * dt_ + 1e-9)
            throw SecurityError("waypoints " + std::to_string(t) + " and " + std::to_string(t + 1)
                                + " are farther apart than one step at v_max");
    }
}

bool ForbiddenSet::contains(const Point2& p) const
{
    for (const auto& r : regions)
        if (point_in_polygon(p, r))
            return true;
    return false;
}

CoObservationSchedule::CoObservationSchedule(std::vector<CoObservation> entries) : entries_(std::move(entries))
{
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!(entries_[i].r1 > 0.0) || !(entries_[i].r2 > 0.0))
            throw SecurityError("co-observation radii must be positive");
        if (i > 0 && entries_[i].time <= entries_[i - 1].time)
            throw SecurityError("co-observation times must be strictly increasing");
    }
}

std::string to_string(TaskStatus s)
{
    switch (s) {
    case TaskStatus::Unassigned: return "unassigned";
    case TaskStatus::Admissible: return "admissible";
    case TaskStatus::Assigned: return "assigned";
    case TaskStatus::Fulfilled: return "fulfilled";
    case TaskStatus::Abandoned: return "abandoned";
    case TaskStatus::Rejected: return "rejected";
    }
    return "?";
}

bool transition_allowed(TaskStatus from, TaskStatus to)
{
    using S = TaskStatus;
    switch (from) {
    case S::Unassigned: return to == S::Admissible || to == S::Rejected;
    case S::Admissible: return to == S::Assigned || to == S::Unassigned || to == S::Rejected;
    case S::Assigned: return to == S::Fulfilled || to == S::Abandoned;
    default: return false;
    }
}

void OnlineTask::advance(TaskStatus next)
{
    if (!transition_allowed(status, next))
        throw SecurityError("task " + std::to_string(id) + ": illegal transition " + to_string(status) + " -> "
                            + to_string(next));
    status = next;
}

bool deviation_secured(const Point2& x1, int t1, const Point2& x2, int t2, const ForbiddenSet& F, double v_max,
                       double timestep_duration)
{
    if (t2 <= t1)
        throw SecurityError("deviation must rejoin after it starts");
    const double two_a = v_max * (t2 - t1) * timestep_duration;
    if (two_a < distance(x1, x2) - kBoundaryTol)
        throw SecurityError("rejoin point is out of reach in the available time");
    const FocalEllipse e(x1, x2, two_a);
    for (const auto& r : F.regions)
        if (ellipse_intersects_polygon(e, r))
            return false;
    return true;
}

int RegroupLookupTable::at(int t) const
{
    if (t < 1 || t > horizon())
        throw SecurityError("lookup step " + std::to_string(t) + " outside 1.." + std::to_string(horizon()));
    return entries_[static_cast<std::size_t>(t - 1)];
}

namespace {

int latest_regroup(const ReferenceTrajectory& traj, const ForbiddenSet& F, double v_max, int i)
{
    const int T = traj.horizon();
    int j = i + 1;
    while (j <= T
           && deviation_secured(traj.waypoint(i), i, traj.waypoint(j), j, F, v_max, traj.timestep_duration()))
        ++j;
    return std::min(j - 1, T);
}

}  // namespace

RegroupLookupTable build_lookup_table(const ReferenceTrajectory& traj, const ForbiddenSet& F, double v_max,
                                      Exec exec)
{
    traj.check_followable(v_max);
    const int T = traj.horizon();
    std::vector<int> entries(static_cast<std::size_t>(T));
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int i = 1; i <= T; ++i)
            entries[static_cast<std::size_t>(i - 1)] = latest_regroup(traj, F, v_max, i);
    } else {
        for (int i = 1; i <= T; ++i)
            entries[static_cast<std::size_t>(i - 1)] = latest_regroup(traj, F, v_max, i);
    }
    return RegroupLookupTable(std::move(entries));
}

void write_lookup_csv(std::ostream& os, const RegroupLookupTable& table)
{
    os << "timestep,t_r\n";
    for (int t = 1; t <= table.horizon(); ++t)
        os << t << ',' << table.at(t) << '\n';
}

std::optional<int> online_task_admissible(const Point2& location, int appear_time, int t,
                                          const RegroupLookupTable& table, const ReferenceTrajectory& traj,
                                          double v_max)
{
    if (t < appear_time)
        throw SecurityError("admissibility queried before the task appeared");
    const int tr = table.at(t);
    if (tr <= t)
        return std::nullopt;
    const double reach = v_max * (tr - t) * traj.timestep_duration();
    const double focal = distance(traj.waypoint(t), location) + distance(traj.waypoint(tr), location);
    if (focal <= reach + kBoundaryTol)
        return tr;
    return std::nullopt;
}

}  // namespace coassign
