#include "coassign/verify.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <map>

namespace coassign {

bool VerificationReport::passed() const
{
    for (const auto& c : checks)
        if (!c.pass)
            return false;
    return true;
}

std::string VerificationReport::str() const
{
    std::string out;
    for (const auto& c : checks) {
        out += fmt::format("{} {}", c.name, c.pass ? "pass" : "FAIL");
        if (!c.pass) {
            if (c.first_time)
                out += fmt::format(" t={}", *c.first_time);
            if (c.agent)
                out += fmt::format(" agent={}", *c.agent);
            if (!c.detail.empty())
                out += " " + c.detail;
        }
        out += '\n';
    }
    return out;
}

namespace {

const TraceSample* sample_at(const AgentTrace& tr, double t, double dt)
{
    const auto idx = static_cast<long>(std::llround(t / dt));
    if (idx >= 0 && idx < static_cast<long>(tr.samples.size())
        && std::abs(tr.samples[static_cast<std::size_t>(idx)].t - t) <= 0.5 * dt)
        return &tr.samples[static_cast<std::size_t>(idx)];
    for (const auto& s : tr.samples)
        if (std::abs(s.t - t) <= 0.5 * dt)
            return &s;
    return nullptr;
}

std::optional<int> parse_tr(const std::string& detail)
{
    if (detail.rfind("t_r=", 0) != 0)
        return std::nullopt;
    try {
        return std::stoi(detail.substr(4));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void fail(CheckResult& c, double t, std::optional<int> agent, std::string detail)
{
    if (!c.pass && c.first_time && *c.first_time <= t)
        return;
    c.pass = false;
    c.first_time = t;
    c.agent = agent;
    c.detail = std::move(detail);
}

}  // namespace

VerificationReport verify_log(const EventLog& log, const std::vector<AgentTrace>& traces, const Scenario& s)
{
    auto named = [](const char* name) {
        CheckResult c;
        c.name = name;
        return c;
    };
    CheckResult v1 = named("V1"), v2 = named("V2"), v3 = named("V3"), v4 = named("V4"), v5 = named("V5");
    const double dt = s.dt;
    const double step = s.timestep_duration;

    for (const auto& tr : traces)
        for (const auto& smp : tr.samples)
            if (s.forbidden.contains(smp.x)) {
                fail(v1, smp.t, tr.agent, "inside forbidden region");
                break;
            }

    for (int k = 1; k <= s.T && v2.pass; ++k) {
        for (const auto& team : s.teams) {
            const Point2 q = team.trajectory.waypoint(k);
            bool ok = false;
            std::optional<int> closest;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& tr : traces) {
                if (tr.team != team.id)
                    continue;
                const TraceSample* smp = sample_at(tr, k * step, dt);
                if (!smp)
                    continue;
                const double d = distance(smp->x, q);
                if (d < best) {
                    best = d;
                    closest = tr.agent;
                }
                ok = ok || d <= s.mission.tube_radius;
            }
            if (!ok) {
                fail(v2, k * step, closest, fmt::format("team {} off its reference (closest {:.4f})", team.id, best));
                break;
            }
        }
    }

    for (const auto& c : s.co_observations) {
        const double t = c.time * step;
        std::vector<Point2> a;
        std::vector<Point2> b;
        for (const auto& tr : traces) {
            const TraceSample* smp = sample_at(tr, t, dt);
            if (!smp || distance(smp->x, c.location) > c.r1)
                continue;
            if (tr.team == c.team_a)
                a.push_back(smp->x);
            else if (tr.team == c.team_b)
                b.push_back(smp->x);
        }
        bool ok = false;
        for (const auto& p : a)
            for (const auto& q : b)
                ok = ok || distance(p, q) <= 2.0 * c.r1;
        if (!ok)
            fail(v3, t, std::nullopt, fmt::format("co-observation of teams {}-{} not met", c.team_a, c.team_b));
    }

    std::map<int, const OnlineTask*> tasks;
    for (const auto& o : s.online_tasks)
        tasks[o.id] = &o;
    std::map<int, std::optional<int>> latest_tr;  // task -> t_r of the standing admissibility, if any
    for (const auto& e : log) {
        if (!e.task)
            continue;
        const int id = *e.task;
        if (e.kind == "task-admissible") {
            latest_tr[id] = parse_tr(e.detail);
        } else if (e.kind == "task-inadmissible") {
            latest_tr[id] = std::nullopt;
        } else if (e.kind == "task-assigned") {
            const auto it = latest_tr.find(id);
            const int k = static_cast<int>(std::llround(e.t / step));
            const bool valid = it != latest_tr.end() && it->second && *it->second > k && *it->second <= s.T;
            if (!valid) {
                fail(v5, e.t, e.agent, fmt::format("task {} assigned without a valid admissibility", id));
                continue;
            }
            if (!e.agent)
                continue;
            const int tr_step = *it->second;
            const auto assigned_tr = parse_tr(e.detail);
            if (assigned_tr && *assigned_tr != tr_step)
                fail(v5, e.t, e.agent, fmt::format("task {} assigned with t_r {} but admitted with {}", id,
                                                   *assigned_tr, tr_step));
            const auto agent = static_cast<std::size_t>(*e.agent);
            if (agent >= traces.size() || !tasks.count(id)) {
                fail(v4, e.t, e.agent, fmt::format("task {} assigned to an unknown agent", id));
                continue;
            }
            const auto& team = s.team(traces[agent].team);
            const TraceSample* smp = sample_at(traces[agent], tr_step * step, dt);
            if (!smp || distance(smp->x, team.trajectory.waypoint(tr_step)) > s.mission.regroup_radius)
                fail(v4, tr_step * step, e.agent, fmt::format("agent did not regroup after task {}", id));
        }
    }

    return {{v1, v2, v3, v4, v5}};
}

}  // namespace coassign
