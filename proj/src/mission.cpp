#include "coassign/mission.hpp"

#include "coassign/netsim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace coassign {

std::vector<AgentRef> agent_refs(const Scenario& s)
{
    std::vector<AgentRef> out;
    for (std::size_t ti = 0; ti < s.teams.size(); ++ti)
        for (std::size_t l = 0; l < s.teams[ti].agents.size(); ++l)
            out.push_back({s.teams[ti].id, ti, l});
    return out;
}

namespace {

constexpr double kEnforcedRelax = 1e-3;

struct AgentRt {
    AgentRef ref;
    int id = 0;
    Point2 x;
    TaskSet tasks;
    Eigen::VectorXd alpha;
    std::string label = "P";
    int committed = -1;  // index into Scenario::online_tasks
    bool fulfilled = false;
    int regroup_time = 0;
    bool inside_forbidden = false;
    std::optional<CbfInstance> coobs;
    int coobs_entry = -1;
    std::optional<CbfInstance> regroup;
};

struct TeamRt {
    std::vector<int> agents;
    CoObservationSchedule schedule;
    RegroupLookupTable table;
    std::optional<AdmmState> warm;
    std::vector<std::string> warm_rows;
    std::vector<std::string> warm_cols;
};

struct TickOut {
    Eigen::Vector2d u = Eigen::Vector2d::Zero();
    int active = 0;
    double min_h = std::numeric_limits<double>::infinity();
    std::string status;
    bool fallback = false;
};

// Secondary columns are interchangeable, so rounding only has to give P to
// exactly one real row, each online task to at most one row, and every other
// row a secondary column.
bool decisive(const std::vector<Eigen::Index>& rounding, const WeightMatrix& W, std::size_t secondary)
{
    const auto first_online = static_cast<Eigen::Index>(1 + secondary);
    std::vector<int> hits(W.cols.size(), 0);
    for (std::size_t i = 0; i < rounding.size(); ++i) {
        const Eigen::Index c = rounding[i];
        if (c == 0 && W.rows[i].kind != AgentKind::Real)
            return false;
        if (c == 0 || c >= first_online)
            ++hits[static_cast<std::size_t>(c)];
    }
    if (hits[0] != 1)
        return false;
    for (std::size_t c = static_cast<std::size_t>(first_online); c < hits.size(); ++c)
        if (hits[c] > 1)
            return false;
    return true;
}

class Mission {
public:
    Mission(const Scenario& s, Exec exec) : s_(s), exec_(exec)
    {
        ticks_per_step_ = static_cast<long>(std::llround(s_.timestep_duration / s_.dt));
        tasks_ = s_.online_tasks;
        const auto refs = agent_refs(s_);
        for (std::size_t g = 0; g < refs.size(); ++g) {
            AgentRt a;
            a.ref = refs[g];
            a.id = static_cast<int>(g);
            a.x = s_.teams[a.ref.team_index].agents[a.ref.local];
            agents_.push_back(std::move(a));
            out_.traces.push_back({static_cast<int>(g), refs[g].team, {}});
        }
        for (const auto& t : s_.teams) {
            TeamRt rt;
            rt.schedule = s_.schedule_for(t.id);
            rt.table = build_lookup_table(t.trajectory, s_.forbidden, s_.v_max);
            teams_.push_back(std::move(rt));
        }
        for (const auto& a : agents_)
            teams_[a.ref.team_index].agents.push_back(a.id);
        for (const auto& ob : s_.obstacles) {
            const Point2 c = ob.centroid();
            double r = 0.0;
            for (const auto& v : ob.vertices())
                r = std::max(r, distance(c, v));
            obstacle_barriers_.push_back(cbf_collision(c, r + s_.mission.obstacle_margin));
        }
        out_.metrics.tasks_total = static_cast<int>(tasks_.size());
        out_.metrics.seed = s_.seed;
        out_.metrics.min_enforced_h = std::numeric_limits<double>::infinity();
        out_.metrics.min_pair_distance = std::numeric_limits<double>::infinity();
    }

    MissionResult run()
    {
        for (int k = 0; k < s_.T; ++k) {
            if (k >= 1)
                checkpoints(k);
            admissibility(k);
            for (std::size_t ti = 0; ti < teams_.size(); ++ti)
                assign(k, ti);
            arm_barriers(k);
            for (long s = 0; s < ticks_per_step_; ++s)
                tick(k, k * ticks_per_step_ + s);
        }
        const double t_end = time_of_tick(s_.T * ticks_per_step_);
        for (auto& a : agents_)
            sample(a, t_end);
        checkpoints(s_.T);
        for (std::size_t j = 0; j < tasks_.size(); ++j) {
            auto& task = tasks_[j];
            if (task.status == TaskStatus::Unassigned || task.status == TaskStatus::Admissible) {
                const std::string why = task.status == TaskStatus::Unassigned ? "never admissible" : "unassigned";
                task.advance(TaskStatus::Rejected);
                log(t_end, "task-rejected", std::nullopt, task.id, why);
            }
        }
        for (const auto& task : tasks_) {
            out_.metrics.fulfilled += task.status == TaskStatus::Fulfilled;
            out_.metrics.abandoned += task.status == TaskStatus::Abandoned;
            out_.metrics.rejected += task.status == TaskStatus::Rejected;
        }
        return std::move(out_);
    }

private:
    double time_of_tick(long tick) const { return static_cast<double>(tick) * s_.dt; }
    double time_of_step(int k) const { return static_cast<double>(k) * s_.timestep_duration; }
    const ReferenceTrajectory& traj(const AgentRt& a) const { return s_.teams[a.ref.team_index].trajectory; }

    void log(double t, std::string kind, std::optional<int> agent, std::optional<int> task, std::string detail)
    {
        out_.events.push_back({t, std::move(kind), agent, task, std::move(detail)});
    }

    void checkpoints(int k)
    {
        const double t = time_of_step(k);
        for (const auto& c : s_.co_observations) {
            if (c.time != k)
                continue;
            std::vector<const AgentRt*> near_a;
            std::vector<const AgentRt*> near_b;
            for (const auto& a : agents_) {
                if (distance(a.x, c.location) > c.r1)
                    continue;
                if (a.ref.team == c.team_a)
                    near_a.push_back(&a);
                else if (a.ref.team == c.team_b)
                    near_b.push_back(&a);
            }
            bool ok = false;
            for (const auto* p : near_a)
                for (const auto* q : near_b)
                    ok = ok || distance(p->x, q->x) <= 2.0 * c.r1;
            log(t, ok ? "co-observation-ok" : "co-observation-missed", std::nullopt, std::nullopt,
                fmt::format("teams={}-{}", c.team_a, c.team_b));
        }
        for (auto& a : agents_) {
            if (a.committed < 0 || a.regroup_time != k)
                continue;
            auto& task = tasks_[static_cast<std::size_t>(a.committed)];
            const double d = distance(a.x, traj(a).waypoint(k));
            log(t, d <= s_.mission.regroup_radius ? "regroup-ok" : "regroup-missed", a.id, task.id,
                fmt::format("t_r={}", k));
            if (!a.fulfilled) {
                task.advance(TaskStatus::Abandoned);
                log(t, "task-abandoned", a.id, task.id, "deadline");
            }
            a.committed = -1;
            a.fulfilled = false;
            a.regroup.reset();
            a.label = "P";
        }
    }

    void admissibility(int k)
    {
        const double t = time_of_step(k);
        for (auto& task : tasks_) {
            if (task.appear_time == k)
                log(t, "task-appeared", std::nullopt, task.id, "");
            if (k < 1 || task.appear_time > k)
                continue;
            if (task.status != TaskStatus::Unassigned && task.status != TaskStatus::Admissible)
                continue;
            const auto& team = s_.team(task.team);
            std::size_t ti = 0;
            while (s_.teams[ti].id != task.team)
                ++ti;
            const auto tr = online_task_admissible(task.location, task.appear_time, k, teams_[ti].table,
                                                   team.trajectory, s_.v_max);
            if (tr) {
                const bool fresh = task.status == TaskStatus::Unassigned;
                if (fresh)
                    task.advance(TaskStatus::Admissible);
                if (fresh || task.regroup_time != *tr)
                    log(t, "task-admissible", std::nullopt, task.id, fmt::format("t_r={}", *tr));
                task.regroup_time = *tr;
            } else if (task.status == TaskStatus::Admissible) {
                task.advance(TaskStatus::Unassigned);
                log(t, "task-inadmissible", std::nullopt, task.id, "");
            }
        }
    }

    void assign(int k, std::size_t ti)
    {
        const double t = time_of_step(k);
        const TeamSpec& spec = s_.teams[ti];
        TeamRt& team = teams_[ti];
        const Point2 target = spec.trajectory.waypoint(k + 1);

        std::vector<int> free;
        std::vector<AgentIndex> local;
        std::vector<Point2> positions;
        for (int g : team.agents) {
            const auto& a = agents_[static_cast<std::size_t>(g)];
            if (a.committed >= 0)
                continue;
            free.push_back(g);
            local.push_back(a.ref.local);
            positions.push_back(a.x);
        }
        for (int g : free)
            agents_[static_cast<std::size_t>(g)].tasks.trajectory = target;
        if (free.empty()) {
            ++out_.metrics.assignment_skips;
            log(t, "assignment-skipped", std::nullopt, std::nullopt, fmt::format("team={} no free agent", spec.id));
            return;
        }
        std::optional<CommGraph> graph;
        try {
            graph = spec.graph().induced(local);
        } catch (const std::exception&) {
            ++out_.metrics.assignment_skips;
            log(t, "assignment-skipped", std::nullopt, std::nullopt, fmt::format("team={} disconnected", spec.id));
            return;
        }

        TaskSet tasks;
        tasks.trajectory = target;
        for (const auto& task : tasks_)
            if (task.team == spec.id && task.status == TaskStatus::Admissible)
                tasks.online.push_back({task.id, task.location});
        const WeightMatrix W = build_weights(positions, tasks, s_.admm);
        const SquareLayout layout = squarify(free.size(), tasks);

        std::vector<std::string> rows;
        std::vector<std::string> cols;
        for (const auto& r : W.rows)
            rows.push_back(r.str());
        for (const auto& c : W.cols)
            cols.push_back(c.str());
        const AdmmState* warm = nullptr;
        if (team.warm && rows == team.warm_rows && cols == team.warm_cols)
            warm = &*team.warm;

        const DistributedResult r = run_distributed_admm(*graph, W, s_.admm, warm);
        ++out_.metrics.admm_solves;
        out_.metrics.admm_rounds += r.state.iteration;
        out_.metrics.messages += r.message_count;
        team.warm = r.state;
        team.warm_rows = rows;
        team.warm_cols = cols;
        log(t, "assignment-snapshot", std::nullopt, std::nullopt,
            fmt::format("team={} converged={} rounds={} messages={}", spec.id, r.converged ? 1 : 0, r.state.iteration,
                        r.message_count));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j)
                out_.assignments.push_back(
                    {t, spec.id, rows[i], cols[j],
                     r.state.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});

        const auto rounding = round_assignment(r.state.alpha);
        for (std::size_t i = 0; i < free.size(); ++i) {
            auto& a = agents_[static_cast<std::size_t>(free[i])];
            a.tasks = layout.tasks;
            a.alpha = r.state.alpha.row(static_cast<Eigen::Index>(i)).transpose();
            const auto col = static_cast<std::size_t>(rounding[i]);
            a.label = W.cols[col].kind == TaskKind::Secondary ? "P'" : cols[col];
        }

        if (!r.converged) {
            ++out_.metrics.admm_nonconverged;
            log(t, "admm-nonconverged", std::nullopt, std::nullopt, fmt::format("team={}", spec.id));
            return;
        }
        if (!decisive(rounding, W, layout.tasks.secondary_count)) {
            if (!tasks.online.empty())
                log(t, "assignment-deferred", std::nullopt, std::nullopt, fmt::format("team={}", spec.id));
            return;
        }

        const auto first_online = static_cast<Eigen::Index>(1 + layout.tasks.secondary_count);
        for (std::size_t i = 0; i < rounding.size(); ++i) {
            if (rounding[i] < first_online)
                continue;
            const int task_id = layout.tasks.online[static_cast<std::size_t>(rounding[i] - first_online)].id;
            const auto ti_task = static_cast<std::size_t>(
                std::find_if(tasks_.begin(), tasks_.end(), [&](const OnlineTask& o) { return o.id == task_id; })
                - tasks_.begin());
            auto& task = tasks_[ti_task];
            task.advance(TaskStatus::Assigned);
            if (W.rows[i].kind == AgentKind::Shadow) {
                log(t, "task-assigned", std::nullopt, task.id, "shadow");
                task.advance(TaskStatus::Abandoned);
                log(t, "task-abandoned", std::nullopt, task.id, "shadow");
                continue;
            }
            auto& a = agents_[static_cast<std::size_t>(free[i])];
            task.agent = a.id;
            log(t, "task-assigned", a.id, task.id, fmt::format("t_r={}", task.regroup_time));
            a.committed = static_cast<int>(ti_task);
            a.fulfilled = false;
            a.regroup_time = task.regroup_time;
            a.label = fmt::format("O{}", task.id);
            const Point2 q = spec.trajectory.waypoint(task.regroup_time);
            const double rr = s_.mission.barrier_radius_fraction * s_.mission.regroup_radius;
            const double b = time_of_step(task.regroup_time) - t;
            const double slope = eventually_slope(q, rr, b, a.x, s_.control);
            a.regroup = cbf_eventually(q, rr, slope, b, s_.v_max, a.x, t);
            a.regroup->purpose = CbfPurpose::Regroup;
        }
    }

    void arm_barriers(int k)
    {
        const double t = time_of_step(k);
        for (auto& a : agents_) {
            a.tasks.trajectory = traj(a).waypoint(k + 1);
            const auto& entries = teams_[a.ref.team_index].schedule.entries();
            int next = -1;
            for (std::size_t e = 0; e < entries.size(); ++e) {
                if (entries[e].time > k) {
                    next = static_cast<int>(e);
                    break;
                }
            }
            if (next == a.coobs_entry)
                continue;
            a.coobs_entry = next;
            a.coobs.reset();
            if (next < 0)
                continue;
            const auto& c = entries[static_cast<std::size_t>(next)];
            const double r = s_.mission.barrier_radius_fraction * c.r1;
            const double b = time_of_step(c.time) - t;
            a.coobs = cbf_eventually(c.location, r, eventually_slope(c.location, r, b, a.x, s_.control), b,
                                     s_.v_max, a.x, t);
        }
    }

    TickOut control(const AgentRt& a, const std::vector<Point2>& snapshot, double t) const
    {
        std::vector<ClfRow> clf;
        double alpha_p = 0.0;
        if (a.committed >= 0) {
            const auto& task = tasks_[static_cast<std::size_t>(a.committed)];
            clf.push_back({{a.tasks.trajectory, ClfKind::TrajectoryWaypoint}, a.fulfilled ? 0.0 : 1.0});
            if (!a.fulfilled)
                clf.push_back({{task.location, ClfKind::OnlineTask}, 0.0});
        } else if (a.alpha.size() == static_cast<Eigen::Index>(a.tasks.size())) {
            clf = clf_rows_from_alpha(a.alpha, a.tasks);
            alpha_p = a.alpha[0];
        } else {
            clf.push_back({{a.tasks.trajectory, ClfKind::TrajectoryWaypoint}, 0.0});
            alpha_p = 1.0;
        }

        std::vector<BarrierRow> rows;
        if (a.coobs && a.coobs->in_window(t))
            rows.push_back({&*a.coobs, std::clamp(1.0 - alpha_p, 0.0, 1.0)});
        if (a.regroup && a.regroup->in_window(t)) {
            rows.push_back({&*a.regroup, 0.0});  // 1 - alpha_iO, the committed task
            rows.push_back({&*a.regroup, 1.0});  // 1 - alpha_iP
        }
        for (const auto& ob : obstacle_barriers_)
            rows.push_back({&ob, 0.0});
        std::vector<Point2> neighbors;
        for (std::size_t j = 0; j < snapshot.size(); ++j)
            if (static_cast<int>(j) != a.id && distance(snapshot[j], a.x) <= s_.mission.collision_range)
                neighbors.push_back(snapshot[j]);

        const ControlResult ref = reference_control(a.x, clf, s_.control);
        const ControlResult res = security_filter(a.x, t, ref.u, rows, neighbors, s_.control);
        TickOut out;
        out.u = res.u;
        out.status = res.mode;
        out.fallback = res.mode != "exact";
        out.active = static_cast<int>(rows.size() + neighbors.size());
        for (const auto& row : rows)
            if (row.relax <= kEnforcedRelax && row.barrier->purpose != CbfPurpose::Collision)
                out.min_h = std::min(out.min_h, (*row.barrier)(a.x, t).h);
        return out;
    }

    void sample(const AgentRt& a, double t)
    {
        TraceSample s;
        s.t = t;
        s.x = a.x;
        s.task = a.label;
        s.alpha_o.assign(tasks_.size(), 0.0);
        if (a.committed >= 0) {
            s.alpha_o[static_cast<std::size_t>(a.committed)] = 1.0;
        } else if (a.alpha.size() == static_cast<Eigen::Index>(a.tasks.size())) {
            s.alpha_p = a.alpha[0];
            for (std::size_t j = 0; j < a.tasks.secondary_count; ++j)
                s.alpha_sec += a.alpha[static_cast<Eigen::Index>(1 + j)];
            for (std::size_t j = 0; j < a.tasks.online.size(); ++j)
                for (std::size_t m = 0; m < tasks_.size(); ++m)
                    if (tasks_[m].id == a.tasks.online[j].id)
                        s.alpha_o[m] = a.alpha[static_cast<Eigen::Index>(1 + a.tasks.secondary_count + j)];
        } else {
            s.alpha_p = 1.0;
        }
        out_.traces[static_cast<std::size_t>(a.id)].samples.push_back(std::move(s));
    }

    void tick(int /*k*/, long tick)
    {
        const double t = time_of_tick(tick);
        std::vector<Point2> snapshot;
        for (const auto& a : agents_)
            snapshot.push_back(a.x);
        std::vector<TickOut> outs(agents_.size());
        const int n = static_cast<int>(agents_.size());
        if (exec_ == Exec::Parallel) {
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n; ++i)
                outs[static_cast<std::size_t>(i)] = control(agents_[static_cast<std::size_t>(i)], snapshot, t);
        } else {
            for (int i = 0; i < n; ++i)
                outs[static_cast<std::size_t>(i)] = control(agents_[static_cast<std::size_t>(i)], snapshot, t);
        }

        const double t_next = time_of_tick(tick + 1);
        for (auto& a : agents_) {
            const TickOut& o = outs[static_cast<std::size_t>(a.id)];
            sample(a, t);
            out_.control.push_back({t, a.id, o.u.x(), o.u.y(), o.active, o.min_h, o.status});
            out_.metrics.filter_fallbacks += o.fallback;
            out_.metrics.min_enforced_h = std::min(out_.metrics.min_enforced_h, o.min_h);
            a.x = s_.workspace.clamp(a.x + Point2{o.u.x(), o.u.y()} * s_.dt);
        }
        for (auto& a : agents_) {
            if (a.committed >= 0 && !a.fulfilled) {
                auto& task = tasks_[static_cast<std::size_t>(a.committed)];
                if (distance(a.x, task.location) <= s_.mission.fulfill_radius) {
                    a.fulfilled = true;
                    task.advance(TaskStatus::Fulfilled);
                    log(t_next, "task-fulfilled", a.id, task.id, "");
                }
            }
            const bool inside = s_.forbidden.contains(a.x);
            if (inside && !a.inside_forbidden)
                log(t_next, "forbidden-entry", a.id, std::nullopt, "");
            a.inside_forbidden = inside;
        }
        for (std::size_t i = 0; i < agents_.size(); ++i)
            for (std::size_t j = i + 1; j < agents_.size(); ++j)
                out_.metrics.min_pair_distance =
                    std::min(out_.metrics.min_pair_distance, distance(agents_[i].x, agents_[j].x));
    }

    const Scenario& s_;
    Exec exec_;
    long ticks_per_step_ = 0;
    std::vector<OnlineTask> tasks_;
    std::vector<AgentRt> agents_;
    std::vector<TeamRt> teams_;
    std::vector<CbfInstance> obstacle_barriers_;
    MissionResult out_;
};

}  // namespace

MissionResult run_mission(const Scenario& s, Exec exec)
{
    validate_scenario(s);
    return Mission(s, exec).run();
}

}  // namespace coassign
