#include "coassign/scenario.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace coassign {

using nlohmann::json;

Point2 Workspace::clamp(const Point2& p) const
{
    return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)};
}

CommGraph TeamSpec::graph() const
{
    if (edges.empty())
        return CommGraph::complete(agents.size());
    return CommGraph(agents.size(), edges);
}

std::size_t Scenario::agent_count() const
{
    std::size_t n = 0;
    for (const auto& t : teams)
        n += t.agents.size();
    return n;
}

const TeamSpec& Scenario::team(int id) const
{
    for (const auto& t : teams)
        if (t.id == id)
            return t;
    throw InvariantError(fmt::format("no team with id {}", id));
}

CoObservationSchedule Scenario::schedule_for(int team_id) const
{
    std::vector<CoObservation> out;
    for (const auto& c : co_observations) {
        if (c.team_a == team_id)
            out.push_back({c.time, c.location, c.team_b, c.r1, c.r2});
        else if (c.team_b == team_id)
            out.push_back({c.time, c.location, c.team_a, c.r1, c.r2});
    }
    return CoObservationSchedule(std::move(out));
}

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// unknown keys can be reported.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw SchemaError(fmt::format("{}: expected an object", path_));
    }

    std::string at(const std::string& key) const { return path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }

    const json& need(const std::string& key)
    {
        seen_.insert(key);
        if (!j_.contains(key))
            throw SchemaError(fmt::format("{}: missing required field", at(key)));
        return j_.at(key);
    }

    const json* maybe(const std::string& key)
    {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    double number(const std::string& key) { return as_number(need(key), at(key)); }
    double number(const std::string& key, double fallback)
    {
        const json* v = maybe(key);
        return v ? as_number(*v, at(key)) : fallback;
    }
    int integer(const std::string& key) { return as_int(need(key), at(key)); }
    int integer(const std::string& key, int fallback)
    {
        const json* v = maybe(key);
        return v ? as_int(*v, at(key)) : fallback;
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k))
                throw SchemaError(fmt::format("{}: unknown field", at(k)));
    }

    static double as_number(const json& v, const std::string& path)
    {
        if (!v.is_number())
            throw SchemaError(fmt::format("{}: expected a number", path));
        return v.get<double>();
    }

    static int as_int(const json& v, const std::string& path)
    {
        if (!v.is_number_integer())
            throw SchemaError(fmt::format("{}: expected an integer", path));
        return v.get<int>();
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

const json& array_at(const json& v, const std::string& path)
{
    if (!v.is_array())
        throw SchemaError(fmt::format("{}: expected an array", path));
    return v;
}

Point2 point(const json& v, const std::string& path)
{
    if (!v.is_array() || v.size() != 2)
        throw SchemaError(fmt::format("{}: expected [x, y]", path));
    return {Fields::as_number(v[0], path + "[0]"), Fields::as_number(v[1], path + "[1]")};
}

std::vector<Point2> points(const json& v, const std::string& path)
{
    std::vector<Point2> out;
    const json& arr = array_at(v, path);
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back(point(arr[i], fmt::format("{}[{}]", path, i)));
    return out;
}

ConvexPolygon polygon(const json& v, const std::string& path)
{
    Fields f(v, path);
    auto verts = points(f.need("vertices"), f.at("vertices"));
    f.finish();
    try {
        return ConvexPolygon(std::move(verts));
    } catch (const GeometryError& e) {
        throw InvariantError(fmt::format("{}: {}", path, e.what()));
    }
}

std::vector<ConvexPolygon> polygons(Fields& parent, const std::string& key)
{
    std::vector<ConvexPolygon> out;
    const json* v = parent.maybe(key);
    if (!v)
        return out;
    const std::string path = parent.at(key);
    const json& arr = array_at(*v, path);
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back(polygon(arr[i], fmt::format("{}[{}]", path, i)));
    return out;
}

AdmmConfig parse_admm(const json* v, const std::string& path, double diameter)
{
    AdmmConfig c = AdmmConfig::for_workspace(diameter);
    if (!v)
        return c;
    Fields f(*v, path);
    c.rho = f.number("rho", c.rho);
    c.gd_step = f.number("gd_step", c.gd_step);
    c.inner_iterations = f.integer("inner_iterations", c.inner_iterations);
    c.max_outer = f.integer("max_outer", c.max_outer);
    c.residual_tol = f.number("residual_tol", c.residual_tol);
    c.epsilon = f.number("epsilon", c.epsilon);
    c.epsilon_prime = f.number("epsilon_prime", c.epsilon_prime);
    c.big_m = f.number("big_m", 2.5 / c.epsilon);
    f.finish();
    return c;
}

ControlConfig parse_control(const json* v, const std::string& path, double v_max, double dt)
{
    ControlConfig c = ControlConfig::for_speed(v_max);
    c.dt = dt;
    if (!v)
        return c;
    Fields f(*v, path);
    if (const json* q = f.maybe("Q")) {
        const std::string qp = f.at("Q");
        const json& rows = array_at(*q, qp);
        if (rows.size() != 2)
            throw SchemaError(fmt::format("{}: expected a 2x2 matrix", qp));
        for (int i = 0; i < 2; ++i) {
            const Point2 r = point(rows[static_cast<std::size_t>(i)], fmt::format("{}[{}]", qp, i));
            c.Q(i, 0) = r.x;
            c.Q(i, 1) = r.y;
        }
    }
    c.clf_gain = f.number("clf_gain", c.clf_gain);
    c.cbf_gain = f.number("cbf_gain", c.cbf_gain);
    c.big_m = f.number("big_m", c.big_m);
    c.cbf_decay = f.number("cbf_decay", c.cbf_decay);
    c.cbf_mu = f.number("cbf_mu", c.cbf_mu);
    c.cbf_sigma = f.number("cbf_sigma", c.cbf_sigma);
    c.r_safe = f.number("r_safe", c.r_safe);
    c.eventually_slope = f.number("eventually_slope", c.eventually_slope);
    c.slack_penalty = f.number("slack_penalty", c.slack_penalty);
    f.finish();
    return c;
}

MissionParams parse_mission(const json* v, const std::string& path)
{
    MissionParams m;
    if (!v)
        return m;
    Fields f(*v, path);
    m.fulfill_radius = f.number("fulfill_radius", m.fulfill_radius);
    m.tube_radius = f.number("tube_radius", m.tube_radius);
    m.regroup_radius = f.number("regroup_radius", m.regroup_radius);
    m.barrier_radius_fraction = f.number("barrier_radius_fraction", m.barrier_radius_fraction);
    m.obstacle_margin = f.number("obstacle_margin", m.obstacle_margin);
    m.collision_range = f.number("collision_range", m.collision_range);
    f.finish();
    return m;
}

Scenario from_json(const json& root)
{
    Scenario s;
    Fields f(root, "$");
    if (const json* n = f.maybe("name")) {
        if (!n->is_string())
            throw SchemaError("$.name: expected a string");
        s.name = n->get<std::string>();
    }
    {
        Fields w(f.need("workspace"), f.at("workspace"));
        s.workspace.lo = point(w.need("min"), w.at("min"));
        s.workspace.hi = point(w.need("max"), w.at("max"));
        w.finish();
    }
    s.v_max = f.number("v_max");
    s.T = f.integer("T");
    s.timestep_duration = f.number("timestep_duration");
    s.dt = f.number("dt");
    if (const json* sd = f.maybe("seed")) {
        if (!sd->is_number_unsigned())
            throw SchemaError("$.seed: expected a non-negative integer");
        s.seed = sd->get<std::uint64_t>();
    }
    if (!(s.timestep_duration > 0.0))
        throw InvariantError("$.timestep_duration: must be positive");
    s.obstacles = polygons(f, "obstacles");
    s.forbidden.regions = polygons(f, "forbidden");

    {
        const std::string tp = f.at("teams");
        const json& arr = array_at(f.need("teams"), tp);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string p = fmt::format("{}[{}]", tp, i);
            Fields t(arr[i], p);
            TeamSpec team;
            team.id = t.integer("id");
            team.agents = points(t.need("agents"), t.at("agents"));
            auto wps = points(t.need("trajectory"), t.at("trajectory"));
            if (wps.empty())
                throw InvariantError(fmt::format("{}: trajectory is empty", t.at("trajectory")));
            team.trajectory = ReferenceTrajectory(std::move(wps), s.timestep_duration);
            if (const json* e = t.maybe("edges")) {
                const json& ea = array_at(*e, t.at("edges"));
                for (std::size_t k = 0; k < ea.size(); ++k) {
                    const std::string ep = fmt::format("{}[{}]", t.at("edges"), k);
                    if (!ea[k].is_array() || ea[k].size() != 2)
                        throw SchemaError(fmt::format("{}: expected [i, j]", ep));
                    const int a = Fields::as_int(ea[k][0], ep + "[0]");
                    const int b = Fields::as_int(ea[k][1], ep + "[1]");
                    if (a < 0 || b < 0)
                        throw InvariantError(fmt::format("{}: negative agent index", ep));
                    team.edges.emplace_back(static_cast<AgentIndex>(a), static_cast<AgentIndex>(b));
                }
            }
            t.finish();
            s.teams.push_back(std::move(team));
        }
    }

    if (const json* co = f.maybe("co_observations")) {
        const std::string cp = f.at("co_observations");
        const json& arr = array_at(*co, cp);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string p = fmt::format("{}[{}]", cp, i);
            Fields c(arr[i], p);
            CoObservationSpec spec;
            spec.time = c.integer("time");
            const json& teams = c.need("teams");
            if (!teams.is_array() || teams.size() != 2)
                throw SchemaError(fmt::format("{}: expected [team_a, team_b]", c.at("teams")));
            spec.team_a = Fields::as_int(teams[0], c.at("teams") + "[0]");
            spec.team_b = Fields::as_int(teams[1], c.at("teams") + "[1]");
            spec.location = point(c.need("location"), c.at("location"));
            spec.r1 = c.number("r1");
            spec.r2 = c.number("r2");
            c.finish();
            s.co_observations.push_back(spec);
        }
    }

    if (const json* ot = f.maybe("online_tasks")) {
        const std::string op = f.at("online_tasks");
        const json& arr = array_at(*ot, op);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Fields o(arr[i], fmt::format("{}[{}]", op, i));
            OnlineTask task;
            task.id = o.integer("id");
            task.team = o.integer("team");
            task.appear_time = o.integer("appear_time");
            task.location = point(o.need("location"), o.at("location"));
            o.finish();
            s.online_tasks.push_back(task);
        }
    }

    s.admm = parse_admm(f.maybe("admm"), f.at("admm"), s.workspace.diameter());
    s.control = parse_control(f.maybe("control"), f.at("control"), s.v_max, s.dt);
    s.mission = parse_mission(f.maybe("mission"), f.at("mission"));
    f.finish();
    return s;
}

}  // namespace

void validate_scenario(const Scenario& s)
{
    auto fail = [](const std::string& msg) { throw InvariantError(msg); };
    if (!(s.workspace.hi.x > s.workspace.lo.x) || !(s.workspace.hi.y > s.workspace.lo.y))
        fail("$.workspace: max must exceed min on both axes");
    if (!(s.v_max > 0.0))
        fail("$.v_max: must be positive");
    if (s.T < 1)
        fail("$.T: must be at least 1");
    if (!(s.dt > 0.0) || s.dt > 0.1 * s.timestep_duration + 1e-12)
        fail("$.dt: must be positive and at most a tenth of timestep_duration");
    const double ticks = s.timestep_duration / s.dt;
    if (std::abs(ticks - std::round(ticks)) > 1e-9)
        fail("$.dt: must divide timestep_duration");
    if (s.teams.empty())
        fail("$.teams: at least one team is required");

    try {
        s.admm.validate();
    } catch (const AssignmentError& e) {
        fail(std::string("$.admm: ") + e.what());
    }
    try {
        s.control.validate(s.timestep_duration);
    } catch (const ControlError& e) {
        fail(std::string("$.control: ") + e.what());
    }
    const auto& m = s.mission;
    if (!(m.fulfill_radius > 0.0) || !(m.tube_radius > 0.0) || !(m.regroup_radius > 0.0))
        fail("$.mission: radii must be positive");
    if (!(m.barrier_radius_fraction > 0.0) || m.barrier_radius_fraction > 1.0)
        fail("$.mission.barrier_radius_fraction: must lie in (0, 1]");

    std::set<int> team_ids;
    std::vector<Point2> starts;
    for (std::size_t i = 0; i < s.teams.size(); ++i) {
        const auto& t = s.teams[i];
        const std::string p = fmt::format("$.teams[{}]", i);
        if (!team_ids.insert(t.id).second)
            fail(fmt::format("{}.id: duplicate team id {}", p, t.id));
        if (t.agents.empty())
            fail(fmt::format("{}.agents: team needs at least one agent", p));
        if (t.trajectory.horizon() != s.T)
            fail(fmt::format("{}.trajectory: has {} waypoints, expected T = {}", p, t.trajectory.horizon(), s.T));
        try {
            t.trajectory.check_followable(s.v_max);
        } catch (const SecurityError& e) {
            fail(fmt::format("{}.trajectory: {}", p, e.what()));
        }
        for (std::size_t k = 0; k < t.agents.size(); ++k) {
            const Point2& a = t.agents[k];
            if (!s.workspace.contains(a))
                fail(fmt::format("{}.agents[{}]: outside the workspace", p, k));
            if (distance(a, t.trajectory.waypoint(1)) > s.v_max * s.timestep_duration + 1e-9)
                fail(fmt::format("{}.agents[{}]: first waypoint is out of reach in one step", p, k));
            for (const auto& o : starts)
                if (distance(a, o) < s.control.r_safe)
                    fail(fmt::format("{}.agents[{}]: closer than r_safe to another agent", p, k));
            starts.push_back(a);
        }
        for (const auto& q : t.trajectory.waypoints())
            if (!s.workspace.contains(q))
                fail(fmt::format("{}.trajectory: waypoint outside the workspace", p));
        try {
            (void)t.graph();
        } catch (const std::exception& e) {
            fail(fmt::format("{}.edges: {}", p, e.what()));
        }
    }

    for (std::size_t i = 0; i < s.co_observations.size(); ++i) {
        const auto& c = s.co_observations[i];
        const std::string p = fmt::format("$.co_observations[{}]", i);
        if (c.time < 1 || c.time > s.T)
            fail(fmt::format("{}.time: {} outside 1..T = {}", p, c.time, s.T));
        if (!team_ids.count(c.team_a) || !team_ids.count(c.team_b) || c.team_a == c.team_b)
            fail(fmt::format("{}.teams: must name two distinct known teams", p));
        if (!(c.r1 > 0.0) || !(c.r2 > 0.0))
            fail(fmt::format("{}: r1 and r2 must be positive", p));
    }
    for (const auto& t : s.teams) {
        try {
            (void)s.schedule_for(t.id);
        } catch (const SecurityError& e) {
            fail(fmt::format("$.co_observations: team {}: {}", t.id, e.what()));
        }
    }

    std::set<int> task_ids;
    for (std::size_t i = 0; i < s.online_tasks.size(); ++i) {
        const auto& o = s.online_tasks[i];
        const std::string p = fmt::format("$.online_tasks[{}]", i);
        if (!task_ids.insert(o.id).second)
            fail(fmt::format("{}.id: duplicate task id {}", p, o.id));
        if (!team_ids.count(o.team))
            fail(fmt::format("{}.team: unknown team {}", p, o.team));
        if (o.appear_time < 1 || o.appear_time > s.T)
            fail(fmt::format("{}.appear_time: {} outside 1..T = {}", p, o.appear_time, s.T));
        if (!s.workspace.contains(o.location))
            fail(fmt::format("{}.location: outside the workspace", p));
    }
}

Scenario parse_scenario(const std::string& text, const std::string& source)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("{}: {}", source, e.what()));
    }
    Scenario s;
    try {
        s = from_json(root);
        validate_scenario(s);
    } catch (const ScenarioError& e) {
        if (dynamic_cast<const SchemaError*>(&e))
            throw SchemaError(fmt::format("{}: {}", source, e.what()));
        throw InvariantError(fmt::format("{}: {}", source, e.what()));
    } catch (const std::invalid_argument& e) {
        throw InvariantError(fmt::format("{}: {}", source, e.what()));
    }
    return s;
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ScenarioError(fmt::format("{}: cannot open scenario file", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path);
}

}  // namespace coassign
