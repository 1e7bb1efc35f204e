#include "coassign/outputs.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace coassign {

using ojson = nlohmann::ordered_json;

void write_trajectories_csv(std::ostream& os, const std::vector<AgentTrace>& traces, const Scenario& s)
{
    os << "time,agent,team,x,y,task,alpha_P,alpha_sec";
    for (const auto& o : s.online_tasks)
        os << ",alpha_O" << o.id;
    os << '\n';
    std::size_t rows = 0;
    for (const auto& tr : traces)
        rows = std::max(rows, tr.samples.size());
    for (std::size_t k = 0; k < rows; ++k) {
        for (const auto& tr : traces) {
            if (k >= tr.samples.size())
                continue;
            const TraceSample& smp = tr.samples[k];
            os << fmt::format("{},{},{},{},{},{},{},{}", smp.t, tr.agent, tr.team, smp.x.x, smp.x.y, smp.task,
                              smp.alpha_p, smp.alpha_sec);
            for (double a : smp.alpha_o)
                os << fmt::format(",{}", a);
            os << '\n';
        }
    }
}

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

}  // namespace

std::vector<AgentTrace> read_trajectories_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
        throw OutputError("trajectories.csv: empty file");
    const auto header = split(line);
    if (header.size() < 8 || header[0] != "time" || header[1] != "agent")
        throw OutputError("trajectories.csv: unexpected header");
    const std::size_t n_o = header.size() - 8;
    std::map<int, AgentTrace> by_agent;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw OutputError(fmt::format("trajectories.csv:{}: expected {} cells", lineno, header.size()));
        try {
            TraceSample s;
            s.t = std::stod(cells[0]);
            const int agent = std::stoi(cells[1]);
            const int team = std::stoi(cells[2]);
            s.x = {std::stod(cells[3]), std::stod(cells[4])};
            s.task = cells[5];
            s.alpha_p = std::stod(cells[6]);
            s.alpha_sec = std::stod(cells[7]);
            for (std::size_t j = 0; j < n_o; ++j)
                s.alpha_o.push_back(std::stod(cells[8 + j]));
            auto& tr = by_agent[agent];
            tr.agent = agent;
            tr.team = team;
            tr.samples.push_back(std::move(s));
        } catch (const std::logic_error&) {
            throw OutputError(fmt::format("trajectories.csv:{}: malformed number", lineno));
        }
    }
    std::vector<AgentTrace> out;
    for (auto& [id, tr] : by_agent)
        out.push_back(std::move(tr));
    return out;
}

void write_events_json(std::ostream& os, const EventLog& log)
{
    ojson arr = ojson::array();
    for (const auto& e : log) {
        ojson j;
        j["t"] = e.t;
        j["kind"] = e.kind;
        j["agent"] = e.agent ? ojson(*e.agent) : ojson(nullptr);
        j["task"] = e.task ? ojson(*e.task) : ojson(nullptr);
        j["detail"] = e.detail;
        arr.push_back(std::move(j));
    }
    os << arr.dump(1) << '\n';
}

EventLog read_events_json(std::istream& is)
{
    ojson arr;
    try {
        arr = ojson::parse(is);
    } catch (const ojson::exception& e) {
        throw OutputError(fmt::format("events.json: {}", e.what()));
    }
    if (!arr.is_array())
        throw OutputError("events.json: expected an array");
    EventLog log;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& j = arr[i];
        try {
            Event e;
            e.t = j.at("t").get<double>();
            e.kind = j.at("kind").get<std::string>();
            if (!j.at("agent").is_null())
                e.agent = j.at("agent").get<int>();
            if (!j.at("task").is_null())
                e.task = j.at("task").get<int>();
            e.detail = j.at("detail").get<std::string>();
            log.push_back(std::move(e));
        } catch (const ojson::exception& ex) {
            throw OutputError(fmt::format("events.json[{}]: {}", i, ex.what()));
        }
    }
    return log;
}

void write_assignment_csv(std::ostream& os, const std::vector<AssignmentEntry>& entries)
{
    os << "time,team,row,column,alpha\n";
    for (const auto& e : entries)
        os << fmt::format("{},{},{},{},{}\n", e.t, e.team, e.row, e.column, e.alpha);
}

void write_control_csv(std::ostream& os, const std::vector<ControlRecord>& records)
{
    os << "time,agent,u_x,u_y,active_barriers,min_h,qp_status\n";
    for (const auto& r : records) {
        const std::string h = std::isfinite(r.min_h) ? fmt::format("{}", r.min_h) : "";
        os << fmt::format("{},{},{},{},{},{},{}\n", r.t, r.agent, r.u_x, r.u_y, r.active_barriers, h, r.qp_status);
    }
}

namespace {

ojson finite_or_null(double v)
{
    return std::isfinite(v) ? ojson(v) : ojson(nullptr);
}

}  // namespace

void write_metrics_json(std::ostream& os, const Metrics& m)
{
    ojson j;
    j["tasks_total"] = m.tasks_total;
    j["fulfilled"] = m.fulfilled;
    j["abandoned"] = m.abandoned;
    j["rejected"] = m.rejected;
    j["admm_solves"] = m.admm_solves;
    j["admm_rounds"] = m.admm_rounds;
    j["admm_nonconverged"] = m.admm_nonconverged;
    j["messages"] = m.messages;
    j["assignment_skips"] = m.assignment_skips;
    j["filter_fallbacks"] = m.filter_fallbacks;
    j["min_enforced_h"] = finite_or_null(m.min_enforced_h);
    j["min_pair_distance"] = finite_or_null(m.min_pair_distance);
    j["seed"] = m.seed;
    os << j.dump(2) << '\n';
}

void write_report_json(std::ostream& os, const VerificationReport& report)
{
    ojson arr = ojson::array();
    for (const auto& c : report.checks) {
        ojson j;
        j["check"] = c.name;
        j["pass"] = c.pass;
        j["first_time"] = c.first_time ? ojson(*c.first_time) : ojson(nullptr);
        j["agent"] = c.agent ? ojson(*c.agent) : ojson(nullptr);
        j["detail"] = c.detail;
        arr.push_back(std::move(j));
    }
    os << arr.dump(2) << '\n';
}

namespace {

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw OutputError(fmt::format("{}: cannot open for writing", path.string()));
    fn(out);
    out.flush();
    if (!out)
        throw OutputError(fmt::format("{}: write failed", path.string()));
}

}  // namespace

void export_outputs(const MissionResult& result, const Scenario& s, const std::string& out_dir)
{
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw OutputError(fmt::format("{}: {}", out_dir, ec.message()));
    write_file(dir / "trajectories.csv", [&](std::ostream& os) { write_trajectories_csv(os, result.traces, s); });
    write_file(dir / "events.json", [&](std::ostream& os) { write_events_json(os, result.events); });
    write_file(dir / "assignment.csv", [&](std::ostream& os) { write_assignment_csv(os, result.assignments); });
    write_file(dir / "metrics.json", [&](std::ostream& os) { write_metrics_json(os, result.metrics); });
    write_file(dir / "control.csv", [&](std::ostream& os) { write_control_csv(os, result.control); });
    for (const auto& team : s.teams) {
        const auto table = build_lookup_table(team.trajectory, s.forbidden, s.v_max);
        write_file(dir / fmt::format("lookup_team{}.csv", team.id),
                   [&](std::ostream& os) { write_lookup_csv(os, table); });
    }
}

}  // namespace coassign
