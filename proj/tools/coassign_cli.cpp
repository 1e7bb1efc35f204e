#include "coassign/assignment.hpp"
#include "coassign/mission.hpp"
#include "coassign/netsim.hpp"
#include "coassign/outputs.hpp"
#include "coassign/scenario.hpp"
#include "coassign/security.hpp"
#include "coassign/verify.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace coassign;
using ojson = nlohmann::ordered_json;

namespace {

struct Snapshot {
    std::vector<Point2> agents;
    std::vector<std::pair<AgentIndex, AgentIndex>> edges;
    TaskSet tasks;
    AdmmConfig admm;
};

Point2 read_point(const ojson& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

// {"agents": [[x,y],...], "waypoint": [x,y], "online": [{"id", "location"}],
//  "edges": [[i,j],...] (optional, complete graph otherwise),
//  "workspace_diameter": d (optional)}
Snapshot load_snapshot(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(path + ": cannot open snapshot");
    const ojson j = ojson::parse(in);
    Snapshot s;
    for (const auto& p : j.at("agents"))
        s.agents.push_back(read_point(p));
    if (j.contains("edges"))
        for (const auto& e : j.at("edges"))
            s.edges.emplace_back(e.at(0).get<AgentIndex>(), e.at(1).get<AgentIndex>());
    s.tasks.trajectory = read_point(j.at("waypoint"));
    if (j.contains("online"))
        for (const auto& o : j.at("online"))
            s.tasks.online.push_back({o.at("id").get<int>(), read_point(o.at("location"))});
    s.admm = AdmmConfig::for_workspace(j.value("workspace_diameter", 8.0 * std::sqrt(2.0)));
    return s;
}

ojson matrix_json(const Eigen::MatrixXd& m)
{
    ojson rows = ojson::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ojson r = ojson::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k)
            r.push_back(m(i, k));
        rows.push_back(r);
    }
    return rows;
}

ojson assignment_json(const WeightMatrix& W, const std::vector<Eigen::Index>& a)
{
    ojson out = ojson::object();
    for (std::size_t i = 0; i < a.size(); ++i)
        out[W.rows[i].str()] = W.cols[static_cast<std::size_t>(a[i])].str();
    return out;
}

int emit(const ojson& j, const std::string& out)
{
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
        return 0;
    }
    std::ofstream f(out);
    if (!f)
        throw std::runtime_error(out + ": cannot open for writing");
    f << j.dump(2) << '\n';
    return 0;
}

Scenario scenario_with_seed(const std::string& path, std::optional<std::uint64_t> seed)
{
    Scenario s = load_scenario(path);
    if (seed)
        s.seed = *seed;
    return s;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Distributed task assignment with co-observation security"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out;
    std::string snapshot_path;
    std::optional<std::uint64_t> seed;

    auto* table = app.add_subcommand("table", "build and export the regroup lookup tables");
    table->add_option("--scenario", scenario_path, "scenario JSON")->required();
    table->add_option("--out", out, "output directory (stdout when omitted)");

    auto* assign = app.add_subcommand("assign", "one-shot distributed assignment from a snapshot");
    assign->add_option("--snapshot", snapshot_path, "snapshot JSON")->required();
    assign->add_option("--out", out, "output file (stdout when omitted)");

    auto* oracle = app.add_subcommand("oracle", "brute-force optimal assignment for a snapshot");
    oracle->add_option("--snapshot", snapshot_path, "snapshot JSON")->required();
    oracle->add_option("--out", out, "output file (stdout when omitted)");

    auto* simulate = app.add_subcommand("simulate", "run a full mission and export its outputs");
    simulate->add_option("--scenario", scenario_path, "scenario JSON")->required();
    simulate->add_option("--out", out, "output directory")->required();
    simulate->add_option("--seed", seed, "seed recorded with the run");

    auto* verify = app.add_subcommand("verify", "audit exported mission outputs");
    verify->add_option("--scenario", scenario_path, "scenario JSON")->required();
    verify->add_option("--out", out, "directory holding events.json and trajectories.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*table) {
            const Scenario s = load_scenario(scenario_path);
            for (const auto& team : s.teams) {
                const auto t = build_lookup_table(team.trajectory, s.forbidden, s.v_max, Exec::Parallel);
                if (out.empty()) {
                    std::cout << "# team " << team.id << '\n';
                    write_lookup_csv(std::cout, t);
                } else {
                    std::filesystem::create_directories(out);
                    std::ofstream f(std::filesystem::path(out) / fmt::format("lookup_team{}.csv", team.id));
                    write_lookup_csv(f, t);
                }
            }
            return 0;
        }
        if (*assign) {
            const Snapshot snap = load_snapshot(snapshot_path);
            const CommGraph g = snap.edges.empty() ? CommGraph::complete(snap.agents.size())
                                                   : CommGraph(snap.agents.size(), snap.edges);
            const WeightMatrix W = build_weights(snap.agents, snap.tasks, snap.admm);
            const DistributedResult r = run_distributed_admm(g, W, snap.admm);
            ojson j;
            j["converged"] = r.converged;
            j["iterations"] = r.state.iteration;
            j["messages"] = r.message_count;
            j["objective"] = assignment_objective(W, r.state.alpha);
            j["assignment"] = assignment_json(W, round_assignment(r.state.alpha));
            j["alpha"] = matrix_json(r.state.alpha);
            return emit(j, out);
        }
        if (*oracle) {
            const Snapshot snap = load_snapshot(snapshot_path);
            const WeightMatrix W = build_weights(snap.agents, snap.tasks, snap.admm);
            const OracleResult r = oracle_solve(W);
            ojson j;
            j["objective"] = r.objective;
            j["assignment"] = assignment_json(W, r.assignment);
            j["weights"] = matrix_json(W.w);
            return emit(j, out);
        }
        if (*simulate) {
            const Scenario s = scenario_with_seed(scenario_path, seed);
            const MissionResult r = run_mission(s, Exec::Parallel);
            export_outputs(r, s, out);
            const VerificationReport rep = verify_log(r.events, r.traces, s);
            std::ofstream f(std::filesystem::path(out) / "verify.json");
            write_report_json(f, rep);
            std::cout << rep.str();
            return rep.passed() ? 0 : 2;
        }
        if (*verify) {
            const Scenario s = load_scenario(scenario_path);
            const std::filesystem::path dir(out);
            std::ifstream ev(dir / "events.json");
            std::ifstream tr(dir / "trajectories.csv");
            if (!ev || !tr)
                throw std::runtime_error(out + ": missing events.json or trajectories.csv");
            const EventLog log = read_events_json(ev);
            const auto traces = read_trajectories_csv(tr);
            const VerificationReport rep = verify_log(log, traces, s);
            std::cout << rep.str();
            return rep.passed() ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
