#pragma once

#include "coassign/mission.hpp"
#include "coassign/verify.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace coassign {

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Header: time,agent,team,x,y,task,alpha_P,alpha_sec,alpha_O<id>... with one
// alpha_O column per scenario online task.  Rows ordered by time, then agent.
void write_trajectories_csv(std::ostream& os, const std::vector<AgentTrace>& traces, const Scenario& s);
std::vector<AgentTrace> read_trajectories_csv(std::istream& is);

void write_events_json(std::ostream& os, const EventLog& log);
EventLog read_events_json(std::istream& is);

void write_assignment_csv(std::ostream& os, const std::vector<AssignmentEntry>& entries);
void write_control_csv(std::ostream& os, const std::vector<ControlRecord>& records);
void write_metrics_json(std::ostream& os, const Metrics& m);
void write_report_json(std::ostream& os, const VerificationReport& report);

// trajectories.csv, events.json, assignment.csv, metrics.json, control.csv
// and lookup_team<id>.csv under out_dir (created if missing).
void export_outputs(const MissionResult& result, const Scenario& s, const std::string& out_dir);

}  // namespace coassign
