#pragma once

#include "coassign/mission.hpp"

#include <optional>
#include <string>
#include <vector>

namespace coassign {

struct CheckResult {
    std::string name;  // V1..V5
    bool pass = true;
    std::optional<double> first_time;
    std::optional<int> agent;
    std::string detail;

    bool operator==(const CheckResult&) const = default;
};

struct VerificationReport {
    std::vector<CheckResult> checks;

    bool passed() const;
    std::string str() const;
    bool operator==(const VerificationReport&) const = default;
};

// V1 forbidden regions never entered; V2 every team keeps an agent in the
// tube around its waypoint; V3 scheduled co-observations met; V4 deviating
// agents back at q_{t_r} by t_r; V5 every assignment preceded by a valid
// admissibility event.
VerificationReport verify_log(const EventLog& log, const std::vector<AgentTrace>& traces, const Scenario& s);

}  // namespace coassign
