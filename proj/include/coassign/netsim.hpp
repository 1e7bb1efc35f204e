#pragma once

#include "coassign/assignment.hpp"
#include "coassign/graph.hpp"
#include "coassign/parallel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace coassign {

// One physical agent.  Shadow rows of W hosted on this agent are stored and
// updated here alongside the agent's own row.
struct AgentNode {
    AgentIndex id = 0;
    std::vector<AgentIndex> neighbors;
    std::vector<Eigen::Index> rows;  // hosted W rows, ascending
    Eigen::MatrixXd w;
    Eigen::MatrixXd alpha;
    Eigen::MatrixXd z;
    Eigen::MatrixXd u;
    int round = 0;
};

// Payload exchanged over one directed edge in one inner z-iteration: the
// sender's hosted z rows and its alpha + u rows, flattened row-major in
// ascending row order.
struct RoundMessage {
    int round = 0;  // global exchange index, 1-based
    AgentIndex sender = 0;
    AgentIndex receiver = 0;
    std::vector<double> z;
    std::vector<double> alpha_u;
};

enum class PayloadKind : std::uint8_t { Z = 0, AlphaU = 1 };

// Flat wire record: `round, sender, receiver, kind, payload[]`.
struct MessageRecord {
    int round = 0;
    AgentIndex sender = 0;
    AgentIndex receiver = 0;
    PayloadKind kind = PayloadKind::Z;
    std::vector<double> payload;

    bool operator==(const MessageRecord&) const = default;
};

class NetsimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using MessageLog = std::vector<MessageRecord>;

void write_message_log_csv(std::ostream& os, const MessageLog& log);
MessageLog read_message_log_csv(std::istream& is);
// Little-endian: i64 round, i64 sender, i64 receiver, u8 kind, u32 length,
// f64 payload[length].
void write_message_log_binary(std::ostream& os, const MessageLog& log);
MessageLog read_message_log_binary(std::istream& is);

// Synchronous-round harness.  Messages travel only along graph edges; a node's
// update reads nothing but its own state and its inbox.
class Network {
public:
    Network(const CommGraph& graph, const WeightMatrix& W, const AdmmConfig& config,
            const AdmmState* warm = nullptr);

    // One outer ADMM round: local alpha-update, inner_iterations message
    // exchanges with z-updates, local u-update.  With `replay` set, inboxes
    // are filled from the log instead of live sends and every live outgoing
    // message is checked against its logged copy.
    void run_round(Exec exec = Exec::Serial, MessageLog* record = nullptr, const MessageLog* replay = nullptr);

    const std::vector<AgentNode>& nodes() const { return nodes_; }
    AdmmState assemble() const;
    std::size_t messages_sent() const { return messages_; }
    std::size_t audit_violations() const { return violations_; }
    std::size_t replay_mismatches() const { return replay_mismatches_; }
    int round() const { return round_; }

private:
    void node_alpha_u(AgentNode& node);
    void node_z(AgentNode& node, const std::vector<const RoundMessage*>& inbox);

    CommGraph graph_;
    CommGraph rows_graph_;
    AdmmConfig config_;
    double step_ = 0.0;
    Eigen::Index n_ = 0;
    std::vector<AgentLabel> row_labels_;
    std::vector<AgentNode> nodes_;
    std::vector<Eigen::MatrixXd> s_;  // alpha + u rows per node, fixed within a round
    int round_ = 0;
    int exchange_ = 0;
    std::size_t messages_ = 0;
    std::size_t violations_ = 0;
    std::size_t replay_mismatches_ = 0;
    const MessageLog* indexed_log_ = nullptr;
    std::map<std::tuple<int, AgentIndex, AgentIndex, PayloadKind>, const MessageRecord*> replay_index_;
};

struct DistributedResult {
    AdmmState state;
    std::vector<IterationStats> history;
    bool converged = false;
    std::size_t message_count = 0;
    std::size_t audit_violations = 0;
    std::size_t replay_mismatches = 0;
};

// Loops run_round under the same stopping rule as admm_solve.  Residuals are
// evaluated by the harness as a global monitor.
DistributedResult run_distributed_admm(const CommGraph& graph, const WeightMatrix& W, const AdmmConfig& config,
                                       const AdmmState* warm = nullptr, Exec exec = Exec::Serial,
                                       MessageLog* record = nullptr);

DistributedResult replay_distributed_admm(const CommGraph& graph, const WeightMatrix& W, const AdmmConfig& config,
                                          const MessageLog& log, const AdmmState* warm = nullptr);

}  // namespace coassign
