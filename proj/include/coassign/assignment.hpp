#pragma once

#include "coassign/geometry.hpp"
#include "coassign/graph.hpp"
#include "coassign/parallel.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coassign {

enum class TaskKind { Trajectory, Secondary, Online };

struct TaskLabel {
    TaskKind kind = TaskKind::Trajectory;
    int id = 0;  // online task id, or secondary index

    bool operator==(const TaskLabel&) const = default;
    std::string str() const;
};

struct OnlineSpot {
    int id = 0;
    Point2 location;
};

// Tasks of one sub-team at one decision step.  Column order everywhere is
// P, then P'_1..P'_k, then the online tasks in list order.
struct TaskSet {
    Point2 trajectory;
    std::size_t secondary_count = 0;
    std::vector<OnlineSpot> online;

    std::size_t size() const { return 1 + secondary_count + online.size(); }
    std::vector<TaskLabel> labels() const;
};

enum class AgentKind { Real, Shadow };

struct AgentLabel {
    AgentKind kind = AgentKind::Real;
    AgentIndex index = 0;  // real agent index, or shadow ordinal
    AgentIndex host = 0;   // physical agent that runs this row

    bool operator==(const AgentLabel&) const = default;
    std::string str() const;
};

struct AdmmConfig {
    double rho = 1.0;
    double gd_step = 0.0;  // 0 selects min(0.5, 0.9 / spectral bound)
    int inner_iterations = 5;
    int max_outer = 2000;
    double residual_tol = 1e-6;
    double epsilon = 0.01;
    double epsilon_prime = 10.0 * 8.0 * 1.4142135623730951;
    double big_m = 2.5 / 0.01;

    // Defaults scaled to a workspace with the given diameter.
    static AdmmConfig for_workspace(double diameter);
    void validate() const;
};

class AssignmentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SquareLayout {
    TaskSet tasks;
    std::vector<AgentLabel> agents;
};

// Pads to a square problem: secondary trajectory tasks when agents outnumber
// tasks, shadow agents (hosted round-robin on the real agents) otherwise.
SquareLayout squarify(std::size_t agent_count, const TaskSet& tasks);

struct WeightMatrix {
    Eigen::MatrixXd w;
    std::vector<AgentLabel> rows;
    std::vector<TaskLabel> cols;

    Eigen::Index size() const { return w.rows(); }
    std::optional<Eigen::Index> column_of(const TaskLabel& t) const;
};

WeightMatrix build_weights(std::span<const Point2> agent_positions, const TaskSet& tasks,
                           const AdmmConfig& config);

// Euclidean projection onto the probability simplex (sort-based).
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

Eigen::VectorXd alpha_update_local(const Eigen::VectorXd& w_i, const Eigen::VectorXd& z_i,
                                   const Eigen::VectorXd& u_i, double rho);

Eigen::VectorXd u_update_local(const Eigen::VectorXd& u_i, const Eigen::VectorXd& alpha_i,
                               const Eigen::VectorXd& z_i);

struct AdmmState {
    Eigen::MatrixXd alpha;
    Eigen::MatrixXd z;
    Eigen::MatrixXd u;
    int iteration = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;

    static AdmmState uniform(Eigen::Index n);
};

// Communication graph over the rows of W: a shadow row lives on its host's
// node, so two rows are adjacent iff they share a node or their nodes are
// adjacent.
CommGraph row_graph(const CommGraph& physical, std::span<const AgentLabel> rows);

double resolve_gd_step(const AdmmConfig& config, const CommGraph& rows);

// One inner z-iteration z <- z - step * L (z - (alpha + u)), evaluated
// agent-wise over ascending neighbor order.  `alpha_plus_u` is held fixed.
void z_update_inner(Eigen::MatrixXd& z, const Eigen::MatrixXd& alpha_plus_u, const CommGraph& rows,
                    double step);

// Single agent's z-iteration from its own rows and the neighbors' rows (in
// ascending row order).  Shared by the centralized and distributed paths.
Eigen::VectorXd z_update_row(const Eigen::VectorXd& z_i, const Eigen::VectorXd& s_i,
                             std::span<const Eigen::VectorXd> neighbor_z,
                             std::span<const Eigen::VectorXd> neighbor_s, double step);

// Exact projected-gradient z-step z <- Proj_{1^T z = 1}(z + tau (s - z)),
// column by column.  Centralized reference for the convergence analysis;
// on a complete graph it coincides with one Laplacian step at tau = n * step.
void z_update_projected(Eigen::MatrixXd& z, const Eigen::MatrixXd& alpha_plus_u, double tau);

struct IterationStats {
    int iteration = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective = 0.0;
};

struct AdmmResult {
    AdmmState state;
    std::vector<IterationStats> history;
    bool converged = false;

    const Eigen::MatrixXd& alpha() const { return state.alpha; }
};

// trace(W^T alpha)
double assignment_objective(const WeightMatrix& W, const Eigen::MatrixXd& alpha);

// Centralized inexact ADMM.  `warm` seeds alpha/z/u when its shape matches.
// On non-convergence the last iterate is returned with converged == false.
AdmmResult admm_solve(const WeightMatrix& W, const CommGraph& graph, const AdmmConfig& config,
                      const AdmmState* warm = nullptr, Exec exec = Exec::Serial);

// Solves independent instances, one per entry; OpenMP over instances for
// Exec::Parallel.  Results are identical to calling admm_solve in a loop.
struct AdmmInstance {
    WeightMatrix weights;
    CommGraph graph;
};
std::vector<AdmmResult> admm_solve_batch(std::span<const AdmmInstance> instances,
                                         const AdmmConfig& config, Exec exec);

// Per-row argmax, ties to the lowest task index.
std::vector<Eigen::Index> round_assignment(const Eigen::MatrixXd& alpha);

bool is_permutation(std::span<const Eigen::Index> assignment);

struct OracleResult {
    std::vector<Eigen::Index> assignment;  // row -> column
    double objective = 0.0;
};

// Exhaustive search over all n! permutations, n <= 8.
OracleResult oracle_solve(const WeightMatrix& W);
OracleResult oracle_solve(const Eigen::MatrixXd& W);

void write_diagnostics_csv(std::ostream& os, std::span<const IterationStats> history);

}  // namespace coassign
