#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace coassign {

using AgentIndex = std::size_t;

class GraphError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Undirected, connected communication graph.  Neighbor lists are kept in
// ascending order; distributed and centralized updates both iterate them in
// that order so their floating-point results agree bit for bit.
class CommGraph {
public:
    CommGraph(std::size_t n, std::vector<std::pair<AgentIndex, AgentIndex>> edges);

    static CommGraph complete(std::size_t n);
    static CommGraph path(std::size_t n);

    std::size_t size() const { return adjacency_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<std::pair<AgentIndex, AgentIndex>>& edges() const { return edges_; }
    const std::vector<AgentIndex>& neighbors(AgentIndex i) const { return adjacency_.at(i); }
    bool adjacent(AgentIndex i, AgentIndex j) const;
    std::size_t max_degree() const;

    // Induced subgraph on `keep` (relabelled 0..keep.size()-1 in the given
    // order).  Throws GraphError if the result is disconnected.
    CommGraph induced(std::span<const AgentIndex> keep) const;

private:
    std::vector<std::pair<AgentIndex, AgentIndex>> edges_;
    std::vector<std::vector<AgentIndex>> adjacency_;
};

using LaplacianMatrix = Eigen::MatrixXd;

LaplacianMatrix laplacian(const CommGraph& g);

// Row i of L*V computed from i's own vector and its neighbors' vectors:
// sum over neighbors of (own - v_j).
Eigen::VectorXd local_laplacian_apply(const Eigen::VectorXd& own,
                                      std::span<const Eigen::VectorXd> neighbor_values);

// Gershgorin bound 2 * max degree on the largest Laplacian eigenvalue.
double spectral_bound(const LaplacianMatrix& L);

}  // namespace coassign
