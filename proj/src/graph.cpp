#include "coassign/graph.hpp"

#include <algorithm>
#include <queue>
#include <string>

namespace coassign {

CommGraph::CommGraph(std::size_t n, std::vector<std::pair<AgentIndex, AgentIndex>> edges)
    : adjacency_(n)
{
    if (n == 0)
        throw GraphError("communication graph needs at least one agent");
    for (auto [a, b] : edges) {
        if (a >= n || b >= n)
            throw GraphError("edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range");
        if (a == b)
            throw GraphError("self-loop on agent " + std::to_string(a));
        if (a > b)
            std::swap(a, b);
        if (std::find(edges_.begin(), edges_.end(), std::pair{a, b}) != edges_.end())
            continue;
        edges_.emplace_back(a, b);
        adjacency_[a].push_back(b);
        adjacency_[b].push_back(a);
    }
    std::sort(edges_.begin(), edges_.end());
    for (auto& nb : adjacency_)
        std::sort(nb.begin(), nb.end());

    std::vector<bool> seen(n, false);
    std::queue<AgentIndex> open;
    open.push(0);
    seen[0] = true;
    std::size_t reached = 1;
    while (!open.empty()) {
        const AgentIndex i = open.front();
        open.pop();
        for (AgentIndex j : adjacency_[i])
            if (!seen[j]) {
                seen[j] = true;
                ++reached;
                open.push(j);
            }
    }
    if (reached != n)
        throw GraphError("communication graph is disconnected (" + std::to_string(reached) + " of "
                         + std::to_string(n) + " agents reachable from agent 0)");
}

CommGraph CommGraph::complete(std::size_t n)
{
    std::vector<std::pair<AgentIndex, AgentIndex>> e;
    for (AgentIndex i = 0; i < n; ++i)
        for (AgentIndex j = i + 1; j < n; ++j)
            e.emplace_back(i, j);
    return CommGraph(n, std::move(e));
}

CommGraph CommGraph::path(std::size_t n)
{
    std::vector<std::pair<AgentIndex, AgentIndex>> e;
    for (AgentIndex i = 0; i + 1 < n; ++i)
        e.emplace_back(i, i + 1);
    return CommGraph(n, std::move(e));
}

bool CommGraph::adjacent(AgentIndex i, AgentIndex j) const
{
    const auto& nb = adjacency_.at(i);
    return std::binary_search(nb.begin(), nb.end(), j);
}

std::size_t CommGraph::max_degree() const
{
    std::size_t d = 0;
    for (const auto& nb : adjacency_)
        d = std::max(d, nb.size());
    return d;
}

CommGraph CommGraph::induced(std::span<const AgentIndex> keep) const
{
    std::vector<std::pair<AgentIndex, AgentIndex>> e;
    for (std::size_t a = 0; a < keep.size(); ++a)
        for (std::size_t b = a + 1; b < keep.size(); ++b)
            if (adjacent(keep[a], keep[b]))
                e.emplace_back(a, b);
    return CommGraph(keep.size(), std::move(e));
}

LaplacianMatrix laplacian(const CommGraph& g)
{
    const auto n = static_cast<Eigen::Index>(g.size());
    LaplacianMatrix L = LaplacianMatrix::Zero(n, n);
    for (auto [a, b] : g.edges()) {
        const auto i = static_cast<Eigen::Index>(a);
        const auto j = static_cast<Eigen::Index>(b);
        L(i, j) = -1.0;
        L(j, i) = -1.0;
        L(i, i) += 1.0;
        L(j, j) += 1.0;
    }
    return L;
}

Eigen::VectorXd local_laplacian_apply(const Eigen::VectorXd& own,
                                      std::span<const Eigen::VectorXd> neighbor_values)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(own.size());
    for (const auto& v : neighbor_values)
        out += own - v;
    return out;
}

double spectral_bound(const LaplacianMatrix& L)
{
    return 2.0 * L.diagonal().maxCoeff();
}

}  // namespace coassign
