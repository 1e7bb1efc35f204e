#include "coassign/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

namespace coassign {

std::string TaskLabel::str() const
{
    switch (kind) {
    case TaskKind::Trajectory: return "P";
    case TaskKind::Secondary: return fmt::format("P'{}", id);
    case TaskKind::Online: return fmt::format("O{}", id);
    }
    return "?";
}

std::string AgentLabel::str() const
{
    if (kind == AgentKind::Real)
        return fmt::format("A{}", index);
    return fmt::format("S{}@A{}", index, host);
}

std::vector<TaskLabel> TaskSet::labels() const
{
    std::vector<TaskLabel> out;
    out.reserve(size());
    out.push_back({TaskKind::Trajectory, 0});
    for (std::size_t k = 0; k < secondary_count; ++k)
        out.push_back({TaskKind::Secondary, static_cast<int>(k + 1)});
    for (const auto& o : online)
        out.push_back({TaskKind::Online, o.id});
    return out;
}

AdmmConfig AdmmConfig::for_workspace(double diameter)
{
    AdmmConfig c;
    c.epsilon_prime = 10.0 * diameter;
    c.big_m = 2.5 / c.epsilon;
    return c;
}

void AdmmConfig::validate() const
{
    if (!(rho > 0.0))
        throw AssignmentError("admm.rho must be positive");
    if (!(epsilon > 0.0))
        throw AssignmentError("admm.epsilon must be positive");
    if (!(epsilon_prime > epsilon))
        throw AssignmentError("admm.epsilon_prime must exceed admm.epsilon");
    if (!(big_m > 2.0 / epsilon))
        throw AssignmentError(fmt::format("admm.big_m = {} must exceed 2/epsilon = {}", big_m, 2.0 / epsilon));
    if (gd_step < 0.0)
        throw AssignmentError("admm.gd_step must be non-negative (0 selects the default)");
    if (inner_iterations < 1)
        throw AssignmentError("admm.inner_iterations must be at least 1");
    if (max_outer < 1)
        throw AssignmentError("admm.max_outer must be at least 1");
    if (!(residual_tol > 0.0))
        throw AssignmentError("admm.residual_tol must be positive");
}

SquareLayout squarify(std::size_t agent_count, const TaskSet& tasks)
{
    if (agent_count == 0)
        throw AssignmentError("squarify needs at least one agent");
    SquareLayout out;
    out.tasks = tasks;
    for (AgentIndex i = 0; i < agent_count; ++i)
        out.agents.push_back({AgentKind::Real, i, i});

    const std::size_t n_tasks = tasks.size();
    if (agent_count > n_tasks) {
        out.tasks.secondary_count += agent_count - n_tasks;
    } else if (agent_count < n_tasks) {
        for (std::size_t l = 0; l < n_tasks - agent_count; ++l)
            out.agents.push_back({AgentKind::Shadow, l, l % agent_count});
    }
    return out;
}

std::optional<Eigen::Index> WeightMatrix::column_of(const TaskLabel& t) const
{
    for (std::size_t j = 0; j < cols.size(); ++j)
        if (cols[j] == t)
            return static_cast<Eigen::Index>(j);
    return std::nullopt;
}

WeightMatrix build_weights(std::span<const Point2> agent_positions, const TaskSet& tasks,
                           const AdmmConfig& config)
{
    config.validate();
    for (const auto& p : agent_positions)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw AssignmentError("agent position is not finite");

    const SquareLayout layout = squarify(agent_positions.size(), tasks);
    WeightMatrix W;
    W.rows = layout.agents;
    W.cols = layout.tasks.labels();
    const auto n = static_cast<Eigen::Index>(W.rows.size());
    W.w.resize(n, n);

    const double eps = config.epsilon;
    for (Eigen::Index i = 0; i < n; ++i) {
        const AgentLabel& a = W.rows[static_cast<std::size_t>(i)];
        const Point2 x = agent_positions[a.host];
        const double d_traj = distance(layout.tasks.trajectory, x);
        if (a.kind == AgentKind::Real && d_traj >= config.epsilon_prime)
            throw AssignmentError("admm.epsilon_prime must exceed every agent-to-waypoint distance");
        Eigen::Index j = 0;
        W.w(i, j++) = a.kind == AgentKind::Real ? 1.0 / (d_traj + eps) : -config.big_m;
        for (std::size_t k = 0; k < layout.tasks.secondary_count; ++k)
            W.w(i, j++) = 1.0 / (d_traj + config.epsilon_prime);
        for (const auto& o : layout.tasks.online) {
            const double wo = 1.0 / (distance(o.location, x) + eps);
            W.w(i, j++) = a.kind == AgentKind::Real ? wo : -wo;
        }
    }
    return W;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v)
{
    const Eigen::Index n = v.size();
    std::vector<double> s(v.data(), v.data() + n);
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        cum += s[static_cast<std::size_t>(k)];
        const double t = (cum - 1.0) / static_cast<double>(k + 1);
        if (s[static_cast<std::size_t>(k)] - t > 0.0)
            theta = t;
    }
    Eigen::VectorXd out(n);
    for (Eigen::Index k = 0; k < n; ++k)
        out(k) = std::max(v(k) - theta, 0.0);
    return out;
}

Eigen::VectorXd alpha_update_local(const Eigen::VectorXd& w_i, const Eigen::VectorXd& z_i,
                                   const Eigen::VectorXd& u_i, double rho)
{
    // argmin 1/2 a^T a + (-z + u - w/rho)^T a on the simplex is the
    // projection of z - u + w/rho.
    return project_simplex(z_i - u_i + w_i / rho);
}

Eigen::VectorXd u_update_local(const Eigen::VectorXd& u_i, const Eigen::VectorXd& alpha_i,
                               const Eigen::VectorXd& z_i)
{
    return u_i + alpha_i - z_i;
}

AdmmState AdmmState::uniform(Eigen::Index n)
{
    AdmmState s;
    const double v = 1.0 / static_cast<double>(n);
    s.alpha = Eigen::MatrixXd::Constant(n, n, v);
    s.z = s.alpha;
    s.u = Eigen::MatrixXd::Zero(n, n);
    return s;
}

CommGraph row_graph(const CommGraph& physical, std::span<const AgentLabel> rows)
{
    std::vector<std::pair<AgentIndex, AgentIndex>> e;
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = a + 1; b < rows.size(); ++b) {
            const AgentIndex ha = rows[a].host, hb = rows[b].host;
            if (ha == hb || physical.adjacent(ha, hb))
                e.emplace_back(a, b);
        }
    return CommGraph(rows.size(), std::move(e));
}

double resolve_gd_step(const AdmmConfig& config, const CommGraph& rows)
{
    const double bound = 2.0 * static_cast<double>(rows.max_degree());
    const double cap = bound > 0.0 ? 0.9 / bound : 0.5;
    if (config.gd_step == 0.0)
        return std::min(0.5, cap);
    if (config.gd_step > cap * (1.0 + 1e-12))
        throw AssignmentError(fmt::format("admm.gd_step = {} exceeds the spectral safety bound {}",
                                          config.gd_step, cap));
    return config.gd_step;
}

Eigen::VectorXd z_update_row(const Eigen::VectorXd& z_i, const Eigen::VectorXd& s_i,
                             std::span<const Eigen::VectorXd> neighbor_z,
                             std::span<const Eigen::VectorXd> neighbor_s, double step)
{
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(z_i.size());
    for (std::size_t k = 0; k < neighbor_z.size(); ++k)
        acc += (z_i - neighbor_z[k]) - (s_i - neighbor_s[k]);
    return z_i - step * acc;
}

void z_update_inner(Eigen::MatrixXd& z, const Eigen::MatrixXd& alpha_plus_u, const CommGraph& rows,
                    double step)
{
    const Eigen::Index n = z.rows();
    const Eigen::MatrixXd z_old = z;
    std::vector<Eigen::VectorXd> nz, ns;
    for (Eigen::Index i = 0; i < n; ++i) {
        nz.clear();
        ns.clear();
        for (AgentIndex j : rows.neighbors(static_cast<AgentIndex>(i))) {
            nz.emplace_back(z_old.row(static_cast<Eigen::Index>(j)).transpose());
            ns.emplace_back(alpha_plus_u.row(static_cast<Eigen::Index>(j)).transpose());
        }
        z.row(i) = z_update_row(z_old.row(i).transpose(), alpha_plus_u.row(i).transpose(), nz, ns, step)
                       .transpose();
    }
}

void z_update_projected(Eigen::MatrixXd& z, const Eigen::MatrixXd& alpha_plus_u, double tau)
{
    Eigen::MatrixXd v = z + tau * (alpha_plus_u - z);
    const auto n = static_cast<double>(z.rows());
    for (Eigen::Index j = 0; j < v.cols(); ++j)
        v.col(j).array() -= (v.col(j).sum() - 1.0) / n;
    z = v;
}

double assignment_objective(const WeightMatrix& W, const Eigen::MatrixXd& alpha)
{
    return (W.w.array() * alpha.array()).sum();
}

namespace {

void alpha_step(AdmmState& st, const Eigen::MatrixXd& w, double rho, Exec exec)
{
    const Eigen::Index n = w.rows();
    auto row = [&](Eigen::Index i) {
        st.alpha.row(i) = alpha_update_local(w.row(i).transpose(), st.z.row(i).transpose(),
                                             st.u.row(i).transpose(), rho)
                              .transpose();
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (Eigen::Index i = 0; i < n; ++i)
            row(i);
    } else {
        for (Eigen::Index i = 0; i < n; ++i)
            row(i);
    }
}

bool shape_matches(const AdmmState& s, Eigen::Index n)
{
    return s.alpha.rows() == n && s.alpha.cols() == n && s.z.rows() == n && s.z.cols() == n
        && s.u.rows() == n && s.u.cols() == n;
}

}  // namespace

AdmmResult admm_solve(const WeightMatrix& W, const CommGraph& graph, const AdmmConfig& config,
                      const AdmmState* warm, Exec exec)
{
    config.validate();
    const Eigen::Index n = W.size();
    if (W.w.cols() != n || n == 0)
        throw AssignmentError("admm_solve needs a non-empty square weight matrix (squarify first)");
    for (const auto& r : W.rows)
        if (r.host >= graph.size())
            throw AssignmentError("weight row hosted on an agent outside the communication graph");

    const CommGraph rows = row_graph(graph, W.rows);
    const double step = resolve_gd_step(config, rows);

    AdmmResult res;
    res.state = (warm && shape_matches(*warm, n)) ? *warm : AdmmState::uniform(n);
    res.state.iteration = 0;
    AdmmState& st = res.state;

    for (int k = 1; k <= config.max_outer; ++k) {
        const Eigen::MatrixXd z_prev = st.z;
        alpha_step(st, W.w, config.rho, exec);
        const Eigen::MatrixXd s = st.alpha + st.u;
        for (int inner = 0; inner < config.inner_iterations; ++inner)
            z_update_inner(st.z, s, rows, step);
        st.u = st.u + st.alpha - st.z;

        st.iteration = k;
        st.primal_residual = (st.alpha - st.z).norm();
        st.dual_residual = config.rho * (st.z - z_prev).norm();
        res.history.push_back({k, st.primal_residual, st.dual_residual, assignment_objective(W, st.alpha)});
        if (st.primal_residual < config.residual_tol && st.dual_residual < config.residual_tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

std::vector<AdmmResult> admm_solve_batch(std::span<const AdmmInstance> instances,
                                         const AdmmConfig& config, Exec exec)
{
    std::vector<AdmmResult> out(instances.size());
    const auto count = static_cast<std::ptrdiff_t>(instances.size());
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t k = 0; k < count; ++k)
            out[static_cast<std::size_t>(k)] =
                admm_solve(instances[static_cast<std::size_t>(k)].weights,
                           instances[static_cast<std::size_t>(k)].graph, config);
    } else {
        for (std::ptrdiff_t k = 0; k < count; ++k)
            out[static_cast<std::size_t>(k)] =
                admm_solve(instances[static_cast<std::size_t>(k)].weights,
                           instances[static_cast<std::size_t>(k)].graph, config);
    }
    return out;
}

std::vector<Eigen::Index> round_assignment(const Eigen::MatrixXd& alpha)
{
    std::vector<Eigen::Index> out(static_cast<std::size_t>(alpha.rows()));
    for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < alpha.cols(); ++j)
            if (alpha(i, j) > alpha(i, best))
                best = j;
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

bool is_permutation(std::span<const Eigen::Index> assignment)
{
    std::vector<bool> used(assignment.size(), false);
    for (Eigen::Index j : assignment) {
        if (j < 0 || static_cast<std::size_t>(j) >= assignment.size() || used[static_cast<std::size_t>(j)])
            return false;
        used[static_cast<std::size_t>(j)] = true;
    }
    return true;
}

OracleResult oracle_solve(const Eigen::MatrixXd& W)
{
    const Eigen::Index n = W.rows();
    if (W.cols() != n)
        throw AssignmentError("oracle_solve needs a square weight matrix");
    if (n > 8)
        throw AssignmentError(fmt::format("oracle_solve supports n <= 8, got {}", n));
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    OracleResult best;
    best.objective = -std::numeric_limits<double>::infinity();
    do {
        double obj = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            obj += W(i, perm[static_cast<std::size_t>(i)]);
        if (obj > best.objective) {
            best.objective = obj;
            best.assignment = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

OracleResult oracle_solve(const WeightMatrix& W)
{
    return oracle_solve(W.w);
}

void write_diagnostics_csv(std::ostream& os, std::span<const IterationStats> history)
{
    os << "iteration,primal_residual,dual_residual,objective\n";
    for (const auto& h : history)
        os << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", h.iteration, h.primal_residual, h.dual_residual,
                          h.objective);
}

}  // namespace coassign
