#pragma once

// Seeded instance generators and property checks shared by the unit tests
// and the acceptance binary.

#include "coassign/assignment.hpp"
#include "coassign/control.hpp"
#include "coassign/graph.hpp"
#include "coassign/qp.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace fixture {

using namespace coassign;

inline Eigen::MatrixXd uniform_weights(Eigen::Index n, std::mt19937_64& rng, double lo = 0.1, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd w(n, n);
    for (auto& v : w.reshaped())
        v = u(rng);
    return w;
}

inline WeightMatrix labelled(const Eigen::MatrixXd& w)
{
    WeightMatrix W;
    W.w = w;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        W.rows.push_back({AgentKind::Real, static_cast<AgentIndex>(i), static_cast<AgentIndex>(i)});
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        W.cols.push_back(j == 0 ? TaskLabel{TaskKind::Trajectory, 0} : TaskLabel{TaskKind::Online, static_cast<int>(j)});
    return W;
}

// Random spanning tree plus each remaining edge with probability `extra`.
inline CommGraph random_connected(std::size_t n, std::mt19937_64& rng, double extra = 0.3)
{
    std::vector<std::pair<AgentIndex, AgentIndex>> edges;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 1; i < n; ++i)
        edges.emplace_back(std::min<std::size_t>(i - 1, static_cast<std::size_t>(u(rng) * static_cast<double>(i))), i);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (u(rng) < extra)
                edges.emplace_back(i, j);
    return CommGraph(n, edges);
}

inline Point2 random_point(std::mt19937_64& rng, double lo = 0.0, double hi = 8.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    const double x = u(rng);
    return {x, u(rng)};
}

// Convex polygon from sorted random angles on a circle.
inline ConvexPolygon random_polygon(std::mt19937_64& rng, double lo = -5.0, double hi = 5.0, double rmin = 0.2,
                                    double rmax = 2.2)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 3 + static_cast<int>(u(rng) * 5);
    const double cx = lo + (hi - lo) * u(rng);
    const Point2 c{cx, lo + (hi - lo) * u(rng)};
    const double r = rmin + (rmax - rmin) * u(rng);
    std::vector<double> ang;
    for (int i = 0; i < n; ++i)
        ang.push_back(u(rng) * 2 * M_PI);
    std::sort(ang.begin(), ang.end());
    std::vector<Point2> v;
    for (double a : ang) {
        const Point2 p{c.x + r * std::cos(a), c.y + r * std::sin(a)};
        if (v.empty() || (distance(v.back(), p) > 1e-3 && distance(v.front(), p) > 1e-3))
            v.push_back(p);
    }
    if (v.size() < 3)
        return random_polygon(rng, lo, hi, rmin, rmax);
    return ConvexPolygon(v);
}

// Random walk of T waypoints with hops of at most v_max * dt.
inline std::vector<Point2> random_walk(std::mt19937_64& rng, int T, double v_max, Point2 start)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point2> q{start};
    double heading = 2 * M_PI * u(rng);
    for (int t = 1; t < T; ++t) {
        heading += (u(rng) - 0.5) * 1.2;
        const double hop = v_max * (0.3 + 0.7 * u(rng));
        q.push_back(q.back() + Point2{std::cos(heading), std::sin(heading)} * hop);
    }
    return q;
}

inline double permutation_value(const Eigen::MatrixXd& w, const std::vector<Eigen::Index>& perm)
{
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i)
        s += w(static_cast<Eigen::Index>(i), perm[i]);
    return s;
}

// Runs ADMM outer rounds by hand and reports the largest deviation of any z
// column sum from 1 after every inner iteration.
inline double worst_column_drift(const WeightMatrix& W, const CommGraph& g, const AdmmConfig& cfg, int rounds)
{
    const Eigen::Index n = W.size();
    const CommGraph rows = row_graph(g, W.rows);
    const double step = resolve_gd_step(cfg, rows);
    AdmmState st = AdmmState::uniform(n);
    double worst = 0.0;
    for (int k = 0; k < rounds; ++k) {
        for (Eigen::Index i = 0; i < n; ++i)
            st.alpha.row(i) = alpha_update_local(W.w.row(i).transpose(), st.z.row(i).transpose(),
                                                 st.u.row(i).transpose(), cfg.rho)
                                  .transpose();
        const Eigen::MatrixXd s = st.alpha + st.u;
        for (int inner = 0; inner < cfg.inner_iterations; ++inner) {
            z_update_inner(st.z, s, rows, step);
            worst = std::max(worst, (st.z.colwise().sum().array() - 1.0).abs().maxCoeff());
        }
        st.u = st.u + st.alpha - st.z;
    }
    return worst;
}

// Largest one-step increase of the Lyapunov distance ||y^k - y*||^2 along
// an ADMM run with one z-iteration per round.  `projected` uses the exact
// projected z-step with metric I/tau; otherwise the Laplacian step with
// metric pinv(tau L).  y* comes from a long run of the same iteration.
inline double worst_lyapunov_increase(const Eigen::MatrixXd& w, const CommGraph& g, double tau, bool projected,
                                      int steps = 3000, int settle = 200000)
{
    const Eigen::Index n = w.rows();
    const Eigen::MatrixXd L = laplacian(g);
    const Eigen::MatrixXd P = projected ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n) / tau)
                                        : Eigen::MatrixXd((tau * L).completeOrthogonalDecomposition().pseudoInverse());
    auto step = [&](AdmmState& st) {
        for (Eigen::Index i = 0; i < n; ++i)
            st.alpha.row(i) = alpha_update_local(w.row(i).transpose(), st.z.row(i).transpose(),
                                                 st.u.row(i).transpose(), 1.0)
                                  .transpose();
        const Eigen::MatrixXd s = st.alpha + st.u;
        if (projected)
            z_update_projected(st.z, s, tau);
        else
            z_update_inner(st.z, s, g, tau);
        st.u = st.u + st.alpha - st.z;
    };
    AdmmState star = AdmmState::uniform(n);
    for (int k = 0; k < settle; ++k)
        step(star);
    AdmmState st = AdmmState::uniform(n);
    double prev = std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (int k = 0; k < steps; ++k) {
        const Eigen::MatrixXd dz = st.z - star.z;
        const double d = (dz.transpose() * P * dz).trace() + (st.u - star.u).squaredNorm();
        if (std::isfinite(prev))
            worst = std::max(worst, d - prev);
        prev = d;
        step(st);
    }
    return worst;
}

// Tall instance: agents outnumber tasks.  Returns true when the P/O
// assignment of real agents agrees with and without secondary tasks.
inline bool secondary_tasks_neutral(std::size_t agents, const TaskSet& tasks, std::span<const Point2> pos,
                                    const AdmmConfig& cfg)
{
    const WeightMatrix full = build_weights(pos, tasks, cfg);
    const auto with = oracle::best_permutation(full.w);
    // Without secondary columns the problem is rectangular: each primary
    // column takes one distinct agent.
    const Eigen::Index primary = static_cast<Eigen::Index>(1 + tasks.online.size());
    Eigen::MatrixXd core(static_cast<Eigen::Index>(agents), primary);
    for (Eigen::Index j = 0; j < primary; ++j) {
        const TaskLabel want = j == 0 ? TaskLabel{TaskKind::Trajectory, 0}
                                      : TaskLabel{TaskKind::Online, tasks.online[static_cast<std::size_t>(j - 1)].id};
        core.col(j) = full.w.col(*full.column_of(want));
    }
    const auto without = oracle::best_injection(core);
    for (Eigen::Index j = 0; j < primary; ++j) {
        const TaskLabel want = j == 0 ? TaskLabel{TaskKind::Trajectory, 0}
                                      : TaskLabel{TaskKind::Online, tasks.online[static_cast<std::size_t>(j - 1)].id};
        const int col = static_cast<int>(*full.column_of(want));
        const int row_without = without.perm[static_cast<std::size_t>(j)];
        if (with.perm[static_cast<std::size_t>(row_without)] != col)
            return false;
    }
    return true;
}

struct RandomQp {
    Eigen::MatrixXd H;
    Eigen::VectorXd f;
    std::vector<LinearIneq> ineq;
};

// Strictly convex QP with a feasible point: constraints are drawn around a
// random u0 with nonnegative slack.
inline RandomQp random_qp(std::mt19937_64& rng, int n, int m)
{
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> slack(0.0, 1.0);
    RandomQp q;
    Eigen::MatrixXd B(n, n);
    for (auto& v : B.reshaped())
        v = nd(rng);
    q.H = B * B.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    q.f.resize(n);
    for (auto& v : q.f)
        v = 2.0 * nd(rng);
    Eigen::VectorXd u0(n);
    for (auto& v : u0)
        v = nd(rng);
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXd a(n);
        for (auto& v : a)
            v = nd(rng);
        q.ineq.push_back({a, a.dot(u0) + (slack(rng) < 0.3 ? 0.0 : slack(rng))});
    }
    return q;
}

struct EpisodeStats {
    double min_h = std::numeric_limits<double>::infinity();  // enforced barriers, whole window
    double min_pair = std::numeric_limits<double>::infinity();
    bool deadlines_met = true;
    int fallbacks = 0;
};

// Two robots, each bound by an eventually barrier toward its own target
// while its reference controller pulls toward a distractor.  Collision rows
// keep them apart.  Integrated with forward Euler at cfg.dt.
inline EpisodeStats eventually_episode(std::uint64_t seed, const ControlConfig& cfg, double r = 0.5)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r_eff = 0.8 * r;
    std::vector<Point2> x, goal, lure;
    std::vector<CbfInstance> barrier;
    std::vector<double> deadline;
    while (x.size() < 2) {
        const Point2 p = random_point(rng, 0.0, 6.0);
        if (!x.empty() && distance(p, x[0]) < 1.0)
            continue;
        x.push_back(p);
    }
    for (std::size_t i = 0; i < 2; ++i) {
        Point2 q;
        do {
            const double ang = 2 * M_PI * u(rng);
            const double d0 = 1.0 + 2.0 * u(rng);
            q = x[i] + Point2{std::cos(ang), std::sin(ang)} * d0;
        } while (i == 1 && distance(q, goal[0]) < 2.0 * r + cfg.r_safe);
        goal.push_back(q);
        lure.push_back(x[i] + (x[i] - q) * (1.0 + u(rng)));
        const double b = (distance(x[i], q) - r_eff) / (0.5 * cfg.v_max) * (1.0 + 0.3 * u(rng));
        deadline.push_back(b);
        barrier.push_back(cbf_eventually(q, r_eff, eventually_slope(q, r_eff, b, x[i], cfg), b, cfg.v_max, x[i]));
    }
    EpisodeStats st;
    const double t_end = std::max(deadline[0], deadline[1]);
    const int ticks = static_cast<int>(std::ceil(t_end / cfg.dt));
    for (int k = 0; k <= ticks; ++k) {
        const double t = k * cfg.dt;
        st.min_pair = std::min(st.min_pair, distance(x[0], x[1]));
        std::vector<Eigen::Vector2d> us(2, Eigen::Vector2d::Zero());
        for (std::size_t i = 0; i < 2; ++i) {
            if (t <= deadline[i] + 1e-12)
                st.min_h = std::min(st.min_h, barrier[i](x[i], t).h);
            const std::vector<ClfRow> clf{{{lure[i], ClfKind::TrajectoryWaypoint}, 0.0}};
            const auto ref = reference_control(x[i], clf, cfg);
            std::vector<BarrierRow> rows;
            if (t <= deadline[i])
                rows.push_back({&barrier[i], 0.0});
            const auto res = security_filter(x[i], t, ref.u, rows, {x[1 - i]}, cfg);
            st.fallbacks += res.mode != "exact";
            us[i] = res.u;
        }
        for (std::size_t i = 0; i < 2; ++i) {
            // last tick at or before the deadline
            if (t <= deadline[i] && t + cfg.dt > deadline[i])
                st.deadlines_met = st.deadlines_met && distance(x[i], goal[i]) <= r;
            x[i] = x[i] + Point2{us[i].x(), us[i].y()} * cfg.dt;
        }
    }
    return st;
}

}  // namespace fixture
