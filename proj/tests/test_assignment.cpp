#include "coassign/assignment.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace coassign;

namespace {

// Projection onto the simplex by enumerating the support set: for each
// candidate support S, the KKT point is v_S shifted uniformly; keep the
// feasible one closest to v.
Eigen::VectorXd simplex_by_enumeration(const Eigen::VectorXd& v)
{
    const auto n = static_cast<int>(v.size());
    Eigen::VectorXd best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int mask = 1; mask < (1 << n); ++mask) {
        double sum = 0.0;
        int k = 0;
        for (int i = 0; i < n; ++i)
            if (mask & (1 << i)) {
                sum += v[i];
                ++k;
            }
        const double shift = (sum - 1.0) / k;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        bool ok = true;
        for (int i = 0; i < n; ++i)
            if (mask & (1 << i)) {
                x[i] = v[i] - shift;
                ok = ok && x[i] >= -1e-15;
            }
        if (ok && (x - v).squaredNorm() < best_d) {
            best_d = (x - v).squaredNorm();
            best = x;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("build_weights formulas")
{
    const AdmmConfig cfg;
    const std::vector<Point2> pos{{0, 0}};
    TaskSet t{{3, 4}, 0, {}};
    auto W = build_weights(pos, t, cfg);
    CHECK(W.w(0, 0) == doctest::Approx(1.0 / 5.01));
    CHECK(W.w(0, 0) == doctest::Approx(0.199601).epsilon(1e-6));

    t.trajectory = {0, 0};
    CHECK(build_weights(pos, t, cfg).w(0, 0) == doctest::Approx(100.0));

    SUBCASE("shadow rows")
    {
        const std::vector<Point2> two{{0, 0}, {1, 0}};
        const TaskSet ts{{0, 1}, 0, {{1, {2, 0}}, {2, {0, 3}}}};
        const auto M = build_weights(two, ts, cfg);
        REQUIRE(M.size() == 3);
        CHECK(M.rows[2].kind == AgentKind::Shadow);
        CHECK(M.rows[2].host == 0);
        CHECK(M.w(2, 0) == -cfg.big_m);
        CHECK(M.w(2, 1) == doctest::Approx(-1.0 / (2.0 + cfg.epsilon)));
        CHECK(M.w(2, 2) == doctest::Approx(-1.0 / (3.0 + cfg.epsilon)));
        for (Eigen::Index i = 0; i < 2; ++i)
            for (Eigen::Index j = 0; j < 3; ++j) {
                CHECK(M.w(i, j) > 0.0);
                CHECK(M.w(i, j) <= 1.0 / cfg.epsilon);
            }
    }
    SUBCASE("secondary columns")
    {
        const std::vector<Point2> three{{0, 0}, {1, 0}, {0, 2}};
        const TaskSet ts{{0, 1}, 0, {{7, {2, 0}}}};
        const auto M = build_weights(three, ts, cfg);
        CHECK(M.cols[1] == TaskLabel{TaskKind::Secondary, 1});
        CHECK(M.cols[2] == TaskLabel{TaskKind::Online, 7});
        CHECK(M.w(2, 1) == doctest::Approx(1.0 / (1.0 + cfg.epsilon_prime)));
    }
    SUBCASE("bad epsilon")
    {
        AdmmConfig bad;
        bad.epsilon = 0.0;
        CHECK_THROWS_AS(build_weights(pos, t, bad), AssignmentError);
    }
}

TEST_CASE("squarify")
{
    const TaskSet po{{0, 0}, 0, {{1, {1, 1}}}};
    auto a = squarify(3, po);
    CHECK(a.tasks.size() == 3);
    CHECK(a.tasks.secondary_count == 1);
    CHECK(a.agents.size() == 3);

    const TaskSet poo{{0, 0}, 0, {{1, {1, 1}}, {2, {2, 2}}}};
    auto b = squarify(2, poo);
    REQUIRE(b.agents.size() == 3);
    CHECK(b.agents[2] == AgentLabel{AgentKind::Shadow, 0, 0});

    auto c = squarify(2, po);
    CHECK(c.tasks.size() == 2);
    CHECK(c.agents.size() == 2);

    // round-robin hosting
    const TaskSet many{{0, 0}, 0, {{1, {}}, {2, {}}, {3, {}}, {4, {}}}};
    auto d = squarify(2, many);
    CHECK(d.agents[2].host == 0);
    CHECK(d.agents[3].host == 1);
    CHECK(d.agents[4].host == 0);
    CHECK_THROWS_AS(squarify(0, po), AssignmentError);
}

TEST_CASE("alpha update is a simplex projection")
{
    auto vec = [](std::initializer_list<double> l) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(l.size()));
        Eigen::Index i = 0;
        for (double x : l)
            v[i++] = x;
        return v;
    };
    CHECK(project_simplex(vec({0.5, 0.5})).isApprox(vec({0.5, 0.5})));
    CHECK(project_simplex(vec({0.8, 0.4})).isApprox(vec({0.7, 0.3})));
    CHECK(project_simplex(vec({2, 0})).isApprox(vec({1, 0})));

    // v = z - u + w / rho
    const auto a = alpha_update_local(vec({0.4, 0.0}), vec({0.5, 0.5}), vec({0.1, 0.1}), 1.0);
    CHECK(a.isApprox(vec({0.7, 0.3})));

    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 2.0);
    for (int k = 0; k < 300; ++k) {
        Eigen::VectorXd v(1 + k % 6);
        for (auto& x : v)
            x = nd(rng);
        const auto p = project_simplex(v);
        CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
        CHECK(p.maxCoeff() <= 1.0 + 1e-12);
        CHECK(p.minCoeff() >= -1e-12);
        CHECK((p - simplex_by_enumeration(v)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("z update")
{
    const auto g = CommGraph::complete(2);
    SUBCASE("fixed point when alpha + u equals z")
    {
        Eigen::MatrixXd z(2, 2);
        z << 0.3, 0.7, 0.7, 0.3;
        const Eigen::MatrixXd before = z;
        z_update_inner(z, before, g, 0.25);
        CHECK(z == before);
    }
    SUBCASE("K2 column example")
    {
        Eigen::MatrixXd z(2, 1), s(2, 1);
        z << 0.3, 0.7;
        s << 0.6, 0.4;
        const Eigen::MatrixXd L = oracle::laplacian(2, {{0, 1}});
        const Eigen::MatrixXd expect = z - 0.25 * L * (z - s);
        z_update_inner(z, s, g, 0.25);
        CHECK(z(0, 0) == doctest::Approx(0.45));
        CHECK(z(1, 0) == doctest::Approx(0.55));
        CHECK((z - expect).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(std::abs(z.sum() - 1.0) <= 1e-12);
    }
    SUBCASE("step above the spectral bound is rejected")
    {
        AdmmConfig cfg;
        cfg.gd_step = 0.5;
        CHECK_THROWS_AS(resolve_gd_step(cfg, CommGraph::path(3)), AssignmentError);
        cfg.gd_step = 0.0;
        CHECK(resolve_gd_step(cfg, CommGraph::path(3)) == doctest::Approx(0.9 / 4.0));
        CHECK(resolve_gd_step(cfg, CommGraph(1, {})) == 0.5);
    }
}

TEST_CASE("u update")
{
    Eigen::VectorXd u = Eigen::VectorXd::Zero(2), a(2), z(2);
    a << 1, 0;
    z << 0.5, 0.5;
    const Eigen::VectorXd r = a - z;
    CHECK(u_update_local(u, a, z).isApprox(Eigen::Vector2d(0.5, -0.5)));
    CHECK(u_update_local(u, z, z) == u);
    Eigen::VectorXd acc = u;
    for (int k = 0; k < 7; ++k)
        acc = u_update_local(acc, a, z);
    CHECK(acc.isApprox(u + 7.0 * r));
}

TEST_CASE("column sums are preserved by every inner iteration")
{
    std::mt19937_64 rng(11);
    const AdmmConfig cfg;
    for (int trial = 0; trial < 40; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + trial % 5);
        const auto g = fixture::random_connected(static_cast<std::size_t>(n), rng);
        const auto W = fixture::labelled(fixture::uniform_weights(n, rng));
        CHECK(fixture::worst_column_drift(W, g, cfg, 200) <= 1e-12);
    }
}

TEST_CASE("admm_solve examples")
{
    const AdmmConfig cfg;
    SUBCASE("single agent")
    {
        const auto W = fixture::labelled(Eigen::MatrixXd::Constant(1, 1, 0.7));
        const auto r = admm_solve(W, CommGraph(1, {}), cfg);
        CHECK(r.converged);
        CHECK(r.state.iteration == 1);
        CHECK(r.alpha()(0, 0) == 1.0);
    }
    SUBCASE("agent at the waypoint keeps P")
    {
        Eigen::MatrixXd w(2, 2);
        w << 100.0, 0.200, 0.332, 0.990;
        const auto oracle = oracle::best_permutation(w);
        const auto r = admm_solve(fixture::labelled(w), CommGraph::complete(2), cfg);
        CHECK(r.converged);
        const auto perm = round_assignment(r.alpha());
        CHECK(perm[0] == oracle.perm[0]);
        CHECK(perm[1] == oracle.perm[1]);
        CHECK(perm == std::vector<Eigen::Index>{0, 1});
    }
    SUBCASE("random 4x4 against the oracle")
    {
        std::mt19937_64 rng(5);
        int hits = 0;
        for (int k = 0; k < 20; ++k) {
            const auto w = fixture::uniform_weights(4, rng);
            const auto r = admm_solve(fixture::labelled(w), CommGraph::complete(4), cfg);
            const auto perm = round_assignment(r.alpha());
            hits += is_permutation(perm)
                    && std::abs(fixture::permutation_value(w, perm) - oracle::best_permutation(w).value) <= 1e-12;
        }
        CHECK(hits >= 19);
    }
}

TEST_CASE("warm start and history")
{
    std::mt19937_64 rng(8);
    const auto w = fixture::uniform_weights(3, rng);
    const auto W = fixture::labelled(w);
    const AdmmConfig cfg;
    const auto cold = admm_solve(W, CommGraph::path(3), cfg);
    REQUIRE(cold.converged);
    CHECK(cold.history.size() == static_cast<std::size_t>(cold.state.iteration));
    CHECK(cold.history.back().objective == doctest::Approx(assignment_objective(W, cold.alpha())));
    const auto warm = admm_solve(W, CommGraph::path(3), cfg, &cold.state);
    CHECK(warm.converged);
    CHECK(warm.state.iteration < cold.state.iteration);

    std::ostringstream os;
    write_diagnostics_csv(os, cold.history);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "iteration,primal_residual,dual_residual,objective");
    std::size_t rows = 0;
    while (std::getline(is, line))
        ++rows;
    CHECK(rows == cold.history.size());
}

TEST_CASE("non-convergence is reported, not thrown")
{
    std::mt19937_64 rng(9);
    AdmmConfig cfg;
    cfg.max_outer = 3;
    const auto r = admm_solve(fixture::labelled(fixture::uniform_weights(4, rng)), CommGraph::path(4), cfg);
    CHECK_FALSE(r.converged);
    CHECK(r.state.iteration == 3);
}

TEST_CASE("round_assignment")
{
    CHECK(round_assignment(Eigen::MatrixXd::Identity(3, 3)) == std::vector<Eigen::Index>{0, 1, 2});
    Eigen::MatrixXd tie(1, 2);
    tie << 0.5, 0.5;
    CHECK(round_assignment(tie) == std::vector<Eigen::Index>{0});
    const std::vector<Eigen::Index> dup{0, 0};
    CHECK_FALSE(is_permutation(dup));
}

TEST_CASE("oracle_solve")
{
    Eigen::MatrixXd w(2, 2);
    w << 3, 1, 2, 4;
    const auto r = oracle_solve(w);
    CHECK(r.assignment == std::vector<Eigen::Index>{0, 1});
    CHECK(r.objective == 7.0);
    CHECK_THROWS_AS(oracle_solve(Eigen::MatrixXd::Zero(9, 9)), AssignmentError);
    CHECK_THROWS_AS(oracle_solve(Eigen::MatrixXd::Zero(2, 3)), AssignmentError);

    std::mt19937_64 rng(4);
    for (int k = 0; k < 50; ++k) {
        const auto m = fixture::uniform_weights(2 + k % 5, rng);
        CHECK(oracle_solve(m).objective == doctest::Approx(oracle::best_permutation(m).value).epsilon(1e-14));
    }
}

TEST_CASE("shadow agents never take the trajectory task")
{
    std::mt19937_64 rng(21);
    const auto cfg = AdmmConfig::for_workspace(8.0 * std::sqrt(2.0));
    int violations = 0;
    for (int k = 0; k < 40; ++k) {
        const std::size_t agents = 1 + static_cast<std::size_t>(k % 3);
        const std::size_t online = agents + 1 + static_cast<std::size_t>(k % 2);
        std::vector<Point2> pos;
        for (std::size_t i = 0; i < agents; ++i)
            pos.push_back(fixture::random_point(rng));
        TaskSet ts{fixture::random_point(rng), 0, {}};
        for (std::size_t j = 0; j < online; ++j)
            ts.online.push_back({static_cast<int>(j + 1), fixture::random_point(rng)});
        const auto W = build_weights(pos, ts, cfg);
        const auto best = oracle::best_permutation(W.w);
        for (std::size_t i = 0; i < W.rows.size(); ++i)
            violations += W.rows[i].kind == AgentKind::Shadow && best.perm[i] == 0;
    }
    CHECK(violations == 0);
}

TEST_CASE("secondary tasks leave the primary assignment unchanged")
{
    std::mt19937_64 rng(22);
    const auto cfg = AdmmConfig::for_workspace(8.0 * std::sqrt(2.0));
    for (int k = 0; k < 40; ++k) {
        const std::size_t agents = 3 + static_cast<std::size_t>(k % 3);
        std::vector<Point2> pos;
        for (std::size_t i = 0; i < agents; ++i)
            pos.push_back(fixture::random_point(rng));
        TaskSet ts{fixture::random_point(rng), 0, {}};
        for (std::size_t j = 0; j + 2 < agents; ++j)
            ts.online.push_back({static_cast<int>(j + 1), fixture::random_point(rng)});
        CHECK(fixture::secondary_tasks_neutral(agents, ts, pos, cfg));
    }
}

TEST_CASE("batch solve is identical in serial and parallel")
{
    std::mt19937_64 rng(13);
    std::vector<AdmmInstance> inst;
    for (int k = 0; k < 24; ++k) {
        const auto n = static_cast<std::size_t>(2 + k % 5);
        inst.push_back({fixture::labelled(fixture::uniform_weights(static_cast<Eigen::Index>(n), rng)),
                        fixture::random_connected(n, rng)});
    }
    const AdmmConfig cfg;
    const auto s = admm_solve_batch(inst, cfg, Exec::Serial);
    const auto p = admm_solve_batch(inst, cfg, Exec::Parallel);
    for (std::size_t k = 0; k < inst.size(); ++k) {
        CHECK(s[k].alpha() == p[k].alpha());
        CHECK(s[k].state.iteration == p[k].state.iteration);
        CHECK(s[k].alpha() == admm_solve(inst[k].weights, inst[k].graph, cfg).alpha());
    }
}

TEST_CASE("lyapunov distance is non-increasing")
{
    std::mt19937_64 rng(17);
    for (int k = 0; k < 4; ++k) {
        const auto n = static_cast<Eigen::Index>(2 + k);
        const auto w = fixture::uniform_weights(n, rng);
        const auto g = CommGraph::path(static_cast<std::size_t>(n));
        const double tau = std::min(0.5, 0.9 / spectral_bound(laplacian(g)));
        CHECK(fixture::worst_lyapunov_increase(w, CommGraph::complete(static_cast<std::size_t>(n)), 0.5, true,
                                               1000, 50000)
              <= 1e-9);
        CHECK(fixture::worst_lyapunov_increase(w, g, tau, false, 1000, 50000) <= 1e-9);
    }
}
