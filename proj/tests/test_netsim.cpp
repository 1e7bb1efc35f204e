#include "coassign/netsim.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace coassign;

namespace {

// Per-row max difference between the distributed and centralized matrices.
double row_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("single node converges in one round")
{
    const auto W = fixture::labelled(Eigen::MatrixXd::Constant(1, 1, 0.4));
    Network net(CommGraph(1, {}), W, AdmmConfig{});
    net.run_round();
    CHECK(net.assemble().alpha(0, 0) == 1.0);
    CHECK(net.assemble().z(0, 0) == 1.0);
    CHECK(net.messages_sent() == 0);
}

TEST_CASE("K2 exchanges keep z columns summing to one")
{
    std::mt19937_64 rng(2);
    const auto W = fixture::labelled(fixture::uniform_weights(2, rng));
    Network net(CommGraph::complete(2), W, AdmmConfig{});
    for (int k = 0; k < 50; ++k) {
        net.run_round();
        const auto st = net.assemble();
        CHECK((st.z.colwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("distributed equals centralized")
{
    std::mt19937_64 rng(31);
    const AdmmConfig cfg;
    SUBCASE("path of three")
    {
        const auto W = fixture::labelled(fixture::uniform_weights(3, rng));
        const auto d = run_distributed_admm(CommGraph::path(3), W, cfg);
        const auto c = admm_solve(W, CommGraph::path(3), cfg);
        CHECK(d.state.alpha == c.state.alpha);
        CHECK(round_assignment(d.state.alpha) == round_assignment(c.alpha()));
        CHECK(d.converged == c.converged);
        CHECK(d.message_count == 2u * 2u * 5u * static_cast<std::size_t>(c.state.iteration));
    }
    SUBCASE("random topologies with shadow rows")
    {
        for (int k = 0; k < 15; ++k) {
            const std::size_t agents = 2 + static_cast<std::size_t>(k % 4);
            const auto g = fixture::random_connected(agents, rng);
            std::vector<Point2> pos;
            for (std::size_t i = 0; i < agents; ++i)
                pos.push_back(fixture::random_point(rng));
            TaskSet ts{fixture::random_point(rng), 0, {}};
            const std::size_t online = static_cast<std::size_t>(k % 5);
            for (std::size_t j = 0; j < online; ++j)
                ts.online.push_back({static_cast<int>(j + 1), fixture::random_point(rng)});
            const auto W = build_weights(pos, ts, AdmmConfig::for_workspace(8.0 * std::sqrt(2.0)));
            const auto d = run_distributed_admm(g, W, cfg);
            const auto c = admm_solve(W, g, cfg);
            CHECK(row_gap(d.state.alpha, c.state.alpha) <= 1e-12);
            CHECK(row_gap(d.state.z, c.state.z) <= 1e-12);
            CHECK(row_gap(d.state.u, c.state.u) <= 1e-12);
            CHECK(d.history.size() == c.history.size());
            CHECK(d.audit_violations == 0);
            CHECK(d.message_count
                  == 2 * g.edge_count() * static_cast<std::size_t>(cfg.inner_iterations)
                      * static_cast<std::size_t>(c.state.iteration));
        }
    }
}

TEST_CASE("message count arithmetic")
{
    std::mt19937_64 rng(6);
    AdmmConfig cfg;
    cfg.max_outer = 100;
    cfg.residual_tol = 1e-300;  // never stops early
    const auto W = fixture::labelled(fixture::uniform_weights(3, rng));
    const auto d = run_distributed_admm(CommGraph::path(3), W, cfg);
    CHECK_FALSE(d.converged);
    CHECK(d.message_count == 2000);
}

TEST_CASE("complete and path topologies reach the same optimum")
{
    std::mt19937_64 rng(12);
    const AdmmConfig cfg;
    for (int k = 0; k < 5; ++k) {
        const auto w = fixture::uniform_weights(4, rng);
        const auto W = fixture::labelled(w);
        const auto a = run_distributed_admm(CommGraph::complete(4), W, cfg);
        const auto b = run_distributed_admm(CommGraph::path(4), W, cfg);
        const auto best = oracle::best_permutation(w).value;
        CHECK(fixture::permutation_value(w, round_assignment(a.state.alpha)) == doctest::Approx(best));
        CHECK(fixture::permutation_value(w, round_assignment(b.state.alpha)) == doctest::Approx(best));
        CHECK(a.message_count != b.message_count);
    }
}

TEST_CASE("message logs round-trip and replay")
{
    std::mt19937_64 rng(14);
    const AdmmConfig cfg;
    const auto g = fixture::random_connected(4, rng);
    const auto W = fixture::labelled(fixture::uniform_weights(4, rng));
    MessageLog log;
    const auto live = run_distributed_admm(g, W, cfg, nullptr, Exec::Serial, &log);
    REQUIRE(!log.empty());
    CHECK(log.size() == 2 * live.message_count);
    for (const auto& m : log)
        CHECK(g.adjacent(m.sender, m.receiver));

    std::stringstream csv;
    write_message_log_csv(csv, log);
    CHECK(read_message_log_csv(csv) == log);

    std::stringstream bin;
    write_message_log_binary(bin, log);
    CHECK(read_message_log_binary(bin) == log);

    const auto rep = replay_distributed_admm(g, W, cfg, log);
    CHECK(rep.replay_mismatches == 0);
    CHECK(rep.state.alpha == live.state.alpha);

    auto tampered = log;
    tampered[3].payload[0] += 1e-3;
    const auto bad = replay_distributed_admm(g, W, cfg, tampered);
    CHECK(bad.replay_mismatches > 0);

    std::stringstream junk("round,sender\n1,2\n");
    CHECK_THROWS_AS(read_message_log_csv(junk), NetsimError);
    std::stringstream short_bin(bin.str().substr(0, 10));
    CHECK_THROWS_AS(read_message_log_binary(short_bin), NetsimError);
}

TEST_CASE("parallel rounds reproduce serial rounds")
{
    std::mt19937_64 rng(15);
    const AdmmConfig cfg;
    for (int k = 0; k < 5; ++k) {
        const std::size_t n = 3 + static_cast<std::size_t>(k);
        const auto g = fixture::random_connected(n, rng);
        const auto W = fixture::labelled(fixture::uniform_weights(static_cast<Eigen::Index>(n), rng));
        MessageLog ls, lp;
        const auto s = run_distributed_admm(g, W, cfg, nullptr, Exec::Serial, &ls);
        const auto p = run_distributed_admm(g, W, cfg, nullptr, Exec::Parallel, &lp);
        CHECK(s.state.alpha == p.state.alpha);
        CHECK(s.message_count == p.message_count);
        CHECK(ls == lp);
    }
}
