#include "coassign/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coassign {

IntegratorDynamics::IntegratorDynamics(double v) : v_max(v)
{
    if (!(v > 0.0) || !std::isfinite(v))
        throw ControlError("v_max must be positive");
}

ControlConfig ControlConfig::for_speed(double v_max)
{
    ControlConfig c;
    c.v_max = v_max;
    c.big_m = 1e3 * v_max;
    return c;
}

void ControlConfig::validate(double timestep_duration) const
{
    if (!(v_max > 0.0))
        throw ControlError("v_max must be positive");
    if (big_m < 1e3 * v_max)
        throw ControlError("big_m must be at least 1000 * v_max");
    if (!(dt > 0.0) || dt > 0.1 * timestep_duration + 1e-12)
        throw ControlError("dt must be positive and at most a tenth of a timestep");
    if (!(clf_gain > 0.0) || !(cbf_gain > 0.0))
        throw ControlError("class-K gains must be positive");
    if (!(r_safe > 0.0))
        throw ControlError("r_safe must be positive");
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(Q);
    if ((Q - Q.transpose()).norm() > 1e-12 || es.eigenvalues().minCoeff() < 0.0)
        throw ControlError("Q must be symmetric positive semidefinite");
    if (!(eventually_slope > 0.0) || eventually_slope >= 1.0 / std::sqrt(2.0))
        throw ControlError("eventually_slope must lie in (0, 1/sqrt(2))");
}

ClfEval clf_value_grad(const Point2& x, const ClfSpec& spec)
{
    const Point2 d = x - spec.target;
    const double v = d.norm();
    ClfEval e;
    e.value = v;
    if (v > kClfGuard)
        e.grad = Eigen::Vector2d(d.x, d.y) / v;
    return e;
}

namespace {

Eigen::Vector2d unit_from(const Point2& x, const Point2& q)
{
    const Point2 d = x - q;
    const double n = d.norm();
    if (n <= kClfGuard)
        return Eigen::Vector2d::Zero();
    return Eigen::Vector2d(d.x, d.y) / n;
}

}  // namespace

CbfInstance cbf_eventually(const Point2& q, double r, double a, double b, double v_max, const Point2& x0, double t0)
{
    if (!(b > 0.0))
        throw ControlError("eventually barrier needs b > 0");
    if (!(v_max > 0.0))
        throw ControlError("eventually barrier needs v_max > 0");
    CbfInstance inst;
    inst.eval = [=](const Point2& x, double t) {
        CbfEval e;
        e.h = a * (1.0 - (t - t0) / b) + (r - distance(x, q)) / v_max;
        e.grad = -unit_from(x, q) / v_max;
        e.dt = -a / b;
        return e;
    };
    inst.t_start = t0;
    inst.t_end = t0 + b;
    inst.purpose = CbfPurpose::ScheduledCoObservation;
    const double h0 = inst(x0, t0).h;
    if (h0 < 0.0)
        throw InfeasibleAtActivation("eventually barrier starts negative (h = " + std::to_string(h0) + ")");
    return inst;
}

double eventually_slope(const Point2& q, double r, double b, const Point2& x0, const ControlConfig& config)
{
    const double needed = (distance(x0, q) - r) / config.v_max;
    return std::max(needed, config.eventually_slope * b);
}

CbfInstance cbf_always(const Point2& q, double r, double a, double b, const ControlConfig& config)
{
    if (b < a)
        throw ControlError("always barrier needs a <= b");
    const double mu = config.cbf_mu;
    const double eps = config.cbf_decay;
    const double sigma = config.cbf_sigma;
    if (sigma < mu * std::exp(-eps * a) - 1e-12)
        throw ControlError("cbf_sigma below mu e^{-eps a}: gamma would be positive on the window");
    CbfInstance inst;
    inst.eval = [=](const Point2& x, double t) {
        CbfEval e;
        e.h = mu * std::exp(-eps * t) - sigma + r - distance(x, q);
        e.grad = -unit_from(x, q);
        e.dt = -mu * eps * std::exp(-eps * t);
        return e;
    };
    inst.t_start = 0.0;
    inst.t_end = b;
    inst.purpose = CbfPurpose::ScheduledCoObservation;
    return inst;
}

CbfInstance cbf_conjunction(const CbfInstance& h1, const CbfInstance& h2)
{
    CbfInstance inst;
    auto e1 = h1.eval;
    auto e2 = h2.eval;
    inst.eval = [e1, e2](const Point2& x, double t) {
        const CbfEval a = e1(x, t);
        const CbfEval b = e2(x, t);
        const double m = std::min(a.h, b.h);
        const double ea = std::exp(-(a.h - m));
        const double eb = std::exp(-(b.h - m));
        const double s = ea + eb;
        CbfEval e;
        e.h = m - std::log(s);
        e.grad = (ea * a.grad + eb * b.grad) / s;
        e.dt = (ea * a.dt + eb * b.dt) / s;
        return e;
    };
    inst.t_start = std::max(h1.t_start, h2.t_start);
    inst.t_end = std::min(h1.t_end, h2.t_end);
    inst.purpose = h1.purpose;
    return inst;
}

CbfInstance cbf_collision(const Point2& other, double radius)
{
    CbfInstance inst;
    inst.eval = [=](const Point2& x, double) {
        const Point2 d = x - other;
        CbfEval e;
        e.h = d.dot(d) - radius * radius;
        e.grad = Eigen::Vector2d(2.0 * d.x, 2.0 * d.y);
        return e;
    };
    inst.t_start = -std::numeric_limits<double>::infinity();
    inst.t_end = std::numeric_limits<double>::infinity();
    inst.purpose = CbfPurpose::Collision;
    return inst;
}

namespace {

void add_box(std::vector<LinearIneq>& rows, Eigen::Index n, double box)
{
    for (Eigen::Index k = 0; k < 2; ++k) {
        LinearIneq up{Eigen::VectorXd::Zero(n), box};
        up.a[k] = 1.0;
        LinearIneq lo{Eigen::VectorXd::Zero(n), box};
        lo.a[k] = -1.0;
        rows.push_back(up);
        rows.push_back(lo);
    }
}

}  // namespace

ControlResult reference_control(const Point2& x, const std::vector<ClfRow>& rows, const ControlConfig& config)
{
    const double box = config.v_max / std::sqrt(2.0);
    ControlResult out;

    std::vector<LinearIneq> cons;
    for (const auto& row : rows) {
        const ClfEval v = clf_value_grad(x, row.spec);
        cons.push_back({v.grad, row.relax * config.big_m - config.clf_gain * v.value});
    }
    add_box(cons, 2, box);
    const Eigen::MatrixXd H = 2.0 * config.Q;
    QpResult r = qp_solve(H, Eigen::VectorXd::Zero(2), cons);
    if (r.ok()) {
        out.u = r.u.head<2>();
        out.mode = "exact";
        return out;
    }

    // Shared slack delta >= 0 on every CLF row, penalized in the objective.
    std::vector<LinearIneq> soft;
    for (const auto& row : rows) {
        const ClfEval v = clf_value_grad(x, row.spec);
        Eigen::VectorXd a(3);
        a << v.grad, -1.0;
        soft.push_back({a, row.relax * config.big_m - config.clf_gain * v.value});
    }
    add_box(soft, 3, box);
    soft.push_back({Eigen::Vector3d(0.0, 0.0, -1.0), 0.0});
    Eigen::MatrixXd Hs = Eigen::MatrixXd::Zero(3, 3);
    Hs.topLeftCorner(2, 2) = 2.0 * config.Q;
    Hs(2, 2) = 2.0 * config.slack_penalty;
    r = qp_solve(Hs, Eigen::VectorXd::Zero(3), soft);
    out.status = r.status;
    if (r.ok()) {
        out.u = r.u.head<2>();
        out.mode = "slack";
        return out;
    }
    out.mode = "zero";
    return out;
}

std::vector<ClfRow> clf_rows_from_alpha(const Eigen::VectorXd& alpha_row, const TaskSet& tasks)
{
    if (alpha_row.size() != static_cast<Eigen::Index>(tasks.size()))
        throw ControlError("alpha row length does not match the task set");
    std::vector<ClfRow> rows;
    double on_trajectory = 0.0;
    for (std::size_t j = 0; j <= tasks.secondary_count; ++j)
        on_trajectory += alpha_row[static_cast<Eigen::Index>(j)];
    rows.push_back({{tasks.trajectory, ClfKind::TrajectoryWaypoint}, std::clamp(1.0 - on_trajectory, 0.0, 1.0)});
    for (std::size_t j = 0; j < tasks.online.size(); ++j) {
        const double a = alpha_row[static_cast<Eigen::Index>(1 + tasks.secondary_count + j)];
        rows.push_back({{tasks.online[j].location, ClfKind::OnlineTask}, std::clamp(1.0 - a, 0.0, 1.0)});
    }
    return rows;
}

double barrier_residual(const CbfInstance& b, const Point2& x, double t, const Eigen::Vector2d& u, double beta)
{
    const CbfEval e = b(x, t);
    return e.grad.dot(u) + e.dt + beta * e.h;
}

namespace {

// grad^T u + dt + beta h >= -relax M  <=>  -grad^T u <= dt + beta h + relax M
LinearIneq barrier_ineq(const CbfEval& e, double beta, double relax_m, Eigen::Index n)
{
    LinearIneq row{Eigen::VectorXd::Zero(n), e.dt + beta * e.h + relax_m};
    row.a.head<2>() = -e.grad;
    return row;
}

}  // namespace

ControlResult security_filter(const Point2& x, double t, const Eigen::Vector2d& u_ref,
                              const std::vector<BarrierRow>& rows, const std::vector<Point2>& neighbors,
                              const ControlConfig& config)
{
    const double box = config.v_max / std::sqrt(2.0);
    const double beta = config.cbf_gain;

    std::vector<CbfEval> hard;
    for (const auto& nb : neighbors)
        hard.push_back(cbf_collision(nb, config.r_safe)(x, t));
    std::vector<std::pair<CbfEval, double>> soft;
    for (const auto& row : rows) {
        const CbfEval e = (*row.barrier)(x, t);
        if (row.barrier->purpose == CbfPurpose::Collision)
            hard.push_back(e);
        else
            soft.push_back({e, row.relax});
    }

    auto solve = [&](bool with_soft, bool slack) {
        const Eigen::Index n = slack ? 3 : 2;
        std::vector<LinearIneq> cons;
        for (const auto& e : hard)
            cons.push_back(barrier_ineq(e, beta, 0.0, n));
        if (with_soft) {
            for (const auto& [e, relax] : soft) {
                LinearIneq row = barrier_ineq(e, beta, relax * config.big_m, n);
                if (slack)
                    row.a[2] = -1.0;
                cons.push_back(row);
            }
        }
        add_box(cons, n, box);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
        H.topLeftCorner(2, 2) = 2.0 * Eigen::Matrix2d::Identity();
        Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
        f.head<2>() = -2.0 * u_ref;
        if (slack) {
            cons.push_back({Eigen::Vector3d(0.0, 0.0, -1.0), 0.0});
            H(2, 2) = 2.0 * config.slack_penalty;
        }
        return qp_solve(H, f, cons);
    };

    ControlResult out;
    QpResult r = solve(true, false);
    out.status = r.status;
    if (r.ok()) {
        out.u = r.u.head<2>();
        out.mode = "exact";
        return out;
    }
    if (!soft.empty()) {
        r = solve(true, true);
        if (r.ok()) {
            out.u = r.u.head<2>();
            out.mode = "slack";
            return out;
        }
        r = solve(false, false);
        if (r.ok()) {
            out.u = r.u.head<2>();
            out.mode = "hard_only";
            return out;
        }
    }
    out.u.setZero();
    out.mode = "zero";
    return out;
}

}  // namespace coassign
