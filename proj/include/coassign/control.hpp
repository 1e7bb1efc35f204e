#pragma once

#include "coassign/assignment.hpp"
#include "coassign/geometry.hpp"
#include "coassign/qp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coassign {

struct RobotState {
    Point2 position;
    int team = 0;
    int agent = 0;
};

struct IntegratorDynamics {
    double v_max = 0.5;

    explicit IntegratorDynamics(double v);
    // Per-axis bound of the input box inscribed in the speed disc.
    double box() const { return v_max / std::sqrt(2.0); }
};

struct ControlConfig {
    Eigen::Matrix2d Q = Eigen::Matrix2d::Identity();
    double clf_gain = 1.0;
    double cbf_gain = 2.0;
    double big_m = 500.0;
    double cbf_decay = 0.5;
    double cbf_mu = 1.0;
    double cbf_sigma = 1.0;
    double r_safe = 0.15;
    double dt = 0.01;
    double v_max = 0.5;
    // Minimum decay slope of an eventually barrier, as a fraction of v_max.
    double eventually_slope = 0.55;
    // Weight on the CLF slack when the exact reference program is infeasible.
    double slack_penalty = 1e6;

    static ControlConfig for_speed(double v_max);
    void validate(double timestep_duration) const;
};

class ControlError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InfeasibleAtActivation : public ControlError {
public:
    using ControlError::ControlError;
};

enum class ClfKind { TrajectoryWaypoint, OnlineTask };

struct ClfSpec {
    Point2 target;
    ClfKind kind = ClfKind::TrajectoryWaypoint;
};

struct ClfEval {
    double value = 0.0;
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
};

inline constexpr double kClfGuard = 1e-9;

ClfEval clf_value_grad(const Point2& x, const ClfSpec& spec);

struct CbfEval {
    double h = 0.0;
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    double dt = 0.0;  // partial derivative in time
};

enum class CbfPurpose { ScheduledCoObservation, Regroup, Collision };

struct CbfInstance {
    std::function<CbfEval(const Point2&, double)> eval;
    double t_start = 0.0;
    double t_end = 0.0;
    CbfPurpose purpose = CbfPurpose::ScheduledCoObservation;
    bool active = true;

    bool in_window(double t) const { return active && t >= t_start && t <= t_end; }
    CbfEval operator()(const Point2& x, double t) const { return eval(x, t); }
};

// F_[0,b] d(x,q) <= r, started at t0:
// h = a (1 - (t - t0) / b) + (r - d(x,q)) / v_max.
// Throws InfeasibleAtActivation when h(x0, t0) < 0.
CbfInstance cbf_eventually(const Point2& q, double r, double a, double b, double v_max, const Point2& x0,
                           double t0 = 0.0);

// Slope a for an eventually barrier from x0: never below what h(x0,t0) >= 0
// needs, otherwise eventually_slope * b.
double eventually_slope(const Point2& q, double r, double b, const Point2& x0, const ControlConfig& config);

// G_[a,b] d(x,q) <= r: h = mu e^{-eps t} - sigma + r - d(x,q).
CbfInstance cbf_always(const Point2& q, double r, double a, double b, const ControlConfig& config);

// Smooth min: h = -ln(e^{-h1} + e^{-h2}).
CbfInstance cbf_conjunction(const CbfInstance& h1, const CbfInstance& h2);

// h = d(x,c)^2 - radius^2 around a point that is static within a tick.
CbfInstance cbf_collision(const Point2& other, double radius);

// One CLF row: relaxation fraction in [0,1] scales big_m.
struct ClfRow {
    ClfSpec spec;
    double relax = 0.0;
};

struct ControlResult {
    Eigen::Vector2d u = Eigen::Vector2d::Zero();
    QpStatus status = QpStatus::Optimal;
    std::string mode;  // "exact", "slack", "hard_only", "zero"
};

// CLF program: min u^T Q u s.t. grad V^T u + gamma V <= relax * big_m for
// every row, plus the speed box.  Falls back to a penalized CLF slack when
// the exact program is infeasible.
ControlResult reference_control(const Point2& x, const std::vector<ClfRow>& rows, const ControlConfig& config);

// Trajectory + online-task CLF rows from one agent's raw alpha row.
std::vector<ClfRow> clf_rows_from_alpha(const Eigen::VectorXd& alpha_row, const TaskSet& tasks);

struct BarrierRow {
    const CbfInstance* barrier = nullptr;
    double relax = 0.0;  // 0 enforces the row, 1 fully relaxes it
};

// min ||u - u_ref||^2 s.t. dh/dt + beta h >= -relax * big_m for every row,
// hard collision rows with each neighbor, speed box.
ControlResult security_filter(const Point2& x, double t, const Eigen::Vector2d& u_ref,
                              const std::vector<BarrierRow>& rows, const std::vector<Point2>& neighbors,
                              const ControlConfig& config);

// Left-hand side dh/dt + beta h of a barrier row for a given input.
double barrier_residual(const CbfInstance& b, const Point2& x, double t, const Eigen::Vector2d& u, double beta);

}  // namespace coassign
