#pragma once

#include <Eigen/Dense>

#include <vector>

namespace coassign {

// a^T u <= b
struct LinearIneq {
    Eigen::VectorXd a;
    double b = 0.0;
};

enum class QpStatus { Optimal, Infeasible, IterationLimit };

const char* to_string(QpStatus s);

struct QpResult {
    QpStatus status = QpStatus::Infeasible;
    Eigen::VectorXd u;
    Eigen::VectorXd lambda;  // one multiplier per inequality, >= 0
    std::vector<int> active;
    int iterations = 0;

    bool ok() const { return status == QpStatus::Optimal; }
};

inline constexpr double kQpRidge = 1e-9;

// min 1/2 u^T H u + f^T u  s.t.  a_i^T u <= b_i, by the Goldfarb-Idnani dual
// active-set method.  H gets a kQpRidge * I ridge.  Small dense problems only.
QpResult qp_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const std::vector<LinearIneq>& ineq);

}  // namespace coassign
