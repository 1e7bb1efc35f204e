#include "coassign/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coassign {

const char* to_string(QpStatus s)
{
    switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::IterationLimit: return "iteration_limit";
    }
    return "?";
}

QpResult qp_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const std::vector<LinearIneq>& ineq)
{
    const Eigen::Index n = H.rows();
    if (H.cols() != n || f.size() != n)
        throw std::invalid_argument("qp_solve: dimension mismatch");
    const Eigen::Index m = static_cast<Eigen::Index>(ineq.size());
    for (const auto& c : ineq)
        if (c.a.size() != n)
            throw std::invalid_argument("qp_solve: constraint dimension mismatch");

    // Internally constraints read n_i^T u >= d_i with n_i = -a_i, d_i = -b_i.
    const Eigen::MatrixXd Hr = H + kQpRidge * Eigen::MatrixXd::Identity(n, n);
    const Eigen::LLT<Eigen::MatrixXd> llt(Hr);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("qp_solve: H is not positive definite");
    const Eigen::MatrixXd Hinv = llt.solve(Eigen::MatrixXd::Identity(n, n));

    QpResult res;
    res.u = -Hinv * f;
    res.lambda = Eigen::VectorXd::Zero(m);
    std::vector<int>& A = res.active;
    std::vector<double> lam;  // multipliers of A, same order

    auto normal = [&](int i) -> Eigen::VectorXd { return -ineq[static_cast<std::size_t>(i)].a; };
    auto slack = [&](int i) { return normal(i).dot(res.u) + ineq[static_cast<std::size_t>(i)].b; };

    const double scale = 1.0 + f.cwiseAbs().maxCoeff();
    const double feas_tol = 1e-12 * scale;
    const int max_iter = 50 * static_cast<int>(m + n + 1);

    while (res.iterations < max_iter) {
        ++res.iterations;
        int p = -1;
        double worst = -feas_tol;
        for (int i = 0; i < m; ++i) {
            if (std::find(A.begin(), A.end(), i) != A.end())
                continue;
            const double s = slack(i);
            if (s < worst) {
                worst = s;
                p = i;
            }
        }
        if (p < 0) {
            res.status = QpStatus::Optimal;
            for (std::size_t k = 0; k < A.size(); ++k)
                res.lambda[A[k]] = lam[k];
            return res;
        }

        const Eigen::VectorXd np = normal(p);
        double lam_p = 0.0;
        while (true) {
            // Primal direction z and dual direction r for the current active set.
            const Eigen::Index q = static_cast<Eigen::Index>(A.size());
            Eigen::VectorXd z;
            Eigen::VectorXd r(q);
            if (q == 0) {
                z = Hinv * np;
            } else {
                Eigen::MatrixXd N(n, q);
                for (Eigen::Index k = 0; k < q; ++k)
                    N.col(k) = normal(A[static_cast<std::size_t>(k)]);
                const Eigen::MatrixXd HN = Hinv * N;
                const Eigen::MatrixXd S = N.transpose() * HN;
                r = S.ldlt().solve(HN.transpose() * np);
                z = Hinv * np - HN * r;
            }

            double t1 = std::numeric_limits<double>::infinity();
            int drop = -1;
            for (Eigen::Index k = 0; k < q; ++k) {
                if (r[k] > 1e-14) {
                    const double t = lam[static_cast<std::size_t>(k)] / r[k];
                    if (t < t1) {
                        t1 = t;
                        drop = static_cast<int>(k);
                    }
                }
            }
            const double zn = z.dot(np);
            double t2 = std::numeric_limits<double>::infinity();
            if (z.norm() > 1e-14 * (1.0 + np.norm()) && zn > 0.0)
                t2 = -slack(p) / zn;

            if (std::isinf(t1) && std::isinf(t2)) {
                res.status = QpStatus::Infeasible;
                return res;
            }
            const double t = std::min(t1, t2);
            for (Eigen::Index k = 0; k < q; ++k)
                lam[static_cast<std::size_t>(k)] -= t * r[k];
            lam_p += t;
            if (!std::isinf(t2))
                res.u += t * z;

            if (t2 <= t1) {
                A.push_back(p);
                lam.push_back(lam_p);
                break;
            }
            A.erase(A.begin() + drop);
            lam.erase(lam.begin() + drop);
            if (++res.iterations >= max_iter)
                break;
        }
    }
    res.status = QpStatus::IterationLimit;
    return res;
}

}  // namespace coassign
