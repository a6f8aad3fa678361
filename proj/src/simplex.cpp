#include "smse/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "smse/error.hpp"

namespace smse {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Dot product in twice the working precision (Ogita, Rump and Oishi's Dot2).
double dot2(const Vec& a, const Vec& b, double init = 0.0) {
    double s = init, c = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double p = a[i] * b[i];
        const double pe = std::fma(a[i], b[i], -p);
        const double t = s + p;
        const double z = t - s;
        c += ((s - (t - z)) + (p - z)) + pe;
        s = t;
    }
    return s + c;
}

// b - A x with compensated row sums.
Vec residual(const Mat& A, const Vec& x, const Vec& b) {
    Vec r(A.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i) r[i] = dot2(-A.row(i).transpose(), x, b[i]);
    return r;
}

constexpr double kCostTol = 1e-11;
constexpr double kPivotTol = 1e-9;
constexpr int kRefactorEvery = 50;
// Consecutive degenerate pivots after which pricing switches to Bland's rule.
constexpr int kDegenerateRun = 20;

// Revised simplex on the standard form: rows s_i (A_i x + e_i' slack) [+ art_i] = s_i b_i >= 0.
class Tableau {
public:
    Tableau(const Mat& A, const Vec& b, const Vec& c)
        : m_(A.rows()), nx_(A.cols()), sign_(A.rows()), rhs_(A.rows()), c_(c) {
        for (Eigen::Index i = 0; i < m_; ++i) {
            sign_[i] = b[i] >= 0.0 ? 1.0 : -1.0;
            rhs_[i] = sign_[i] * b[i];
        }
        As_ = sign_.asDiagonal() * A;
        for (Eigen::Index i = 0; i < m_; ++i)
            if (sign_[i] < 0) art_row_.push_back(i);
        ncols_ = nx_ + m_ + static_cast<Eigen::Index>(art_row_.size());
        basis_.resize(m_);
        Eigen::Index a = 0;
        for (Eigen::Index i = 0; i < m_; ++i)
            basis_[i] = sign_[i] > 0 ? nx_ + i : nx_ + m_ + a++;
        in_basis_.assign(ncols_, -1);
        for (Eigen::Index i = 0; i < m_; ++i) in_basis_[basis_[i]] = i;
        refactor();
    }

    Vec column(Eigen::Index j) const {
        if (j < nx_) return As_.col(j);
        Vec e = Vec::Zero(m_);
        if (j < nx_ + m_) e[j - nx_] = sign_[j - nx_];
        else e[art_row_[j - nx_ - m_]] = 1.0;
        return e;
    }

    bool is_artificial(Eigen::Index j) const { return j >= nx_ + m_; }

    double cost(Eigen::Index j, bool phase1) const {
        if (phase1) return is_artificial(j) ? 1.0 : 0.0;
        return j < nx_ ? c_[j] : 0.0;
    }

    void refactor() {
        Mat B(m_, m_);
        for (Eigen::Index i = 0; i < m_; ++i) B.col(i) = column(basis_[i]);
        lu_.compute(B);
        Binv_ = lu_.inverse();
        xB_ = lu_.solve(rhs_);
        since_refactor_ = 0;
    }

    Mat basis_matrix() const {
        Mat B(m_, m_);
        for (Eigen::Index i = 0; i < m_; ++i) B.col(i) = column(basis_[i]);
        return B;
    }

    // Iterative refinement of the basic solution with compensated residuals.
    void refine(int sweeps = 3) {
        const Mat B = basis_matrix();
        for (int k = 0; k < sweeps; ++k) {
            const Vec res = residual(B, xB_, rhs_);
            if (res.lpNorm<Eigen::Infinity>() == 0.0) break;
            xB_ += lu_.solve(res);
        }
    }

    // Simplex multipliers B^-T c_B, refined the same way.
    Vec multipliers(const Vec& cB, int sweeps = 3) const {
        const Mat Bt = basis_matrix().transpose();
        Vec y = Binv_.transpose() * cB;
        for (int k = 0; k < sweeps; ++k) {
            const Vec res = residual(Bt, y, cB);
            if (res.lpNorm<Eigen::Infinity>() == 0.0) break;
            y += Binv_.transpose() * res;
        }
        return y;
    }

    // Returns false when optimal for the phase; throws when unbounded.
    bool iterate(bool phase1) {
        Vec cB(m_);
        for (Eigen::Index i = 0; i < m_; ++i) cB[i] = cost(basis_[i], phase1);
        const Vec y = Binv_.transpose() * cB;
        const Vec dx = (phase1 ? Vec(Vec::Zero(nx_)) : Vec(c_)) - As_.transpose() * y;

        // Most negative reduced cost; lowest index (Bland) while stuck at a degenerate vertex.
        const bool bland = degenerate_run_ >= kDegenerateRun;
        Eigen::Index enter = -1;
        double best_d = -kCostTol;
        for (Eigen::Index j = 0; j < ncols_; ++j) {
            if (in_basis_[j] >= 0) continue;
            if (!phase1 && is_artificial(j)) continue;
            double d;
            if (j < nx_) d = dx[j];
            else if (j < nx_ + m_) d = -sign_[j - nx_] * y[j - nx_];
            else d = 1.0 - y[art_row_[j - nx_ - m_]];
            if (d < best_d) {
                enter = j;
                if (bland) break;
                best_d = d;
            }
        }
        if (enter < 0) return false;

        const Vec u = Binv_ * column(enter);
        Eigen::Index leave = -1;
        double best = INFINITY;
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (u[i] <= kPivotTol) continue;
            const double r = std::max(xB_[i], 0.0) / u[i];
            if (leave < 0 || r < best - 1e-14) {
                best = r;
                leave = i;
            } else if (r <= best + 1e-14 && basis_[i] < basis_[leave]) {
                leave = i;
            }
        }
        if (leave < 0) throw Error("linear program is unbounded");
        pivot(enter, leave, u);
        return true;
    }

    void pivot(Eigen::Index enter, Eigen::Index row, const Vec& u) {
        const double piv = u[row];
        const double theta = std::max(xB_[row], 0.0) / piv;
        degenerate_run_ = theta > 0.0 ? 0 : degenerate_run_ + 1;
        xB_ -= theta * u;
        xB_[row] = theta;
        eta_update(row, u);
        in_basis_[basis_[row]] = -1;
        basis_[row] = enter;
        in_basis_[enter] = row;
        ++iterations_;
        if (++since_refactor_ >= kRefactorEvery) refactor();
    }

    void eta_update(Eigen::Index row, const Vec& u) {
        const Vec prow = Binv_.row(row).transpose() / u[row];
        Vec w = u;
        w[row] = 0.0;
        Binv_.noalias() -= w * prow.transpose();
        Binv_.row(row) = prow.transpose();
    }

    double phase1_objective() const {
        double s = 0.0;
        for (Eigen::Index i = 0; i < m_; ++i)
            if (is_artificial(basis_[i])) s += std::max(xB_[i], 0.0);
        return s;
    }

    // Swaps zero-level artificials out of the basis. [A I] has full row rank,
    // so some non-artificial column always has a nonzero in the row.
    void drive_out_artificials() {
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (!is_artificial(basis_[i])) continue;
            Eigen::Index best_j = -1;
            double best_mag = 0.0;
            Vec best_u;
            for (Eigen::Index j = 0; j < nx_ + m_; ++j) {
                if (in_basis_[j] >= 0) continue;
                Vec u = Binv_ * column(j);
                if (std::fabs(u[i]) > best_mag) {
                    best_mag = std::fabs(u[i]);
                    best_j = j;
                    best_u = std::move(u);
                }
            }
            if (best_j < 0 || best_mag < 1e-12) throw Error("simplex: cannot remove artificial");
            // Degenerate pivot: the artificial sits at zero so nothing moves.
            xB_[i] = 0.0;
            eta_update(i, best_u);
            in_basis_[basis_[i]] = -1;
            basis_[i] = best_j;
            in_basis_[best_j] = i;
        }
        refactor();
    }

    Eigen::Index m_, nx_, ncols_ = 0;
    Vec sign_, rhs_, c_;
    Mat As_;
    std::vector<Eigen::Index> art_row_;
    std::vector<Eigen::Index> basis_;
    std::vector<Eigen::Index> in_basis_;
    Eigen::PartialPivLU<Mat> lu_;
    Mat Binv_;
    Vec xB_;
    int iterations_ = 0;
    int since_refactor_ = 0;
    int degenerate_run_ = 0;
};

}  // namespace

LpResult solve_lp_leq(const Mat& A, const Vec& b, const Vec& c) {
    if (A.rows() != b.size() || A.cols() != c.size())
        throw Error("solve_lp_leq: dimension mismatch");
    if (!A.allFinite() || !b.allFinite() || !c.allFinite())
        throw Error("solve_lp_leq: non-finite input");
    Tableau tab(A, b, c);
    const double scale = 1.0 + b.lpNorm<Eigen::Infinity>();

    if (!tab.art_row_.empty()) {
        while (tab.iterate(true)) {}
        tab.refactor();
        const double infeas = tab.phase1_objective();
        if (infeas > 1e-9 * scale)
            throw InfeasibleError("linear program is infeasible", infeas);
        tab.drive_out_artificials();
    }
    while (tab.iterate(false)) {}
    tab.refactor();
    tab.refine();

    const auto m = A.rows(), nx = A.cols();
    LpResult r;
    r.x = Vec::Zero(nx);
    for (Eigen::Index i = 0; i < m; ++i)
        if (tab.basis_[i] < nx) r.x[tab.basis_[i]] = std::max(tab.xB_[i], 0.0);

    Vec cB(m);
    for (Eigen::Index i = 0; i < m; ++i) cB[i] = tab.cost(tab.basis_[i], false);
    const Vec y = tab.multipliers(cB);
    r.dual = tab.sign_.cwiseProduct(y);
    r.objective = dot2(c, r.x);
    r.dual_objective = dot2(b, r.dual);
    r.duality_gap = std::fabs(r.objective - r.dual_objective);
    const Vec slack = residual(A, r.x, b);
    const Vec red = residual(A.transpose(), r.dual, c);
    r.primal_infeasibility = std::max(0.0, -slack.minCoeff());
    r.dual_infeasibility = std::max({0.0, -red.minCoeff(), r.dual.maxCoeff()});
    r.cs_residual = std::max(r.dual.cwiseProduct(slack).cwiseAbs().maxCoeff(),
                             r.x.cwiseProduct(red).cwiseAbs().maxCoeff());
    r.iterations = tab.iterations_;
    return r;
}

}  // namespace smse
