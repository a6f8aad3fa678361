#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "smse/distributed.hpp"
#include "smse/simplex.hpp"

namespace smse {

/// V_{m,1}(beta_at) v without forming the p x p Hessian:
/// 1/(m h^2) sum (-y) H''((x + z'beta_at)/h) (z'v) z.
Vec hessian_vector_product(const DataView& shard, const Vec& beta_at, const Vec& v, double h,
                           const KernelSpec& k = default_kernel());

/// The same with v = beta_at.
Vec hessian_vector_product(const DataView& shard, const Vec& beta_prev, double h,
                           const KernelSpec& k = default_kernel());

struct DantzigProblem {
    Mat Vop;
    Vec rhs;
    double lambda = 0.0;
};

struct DantzigResult {
    Vec beta;
    LpResult lp;
    double l1_norm() const { return beta.lpNorm<1>(); }
};

/// min ||beta||_1 s.t. ||Vop beta - rhs||_inf <= lambda, solved over the split
/// beta = beta+ - beta-. Infeasible lambda throws InfeasibleError carrying
/// min_beta ||Vop beta - rhs||_inf.
DantzigResult solve_dantzig(const DantzigProblem& prob);

/// min_beta ||Vop beta - rhs||_inf, as a linear program.
double min_sup_residual(const Mat& Vop, const Vec& rhs);

struct HdConfig {
    int alpha = 2;
    double C_lambda = 1.0;
    std::optional<int> sparsity;
    std::optional<double> h_star;  // default (log p / n)^{1/(2 alpha + 1)}
    double decay = 0.5;
    int rounds = 4;
    std::size_t hessian_machine = 0;
    double stall_tol = 1e-10;
    std::optional<double> lambda_override;  // fixed lambda for every round
};

/// (log p / n)^{1/(2 alpha + 1)}
double default_h_star(std::size_t n, std::size_t p, int alpha);

/// C[(log p/n)^{a/(2a+1)} + sqrt(s log p / (m h*^3)) d + s d^2], d = decay^{t-1} delta0.
double lambda_schedule(int t, std::size_t n, std::size_t m, std::size_t p, int s, double h_star,
                       double delta0, const HdConfig& cfg);

/// (s log p / m)^{a/(2a+1)}
double delta0_from_sparsity(int s, std::size_t p, std::size_t m, int alpha);

struct HdTraceRow {
    int t = 0;
    Vec beta;
    double h = 0.0;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double grad_inf_norm = std::numeric_limits<double>::quiet_NaN();
    double l1_norm = 0.0;
    std::size_t support_size = 0;
    double duality_gap = std::numeric_limits<double>::quiet_NaN();
    double feasibility_residual = std::numeric_limits<double>::quiet_NaN();
    bool delta_proxy = true;  // lambda used the decaying proxy for delta_{m,t-1}
};

struct HdTrace {
    std::vector<HdTraceRow> iterates;
    Vec final;
    int T = 0;
};

/// Entries with |beta_j| > 1e-6 ||beta||_inf.
std::size_t support_size(const Vec& beta);
std::vector<Eigen::Index> support(const Vec& beta, double threshold);

/// Multi-round Dantzig-selector iteration. Gradients are averaged over all
/// shards; the Hessian operator comes from cfg.hessian_machine only.
HdTrace hd_msmse(std::span<const Shard> shards, const HdConfig& cfg, const Vec& init,
                 const KernelSpec& k = default_kernel());

/// Distributed trace columns plus lambda_t,l1_norm,support_size.
void write_hd_trace_csv(std::ostream& out, const HdTrace& trace);

}  // namespace smse
