#pragma once

#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "smse/local_solver.hpp"
#include "smse/objective.hpp"

namespace smse {

/// One simulated machine. The data view borrows from the Dataset that was
/// partitioned; the only thing that leaves a shard is a Moments message.
struct Shard {
    std::size_t index = 0;
    DataView data;
    std::optional<Mat> weight;

    std::size_t size() const noexcept { return data.size(); }
};

/// L contiguous shards of size n / L. Throws PartitionError unless L divides n.
std::vector<Shard> partition(const DataView& data, std::size_t L);

/// Contiguous shards with explicit (possibly unequal) sizes summing to n.
std::vector<Shard> partition_sizes(const DataView& data, std::span<const std::size_t> sizes);

/// Attaches W_l to each shard after checking sum W_l = I within 1e-10.
void attach_weights(std::vector<Shard>& shards, std::span<const Mat> weights);

/// The per-round message of a machine: gradient and Hessian of its local
/// smoothed objective at (beta, h).
Moments local_moments(const Shard& shard, const Vec& beta, double h,
                      const KernelSpec& k = default_kernel());

/// Messages of every shard, computed concurrently and returned in shard order.
std::vector<Moments> collect_moments(std::span<const Shard> shards, const Vec& beta, double h,
                                     const KernelSpec& k = default_kernel());

/// Unweighted: simple average over shards. Weighted: sum W_l U_l and sum W_l V_l
/// in shard-index order (the weighted V need not be symmetric).
Moments aggregate(std::span<const Moments> messages,
                  std::optional<std::span<const Mat>> weights = std::nullopt);

struct ScheduleConfig {
    int alpha = 2;
    double lambda_h = 1.0;
    std::optional<int> T_override;
    std::optional<double> ridge_eps;
    /// Rounds stop early once ||beta_t - beta_{t-1}||_inf falls below this.
    double stall_tol = 1e-10;
    /// Local solver settings for the initial estimator.
    SolveOptions init_opts;
};

/// max{ (lambda_h / n)^{1/(2 alpha + 1)}, m^{-2^t / (3 alpha)} } for t >= 1.
double bandwidth_schedule(int t, std::size_t n, std::size_t m, const ScheduleConfig& cfg);

/// ceil(log2( 6 alpha / (2 alpha + 1) * (log n - log lambda_h) / log m )), at least 1.
int num_iterations(std::size_t n, std::size_t m, const ScheduleConfig& cfg);

struct TraceRow {
    int t = 0;
    Vec beta;
    double h = 0.0;
    double grad_inf_norm = std::numeric_limits<double>::quiet_NaN();
    double cond_est = std::numeric_limits<double>::quiet_NaN();
    bool ridge_used = false;
};

struct EstimatorTrace {
    std::vector<TraceRow> iterates;  // t = 0..T
    Vec final;
    int T = 0;
};

struct NewtonStep {
    Vec delta;  // V^{-1} U
    double cond_est;
    bool ridge_used;
};

/// Solves V delta = U. Symmetric V uses an LDL' factorisation, otherwise LU;
/// both with a reciprocal-condition estimate. Condition above 1e12 throws
/// SingularMatrixError unless ridge_eps is set, in which case
/// V + ridge_eps tr(V)/p I is used.
NewtonStep newton_solve(const Mat& V, const Vec& U, std::optional<double> ridge_eps);

/// Bandwidth used for the initial estimator on a shard of size m.
double initial_bandwidth(std::size_t m, const ScheduleConfig& cfg);

/// Multi-round distributed Newton iteration on the smoothed objective with the
/// shrinking bandwidth schedule. If init is absent it is computed on shard 0.
EstimatorTrace msmse(std::span<const Shard> shards, const ScheduleConfig& cfg,
                     std::optional<Vec> init = std::nullopt,
                     const KernelSpec& k = default_kernel());

/// As msmse, aggregating with the shards' attached weights.
EstimatorTrace weighted_msmse(std::span<const Shard> shards, const ScheduleConfig& cfg,
                              std::optional<Vec> init = std::nullopt,
                              const KernelSpec& k = default_kernel());

/// Average of per-shard SMSE solutions at the shared bandwidth h.
Vec avg_smse(std::span<const Shard> shards, double h, const SolveOptions& opts,
             const KernelSpec& k = default_kernel());

/// Per-shard SMSE solutions (shard order).
std::vector<Vec> local_smse_all(std::span<const Shard> shards, double h, const SolveOptions& opts,
                                const KernelSpec& k = default_kernel());

/// sum W_l beta_l with the shards' attached weights.
Vec weighted_avg_smse(std::span<const Shard> shards, double h, const SolveOptions& opts,
                      const KernelSpec& k = default_kernel());

/// Per-shard grid MSE solutions (p = 1 only).
std::vector<double> local_mse_all(std::span<const Shard> shards,
                                  std::optional<GridSpec> grid = std::nullopt);

/// Average of per-shard grid MSE solutions (p = 1 only).
double avg_mse(std::span<const Shard> shards, std::optional<GridSpec> grid = std::nullopt);

enum class WeightMethod { wAvg, wmSMSE };

/// Closed-form variance-minimising weights. wAvg:
/// (sum m V Vs^{-1} V)^{-1} m_l V_l Vs_l^{-1} V_l; wmSMSE:
/// (sum m V Vs^{-1})^{-1} m_l V_l Vs_l^{-1}.
std::vector<Mat> optimal_weights(std::span<const Mat> V, std::span<const Mat> Vs,
                                 std::span<const std::size_t> m, WeightMethod method);

/// m_l / n times the identity.
std::vector<Mat> size_weights(std::span<const Shard> shards);

/// CSV columns t,h_t,beta_1..beta_p,grad_inf_norm,cond_est,ridge_used.
void write_trace_csv(std::ostream& out, const EstimatorTrace& trace);

}  // namespace smse
