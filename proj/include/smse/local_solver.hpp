#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "smse/objective.hpp"

namespace smse {

/// Armijo backtracking. The first move of each stage tries initial_step; later
/// moves start from the Barzilai-Borwein step of the previous accepted move.
struct StepRule {
    double initial_step = 1.0;
    double shrink = 0.5;
    double sufficient_decrease = 1e-4;
};

struct SolveOptions {
    int max_iters = 2000;  // per continuation stage
    double grad_tol = 1e-6;
    /// Strictly decreasing bandwidths ending at the target h. Empty means the
    /// default geometric ladder from h = 1 with ratio 0.5.
    std::vector<double> continuation_ladder;
    StepRule step_rule;
    std::optional<Vec> init;
    /// Invoked after every accepted step with (stage bandwidth, f before, f after).
    std::function<void(double, double, double)> on_step;
};

struct SolveResult {
    Vec beta;
    double objective = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
};

/// 1, 1/2, 1/4, ... down to (and ending exactly at) target.
std::vector<double> geometric_ladder(double target, double start = 1.0, double ratio = 0.5);

/// Armijo gradient descent on the smoothed objective through the continuation
/// ladder, each stage warm-starting the next. Stops a stage once
/// ||gradient||_inf <= grad_tol. Throws SolverError if the final stage runs out
/// of iterations.
SolveResult solve_local_smse_detailed(const DataView& shard, double h, const SolveOptions& opts,
                                      const KernelSpec& k = default_kernel());

Vec solve_local_smse(const DataView& shard, double h, const SolveOptions& opts,
                     const KernelSpec& k = default_kernel());

/// Smallest index attaining the minimum (ties go to the smaller grid point).
std::size_t argmin_first(std::span<const double> values);

/// Score objective on the uniform grid lo + k (hi - lo) / (steps - 1).
/// Exact and independent of observation order.
std::vector<double> score_on_grid_1d(const DataView& shard, double lo, double hi, int steps);

/// Grid minimiser of the score objective for p = 1, smallest beta on ties.
double solve_mse_grid_1d(const DataView& shard, double lo, double hi, int steps);

struct GridSpec {
    double lo;
    double hi;
    int steps;
};

/// 2001 points on [-5 s, 5 s] with s = median|x| / median|z|.
GridSpec default_grid_1d(const DataView& shard);

/// Starting point for the multi-round methods. p = 1: grid MSE followed by a
/// single SMSE polish at h0. p > 1: SMSE from the zero vector with the
/// continuation ladder 1 -> h0.
Vec initial_estimator(const DataView& shard, double h0, const SolveOptions& opts,
                      const KernelSpec& k = default_kernel());

}  // namespace smse
