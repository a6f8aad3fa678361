#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "smse/distributed.hpp"

namespace smse {

struct NuisanceEstimates {
    Mat Vhat;
    Vec Uhat;
    Mat Vshat;
    double h_used = 0.0;   // bandwidth of Vhat and Vshat
    double h_kappa = 0.0;  // bandwidth of Uhat
    double kappa = 0.5;
};

struct InferenceConfig {
    int alpha = 2;
    double kappa = 0.5;
};

/// n^{-kappa/(2 alpha + 1)}
double kappa_bandwidth(std::size_t n, const InferenceConfig& cfg);

/// Vhat, Vshat at (beta, h); Uhat at (beta, h_kappa). Per-shard partial sums,
/// pooled by shard size in index order.
NuisanceEstimates estimate_nuisances(std::span<const Shard> shards, const Vec& beta, double h,
                                     const InferenceConfig& cfg = {},
                                     const KernelSpec& k = default_kernel());

/// trace(V^{-1} Vs V^{-1}) / (2 alpha U' V^{-2} U). Throws when U = 0 or V is singular.
double optimal_lambda(const NuisanceEstimates& nu, int alpha);

struct InferenceReport {
    std::string v0_id;
    Vec v0;
    double point = 0.0;
    double bias_hat = 0.0;
    double se_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double level = 0.95;
    double lambda_h = 1.0;
    double kappa = 0.5;
};

/// Bias-corrected interval v0'beta + bias_hat +- tau_{1-xi/2} se_hat with
///   bias_hat = -n^{-a/(2a+1)} lambda^{a/(2a+1)} v0' V^{-1} U
///   se_hat   = sqrt(n^{-2a/(2a+1)} lambda^{-1/(2a+1)} v0' V^{-1} Vs V^{-1} v0).
InferenceReport confidence_interval(const Vec& beta, const NuisanceEstimates& nu, const Vec& v0,
                                    double xi, std::size_t n, double lambda_h, int alpha);

/// mean +- tau sqrt(sum (b_l - mean)^2 / (L (L - 1))). Needs L >= 2.
InferenceReport avg_mse_interval(std::span<const double> local, double xi);

struct PluginRun {
    EstimatorTrace first;   // run at the configured lambda_h
    double lambda_hat = 0.0;
    EstimatorTrace second;  // rerun from the same init at lambda_hat
};

/// One plug-in pass: run, estimate nuisances at the final iterate, rerun with
/// lambda_h = optimal_lambda.
PluginRun msmse_plugin(std::span<const Shard> shards, const ScheduleConfig& cfg,
                       const InferenceConfig& icfg, std::optional<Vec> init = std::nullopt,
                       const KernelSpec& k = default_kernel());

/// CSV columns v0_id,point,bias_hat,se_hat,ci_lo,ci_hi,level,lambda_h,kappa.
void write_inference_csv(std::ostream& out, std::span<const InferenceReport> rows);

}  // namespace smse
