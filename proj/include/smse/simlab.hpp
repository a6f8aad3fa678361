#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "smse/dataset.hpp"
#include "smse/inference.hpp"

namespace smse {

enum class NoiseKind { HomoNormal, HomoUniform, HeteroNormal };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::HomoNormal;
    double sigma = 0.25;
};

std::string to_string(NoiseKind k);
NoiseKind parse_noise_kind(const std::string& s);

struct DesignConfig {
    std::size_t p = 1;
    std::size_t m = 5000;
    double exponent = 1.35;  // n = floor(m^exponent)
    NoiseSpec noise;
    std::uint64_t seed = 1;
    int reps = 200;
    /// Sparse truth: the first s entries equal 1/sqrt(s), the rest 0.
    std::optional<std::size_t> sparsity;
};

/// floor(m^exponent)
std::size_t design_n(const DesignConfig& d);

/// 1_p / sqrt(p), or the sparse truth when d.sparsity is set.
Vec true_beta(const DesignConfig& d);

/// splitmix64 finaliser applied to (seed, rep); reps get independent streams.
std::uint64_t rep_seed(std::uint64_t seed, std::uint64_t rep);

/// One noise draw given the covariate row z.
double draw_noise(const NoiseSpec& spec, std::span<const double> z, std::mt19937_64& rng,
                  std::normal_distribution<double>& normal);

/// design_n(d) observations: z ~ N(0, I_p), x ~ N(0, 1), eps per d.noise,
/// y = sign(x + z'beta* + eps). Deterministic in (d.seed, rep).
Dataset generate(const DesignConfig& d, int rep);

/// Rows generated for a design with n observations truncated to a multiple of m.
Dataset generate_n(const DesignConfig& d, std::size_t n, int rep);

/// Fraction of true entries. Throws on empty input.
double coverage_rate(const std::vector<bool>& hits);

/// One method's output on one replication.
struct MethodOutput {
    std::string method;
    std::optional<int> t;
    double estimate = 0.0;  // v0'beta-hat
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double runtime_s = 0.0;
    double lambda_hat = std::numeric_limits<double>::quiet_NaN();
};

struct MetricsRow {
    std::string design;
    double exponent = 0.0;
    std::string method;
    std::optional<int> t;
    double bias = 0.0;
    double variance = 0.0;
    double coverage = 0.0;
    double mean_runtime = std::numeric_limits<double>::quiet_NaN();
    double median_lambda_hat = std::numeric_limits<double>::quiet_NaN();
    int reps = 0;
};

/// Per-replication runner: returns the same sequence of (method, t) each call.
using RepRunner = std::function<std::vector<MethodOutput>(const DesignConfig&, int rep)>;

struct McOptions {
    std::string design_name = "design";
    bool timing = false;  // otherwise mean_runtime stays NaN so output is reproducible
};

/// Runs reps concurrently, reduces in rep order. target is v0'beta*.
std::vector<MetricsRow> run_monte_carlo(const DesignConfig& d, const RepRunner& runner,
                                        double target, const McOptions& opts = {});

enum class Method { AvgMSE, AvgSMSE, mSMSE, PooledSMSE };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct StudyConfig {
    DesignConfig design;
    std::vector<Method> methods{Method::mSMSE, Method::AvgSMSE};
    int max_t = 3;  // mSMSE reports t = 1..max_t
    double level = 0.95;
    double lambda_h = 1.0;
    InferenceConfig inference;
    SolveOptions solve;  // Avg-SMSE / pooled local solver
    int mse_grid_steps = 2001;
    bool timing = false;
    std::string design_name;  // default derived from p and noise
};

/// The built-in replication: partition into L = n / m shards, run each method,
/// build 1_p'beta intervals at the given level.
std::vector<MethodOutput> run_replication(const StudyConfig& cfg, int rep);

std::vector<MetricsRow> run_study(const StudyConfig& cfg);

/// design,exponent,method,t,bias_e2,variance_e4,coverage,runtime_s
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

/// Fixed-width table grouped by method.
void write_metrics_table(std::ostream& out, std::span<const MetricsRow> rows);

}  // namespace smse
