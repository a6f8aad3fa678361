#include "smse/inference.hpp"

#include <cmath>

#include "smse/csv.hpp"
#include "smse/error.hpp"
#include "smse/normal.hpp"
#include "smse/parallel.hpp"

namespace smse {

double kappa_bandwidth(std::size_t n, const InferenceConfig& cfg) {
    if (!(cfg.kappa > 0.0 && cfg.kappa < 1.0)) throw Error("kappa must lie in (0, 1)");
    return std::pow(static_cast<double>(n), -cfg.kappa / (2.0 * cfg.alpha + 1.0));
}

NuisanceEstimates estimate_nuisances(std::span<const Shard> shards, const Vec& beta, double h,
                                     const InferenceConfig& cfg, const KernelSpec& k) {
    if (shards.empty()) throw Error("estimate_nuisances: no shards");
    std::size_t n = 0;
    for (const auto& s : shards) n += s.size();
    const double hk = kappa_bandwidth(n, cfg);

    const std::size_t L = shards.size();
    std::vector<Moments> at_h(L), at_hk(L);
    std::vector<Mat> vs(L);
    parallel_for(L, [&](std::size_t l) {
        const auto& d = shards[l].data;
        at_h[l] = newton_moments(d, beta, h, k);
        vs[l] = squared_score_matrix(d, beta, h, k);
        at_hk[l] = Moments{smoothed_gradient(d, beta, hk, k), Mat(), d.size()};
    });

    NuisanceEstimates nu;
    nu.Vhat = pool_moments(at_h).V;
    const auto p = beta.size();
    nu.Vshat = Mat::Zero(p, p);
    nu.Uhat = Vec::Zero(p);
    for (std::size_t l = 0; l < L; ++l) {
        const double w = static_cast<double>(shards[l].size()) / static_cast<double>(n);
        nu.Vshat += w * vs[l];
        nu.Uhat += w * at_hk[l].U;
    }
    nu.Uhat *= -std::pow(hk, -static_cast<double>(cfg.alpha));
    nu.h_used = h;
    nu.h_kappa = hk;
    nu.kappa = cfg.kappa;
    return nu;
}

namespace {

Eigen::PartialPivLU<Mat> factor_V(const Mat& V, const char* who) {
    Eigen::PartialPivLU<Mat> lu(V);
    const double rc = lu.rcond();
    if (!(rc > 1e-12))
        throw SingularMatrixError(std::string(who) + ": Vhat is singular",
                                  rc > 0 ? 1.0 / rc : INFINITY);
    return lu;
}

}  // namespace

double optimal_lambda(const NuisanceEstimates& nu, int alpha) {
    if (nu.Uhat.isZero(0.0)) throw Error("optimal_lambda: Uhat is zero, lambda* undefined");
    const auto lu = factor_V(nu.Vhat, "optimal_lambda");
    const Mat Vinv = lu.inverse();
    const double num = (Vinv * nu.Vshat * Vinv).trace();
    const Vec w = Vinv * nu.Uhat;
    const double den = 2.0 * alpha * w.squaredNorm();
    return num / den;
}

InferenceReport confidence_interval(const Vec& beta, const NuisanceEstimates& nu, const Vec& v0,
                                    double xi, std::size_t n, double lambda_h, int alpha) {
    if (!(xi > 0.0 && xi < 1.0)) throw Error("confidence_interval: xi must lie in (0, 1)");
    if (!(lambda_h > 0.0)) throw Error("confidence_interval: lambda_h must be positive");
    if (v0.size() != beta.size()) throw Error("confidence_interval: v0 has the wrong length");
    factor_V(nu.Vhat, "confidence_interval");
    const Vec w = Eigen::PartialPivLU<Mat>(nu.Vhat.transpose()).solve(v0);  // V^{-T} v0
    const double sandwich = w.dot(nu.Vshat * w);
    if (!(sandwich > 0.0))
        throw Error("confidence_interval: variance form v0' V^-1 Vs V^-1 v0 is not positive");
    const double a = alpha;
    const double nd = static_cast<double>(n);
    InferenceReport r;
    r.v0 = v0;
    r.point = v0.dot(beta);
    r.bias_hat = -std::pow(nd, -a / (2 * a + 1)) * std::pow(lambda_h, a / (2 * a + 1)) *
                 w.dot(nu.Uhat);
    r.se_hat = std::sqrt(std::pow(nd, -2 * a / (2 * a + 1)) *
                         std::pow(lambda_h, -1.0 / (2 * a + 1)) * sandwich);
    const double tau = normal_quantile(1.0 - xi / 2.0);
    r.ci_lo = r.point + r.bias_hat - tau * r.se_hat;
    r.ci_hi = r.point + r.bias_hat + tau * r.se_hat;
    r.level = 1.0 - xi;
    r.lambda_h = lambda_h;
    r.kappa = nu.kappa;
    return r;
}

InferenceReport avg_mse_interval(std::span<const double> local, double xi) {
    if (local.size() < 2) throw Error("avg_mse_interval: need at least two local estimates");
    if (!(xi > 0.0 && xi < 1.0)) throw Error("avg_mse_interval: xi must lie in (0, 1)");
    const auto L = static_cast<long double>(local.size());
    long double s = 0.0L;
    for (double b : local) s += b;
    const long double mean = s / L;
    long double ss = 0.0L;
    for (double b : local) ss += (b - mean) * (b - mean);
    const double se = static_cast<double>(std::sqrt(ss / (L * (L - 1))));
    const double tau = normal_quantile(1.0 - xi / 2.0);
    InferenceReport r;
    r.v0 = Vec::Ones(1);
    r.point = static_cast<double>(mean);
    r.se_hat = se;
    r.ci_lo = r.point - tau * se;
    r.ci_hi = r.point + tau * se;
    r.level = 1.0 - xi;
    return r;
}

PluginRun msmse_plugin(std::span<const Shard> shards, const ScheduleConfig& cfg,
                       const InferenceConfig& icfg, std::optional<Vec> init, const KernelSpec& k) {
    PluginRun out;
    ScheduleConfig c = cfg;
    if (!init) {
        std::size_t n = 0;
        for (const auto& s : shards) n += s.size();
        const std::size_t m = shards.front().size();
        const double h0 = std::max(initial_bandwidth(m, c), bandwidth_schedule(1, n, m, c));
        init = initial_estimator(shards.front().data, h0, c.init_opts, k);
    }
    out.first = msmse(shards, c, init, k);
    const auto nu = estimate_nuisances(shards, out.first.final, out.first.iterates.back().h, icfg, k);
    out.lambda_hat = optimal_lambda(nu, icfg.alpha);
    c.lambda_h = out.lambda_hat;
    out.second = msmse(shards, c, init, k);
    return out;
}

void write_inference_csv(std::ostream& out, std::span<const InferenceReport> rows) {
    out << "v0_id,point,bias_hat,se_hat,ci_lo,ci_hi,level,lambda_h,kappa\n";
    for (const auto& r : rows)
        out << r.v0_id << ',' << fmt(r.point) << ',' << fmt(r.bias_hat) << ',' << fmt(r.se_hat)
            << ',' << fmt(r.ci_lo) << ',' << fmt(r.ci_hi) << ',' << fmt(r.level) << ','
            << fmt(r.lambda_h) << ',' << fmt(r.kappa) << '\n';
}

}  // namespace smse
