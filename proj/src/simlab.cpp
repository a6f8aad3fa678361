#include "smse/simlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>

#include "smse/csv.hpp"
#include "smse/error.hpp"
#include "smse/parallel.hpp"

namespace smse {

std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::HomoNormal: return "HomoNormal";
        case NoiseKind::HomoUniform: return "HomoUniform";
        case NoiseKind::HeteroNormal: return "HeteroNormal";
    }
    return "?";
}

NoiseKind parse_noise_kind(const std::string& s) {
    if (s == "HomoNormal") return NoiseKind::HomoNormal;
    if (s == "HomoUniform") return NoiseKind::HomoUniform;
    if (s == "HeteroNormal") return NoiseKind::HeteroNormal;
    throw Error("unknown noise kind '" + s + "'");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::AvgMSE: return "AvgMSE";
        case Method::AvgSMSE: return "AvgSMSE";
        case Method::mSMSE: return "mSMSE";
        case Method::PooledSMSE: return "pooledSMSE";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    if (s == "AvgMSE") return Method::AvgMSE;
    if (s == "AvgSMSE") return Method::AvgSMSE;
    if (s == "mSMSE") return Method::mSMSE;
    if (s == "pooledSMSE") return Method::PooledSMSE;
    throw Error("unknown method '" + s + "'");
}

std::size_t design_n(const DesignConfig& d) {
    if (!(d.exponent >= 1.0)) throw Error("design exponent must be >= 1");
    if (d.m < 2) throw Error("design m must be >= 2");
    // Nudge so that exact powers such as 100^1.5 do not round down.
    return static_cast<std::size_t>(
        std::floor(std::pow(static_cast<double>(d.m), d.exponent) * (1.0 + 1e-12)));
}

Vec true_beta(const DesignConfig& d) {
    const auto p = static_cast<Eigen::Index>(d.p);
    if (p < 1) throw Error("design p must be >= 1");
    if (!d.sparsity) return Vec::Constant(p, 1.0 / std::sqrt(static_cast<double>(p)));
    const auto s = static_cast<Eigen::Index>(*d.sparsity);
    if (s < 1 || s > p) throw Error("design sparsity must lie in [1, p]");
    Vec b = Vec::Zero(p);
    b.head(s).setConstant(1.0 / std::sqrt(static_cast<double>(s)));
    return b;
}

std::uint64_t rep_seed(std::uint64_t seed, std::uint64_t rep) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (rep + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double draw_noise(const NoiseSpec& spec, std::span<const double> z, std::mt19937_64& rng,
                  std::normal_distribution<double>& normal) {
    const double s = spec.sigma;
    switch (spec.kind) {
        case NoiseKind::HomoNormal: return s * normal(rng);
        case NoiseKind::HomoUniform: {
            const double half = std::sqrt(3.0) * s;
            return std::uniform_real_distribution<double>(-half, half)(rng);
        }
        case NoiseKind::HeteroNormal: {
            double scale;
            if (z.size() == 1) {
                scale = (1.0 + 0.1 * z[0] * z[0]) / std::sqrt(1.23);
            } else {
                const double d = z[0] - z[1];
                scale = (1.0 + 0.1 * d * d) / std::sqrt(1.52);
            }
            return s * scale * normal(rng);
        }
    }
    return 0.0;
}

Dataset generate_n(const DesignConfig& d, std::size_t n, int rep) {
    if (!(d.noise.sigma > 0.0)) throw Error("noise sigma must be positive");
    const Vec beta = true_beta(d);
    std::mt19937_64 rng(rep_seed(d.seed, static_cast<std::uint64_t>(rep)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset data(d.p);
    data.reserve(n);
    std::vector<double> z(d.p);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : z) v = normal(rng);
        const double x = normal(rng);
        const double eps = draw_noise(d.noise, z, rng, normal);
        double lin = x + eps;
        for (std::size_t j = 0; j < d.p; ++j) lin += z[j] * beta[static_cast<Eigen::Index>(j)];
        data.add(lin >= 0.0 ? 1 : -1, x, z);
    }
    return data;
}

Dataset generate(const DesignConfig& d, int rep) { return generate_n(d, design_n(d), rep); }

double coverage_rate(const std::vector<bool>& hits) {
    if (hits.empty()) throw Error("coverage_rate: no replications");
    std::size_t c = 0;
    for (bool h : hits) c += h ? 1 : 0;
    return static_cast<double>(c) / static_cast<double>(hits.size());
}

std::vector<MetricsRow> run_monte_carlo(const DesignConfig& d, const RepRunner& runner,
                                        double target, const McOptions& opts) {
    if (d.reps < 1) throw Error("reps must be >= 1");
    std::vector<std::vector<MethodOutput>> out(static_cast<std::size_t>(d.reps));
    parallel_for(out.size(), [&](std::size_t r) {
        try {
            out[r] = runner(d, static_cast<int>(r));
        } catch (const std::exception& e) {
            throw Error("rep " + std::to_string(r) + ": " + e.what());
        }
    });
    const std::size_t K = out.front().size();
    for (const auto& o : out)
        if (o.size() != K) throw Error("replications returned different method lists");

    std::vector<MetricsRow> rows;
    const auto R = static_cast<long double>(out.size());
    for (std::size_t k = 0; k < K; ++k) {
        MetricsRow row;
        row.design = opts.design_name;
        row.exponent = d.exponent;
        row.method = out.front()[k].method;
        row.t = out.front()[k].t;
        row.reps = d.reps;
        long double sum = 0.0L, rt = 0.0L;
        std::vector<bool> hits;
        std::vector<double> lam;
        for (const auto& o : out) {
            sum += o[k].estimate;
            rt += o[k].runtime_s;
            hits.push_back(o[k].ci_lo <= target && target <= o[k].ci_hi);
            if (std::isfinite(o[k].lambda_hat)) lam.push_back(o[k].lambda_hat);
        }
        const long double mean = sum / R;
        long double ss = 0.0L;
        for (const auto& o : out) ss += (o[k].estimate - mean) * (o[k].estimate - mean);
        row.bias = static_cast<double>(mean - target);
        row.variance = out.size() > 1 ? static_cast<double>(ss / (R - 1)) : 0.0;
        row.coverage = coverage_rate(hits);
        if (opts.timing) row.mean_runtime = static_cast<double>(rt / R);
        if (!lam.empty()) {
            std::sort(lam.begin(), lam.end());
            const std::size_t h = lam.size() / 2;
            row.median_lambda_hat = lam.size() % 2 ? lam[h] : 0.5 * (lam[h - 1] + lam[h]);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

MethodOutput interval_output(std::string method, std::optional<int> t, const InferenceReport& r) {
    MethodOutput o;
    o.method = std::move(method);
    o.t = t;
    o.estimate = r.point;
    o.ci_lo = r.ci_lo;
    o.ci_hi = r.ci_hi;
    return o;
}

}  // namespace

std::vector<MethodOutput> run_replication(const StudyConfig& cfg, int rep) {
    const auto& d = cfg.design;
    const std::size_t n_raw = design_n(d);
    const std::size_t L = n_raw / d.m;
    if (L < 1) throw Error("design n is smaller than m");
    const std::size_t n = L * d.m;
    const Dataset data = generate_n(d, n, rep);
    const auto shards = partition(data.view(), L);
    const Vec v0 = Vec::Ones(static_cast<Eigen::Index>(d.p));
    const double xi = 1.0 - cfg.level;
    const int alpha = cfg.inference.alpha;
    const double h_final = std::pow(cfg.lambda_h / static_cast<double>(n), 1.0 / (2.0 * alpha + 1.0));

    ScheduleConfig sc;
    sc.alpha = alpha;
    sc.lambda_h = cfg.lambda_h;
    sc.T_override = cfg.max_t;
    sc.init_opts = cfg.solve;

    std::vector<MethodOutput> out;
    std::optional<Vec> msmse_final;
    for (Method m : cfg.methods) {
        const auto t0 = Clock::now();
        switch (m) {
            case Method::mSMSE: {
                const auto trace = msmse(shards, sc);
                const double rt = seconds_since(t0);
                for (int t = 1; t <= cfg.max_t; ++t) {
                    const auto& row = trace.iterates[static_cast<std::size_t>(std::min(t, trace.T))];
                    const auto nu = estimate_nuisances(shards, row.beta, row.h, cfg.inference);
                    auto o = interval_output("mSMSE", t,
                                             confidence_interval(row.beta, nu, v0, xi, n,
                                                                 cfg.lambda_h, alpha));
                    o.runtime_s = rt;
                    if (t == cfg.max_t) {
                        try {
                            o.lambda_hat = optimal_lambda(nu, alpha);
                        } catch (const Error&) {
                        }
                    }
                    out.push_back(std::move(o));
                }
                msmse_final = trace.final;
                break;
            }
            case Method::AvgSMSE: {
                const Vec b = avg_smse(shards, h_final, cfg.solve);
                const auto nu = estimate_nuisances(shards, b, h_final, cfg.inference);
                auto o = interval_output("AvgSMSE", std::nullopt,
                                         confidence_interval(b, nu, v0, xi, n, cfg.lambda_h, alpha));
                o.runtime_s = seconds_since(t0);
                out.push_back(std::move(o));
                break;
            }
            case Method::AvgMSE: {
                if (d.p != 1) throw Error("AvgMSE is only available for p = 1");
                std::vector<double> local(L);
                for (std::size_t l = 0; l < L; ++l) {
                    auto g = default_grid_1d(shards[l].data);
                    g.steps = cfg.mse_grid_steps;
                    local[l] = solve_mse_grid_1d(shards[l].data, g.lo, g.hi, g.steps);
                }
                if (L < 2) throw Error("AvgMSE interval needs at least two shards");
                auto o = interval_output("AvgMSE", std::nullopt, avg_mse_interval(local, xi));
                o.runtime_s = seconds_since(t0);
                out.push_back(std::move(o));
                break;
            }
            case Method::PooledSMSE: {
                SolveOptions so = cfg.solve;
                if (msmse_final) {
                    so.init = *msmse_final;
                    so.continuation_ladder = {h_final};
                }
                const Vec b = solve_local_smse(data.view(), h_final, so);
                const auto nu = estimate_nuisances(shards, b, h_final, cfg.inference);
                auto o = interval_output("pooledSMSE", std::nullopt,
                                         confidence_interval(b, nu, v0, xi, n, cfg.lambda_h, alpha));
                o.runtime_s = seconds_since(t0);
                out.push_back(std::move(o));
                break;
            }
        }
    }
    return out;
}

std::vector<MetricsRow> run_study(const StudyConfig& cfg) {
    if (cfg.max_t < 1) throw Error("max_t must be >= 1");
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw Error("level must lie in (0, 1)");
    if (cfg.methods.empty()) throw Error("no methods requested");
    McOptions opts;
    opts.timing = cfg.timing;
    opts.design_name = cfg.design_name.empty()
                           ? "p" + std::to_string(cfg.design.p) + "_" + to_string(cfg.design.noise.kind)
                           : cfg.design_name;
    const double target = true_beta(cfg.design).sum();
    return run_monte_carlo(
        cfg.design, [&](const DesignConfig&, int rep) { return run_replication(cfg, rep); }, target,
        opts);
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
    out << "design,exponent,method,t,bias_e2,variance_e4,coverage,runtime_s\n";
    for (const auto& r : rows) {
        out << r.design << ',' << fmt(r.exponent) << ',' << r.method << ','
            << (r.t ? std::to_string(*r.t) : std::string("NA")) << ',' << fmt(r.bias * 1e2) << ','
            << fmt(r.variance * 1e4) << ',' << fmt(r.coverage) << ','
            << (std::isnan(r.mean_runtime) ? std::string("NA") : fmt(r.mean_runtime)) << '\n';
    }
}

void write_metrics_table(std::ostream& out, std::span<const MetricsRow> rows) {
    out << std::left << std::setw(18) << "design" << std::setw(10) << "log_m(n)" << std::setw(12)
        << "method" << std::setw(4) << "t" << std::right << std::setw(12) << "bias(e-2)"
        << std::setw(14) << "variance(e-4)" << std::setw(10) << "coverage" << std::setw(12)
        << "lambda*" << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(18) << r.design << std::setw(10) << std::fixed
            << std::setprecision(2) << r.exponent << std::setw(12) << r.method << std::setw(4)
            << (r.t ? std::to_string(*r.t) : "-") << std::right << std::setw(12)
            << std::setprecision(3) << r.bias * 1e2 << std::setw(14) << r.variance * 1e4
            << std::setw(10) << std::setprecision(3) << r.coverage << std::setw(12)
            << std::setprecision(2) << r.median_lambda_hat << '\n';
    }
    out.unsetf(std::ios::floatfield);
}

}  // namespace smse
