#include "smse/distributed.hpp"

#include <cmath>
#include <sstream>

#include "smse/csv.hpp"
#include "smse/error.hpp"
#include "smse/parallel.hpp"

namespace smse {

std::vector<Shard> partition(const DataView& data, std::size_t L) {
    if (L < 1) throw PartitionError("partition: L must be at least 1");
    const std::size_t n = data.size();
    if (n == 0 || n % L != 0)
        throw PartitionError("partition: L=" + std::to_string(L) + " does not divide n=" +
                             std::to_string(n) +
                             "; use partition_sizes for unequal (heterogeneous) shards");
    std::vector<std::size_t> sizes(L, n / L);
    return partition_sizes(data, sizes);
}

std::vector<Shard> partition_sizes(const DataView& data, std::span<const std::size_t> sizes) {
    if (sizes.empty()) throw PartitionError("partition_sizes: no shards requested");
    std::size_t total = 0;
    for (auto s : sizes) {
        if (s < 1) throw PartitionError("partition_sizes: every shard needs at least one row");
        total += s;
    }
    if (total != data.size())
        throw PartitionError("partition_sizes: sizes sum to " + std::to_string(total) +
                             " but n=" + std::to_string(data.size()));
    std::vector<Shard> shards;
    shards.reserve(sizes.size());
    std::size_t begin = 0;
    for (std::size_t l = 0; l < sizes.size(); ++l) {
        shards.push_back({l, data.slice(begin, sizes[l]), std::nullopt});
        begin += sizes[l];
    }
    return shards;
}

namespace {

void check_weight_sum(std::span<const Mat> weights, Eigen::Index p) {
    Mat sum = Mat::Zero(p, p);
    for (const auto& W : weights) {
        if (W.rows() != p || W.cols() != p) throw Error("weight matrix has the wrong shape");
        sum += W;
    }
    const double dev = (sum - Mat::Identity(p, p)).lpNorm<Eigen::Infinity>();
    if (!(dev <= 1e-10)) {
        std::ostringstream msg;
        msg << "weights must sum to the identity (max deviation " << dev << ")";
        throw Error(msg.str());
    }
}

std::vector<Mat> shard_weights(std::span<const Shard> shards) {
    std::vector<Mat> w;
    for (const auto& s : shards) {
        if (!s.weight) throw Error("shard " + std::to_string(s.index) + " has no weight matrix");
        w.push_back(*s.weight);
    }
    check_weight_sum(w, static_cast<Eigen::Index>(shards.front().data.p));
    return w;
}

}  // namespace

void attach_weights(std::vector<Shard>& shards, std::span<const Mat> weights) {
    if (weights.size() != shards.size()) throw Error("one weight matrix per shard required");
    check_weight_sum(weights, static_cast<Eigen::Index>(shards.front().data.p));
    for (std::size_t l = 0; l < shards.size(); ++l) shards[l].weight = weights[l];
}

Moments local_moments(const Shard& shard, const Vec& beta, double h, const KernelSpec& k) {
    return newton_moments(shard.data, beta, h, k);
}

std::vector<Moments> collect_moments(std::span<const Shard> shards, const Vec& beta, double h,
                                     const KernelSpec& k) {
    std::vector<Moments> msgs(shards.size());
    parallel_for(shards.size(), [&](std::size_t l) { msgs[l] = local_moments(shards[l], beta, h, k); });
    return msgs;
}

Moments aggregate(std::span<const Moments> messages, std::optional<std::span<const Mat>> weights) {
    if (messages.empty()) throw Error("aggregate: no messages");
    const auto p = messages.front().U.size();
    std::size_t count = 0;
    for (const auto& m : messages) {
        if (m.U.size() != p || m.V.rows() != p || m.V.cols() != p)
            throw Error("aggregate: message dimensions do not match");
        count += m.count;
    }
    Moments out{Vec::Zero(p), Mat::Zero(p, p), count};
    if (!weights) {
        for (const auto& m : messages) {
            out.U += m.U;
            out.V += m.V;
        }
        const double inv = 1.0 / static_cast<double>(messages.size());
        out.U *= inv;
        out.V *= inv;
        return out;
    }
    if (weights->size() != messages.size()) throw Error("aggregate: one weight per message required");
    for (std::size_t l = 0; l < messages.size(); ++l) {
        const Mat& W = (*weights)[l];
        if (W.rows() != p || W.cols() != p) throw Error("aggregate: weight dimensions do not match");
        out.U.noalias() += W * messages[l].U;
        out.V.noalias() += W * messages[l].V;
    }
    return out;
}

double bandwidth_schedule(int t, std::size_t n, std::size_t m, const ScheduleConfig& cfg) {
    if (t < 1) throw Error("bandwidth_schedule: t must be >= 1");
    if (!(cfg.lambda_h > 0.0)) throw Error("bandwidth_schedule: lambda_h must be positive");
    const double a = cfg.alpha;
    const double floor_term = std::pow(cfg.lambda_h / static_cast<double>(n), 1.0 / (2.0 * a + 1.0));
    const double decay_term = std::pow(static_cast<double>(m), -std::ldexp(1.0, t) / (3.0 * a));
    return std::max(floor_term, decay_term);
}

int num_iterations(std::size_t n, std::size_t m, const ScheduleConfig& cfg) {
    if (m < 2 || n < m) throw Error("num_iterations: need m >= 2 and n >= m");
    const double a = cfg.alpha;
    const double arg = 6.0 * a / (2.0 * a + 1.0) *
                       (std::log(static_cast<double>(n)) - std::log(cfg.lambda_h)) /
                       std::log(static_cast<double>(m));
    if (!(arg > 0.0)) return 1;
    const double bound = std::log2(arg);
    // Absorb floating noise so exact powers of two are not bumped up a round.
    const double T = std::ceil(bound - 1e-12);
    return std::max(1, static_cast<int>(T));
}

double initial_bandwidth(std::size_t m, const ScheduleConfig& cfg) {
    const double local = std::pow(cfg.lambda_h / static_cast<double>(m), 1.0 / (2.0 * cfg.alpha + 1.0));
    return local;
}

NewtonStep newton_solve(const Mat& V, const Vec& U, std::optional<double> ridge_eps) {
    const auto p = V.rows();
    if (V.cols() != p || U.size() != p) throw Error("newton_solve: dimension mismatch");
    constexpr double kMaxCond = 1e12;
    const bool symmetric = (V - V.transpose()).lpNorm<Eigen::Infinity>() <=
                           1e-12 * (1.0 + V.lpNorm<Eigen::Infinity>());

    auto attempt = [&](const Mat& A) -> std::pair<double, Vec> {
        if (symmetric) {
            // LDLT quietly pseudo-inverts zero pivots, so take the condition from the spectrum
            const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(A, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs();
            const double lo = ev.minCoeff();
            const double cond = lo > 0.0 ? ev.maxCoeff() / lo : std::numeric_limits<double>::infinity();
            Eigen::LDLT<Mat> f(A);
            if (f.info() != Eigen::Success) return {std::numeric_limits<double>::infinity(), Vec()};
            return {cond, f.solve(U)};
        }
        Eigen::PartialPivLU<Mat> f(A);
        const double rc = f.rcond();
        return {rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity(), f.solve(U)};
    };

    auto [cond, delta] = attempt(V);
    if (cond <= kMaxCond && delta.allFinite()) return {delta, cond, false};
    if (!ridge_eps) {
        std::ostringstream msg;
        msg << "Hessian is numerically singular (condition estimate " << cond << ")";
        throw SingularMatrixError(msg.str(), cond);
    }
    const double shift = *ridge_eps * std::fabs(V.trace()) / static_cast<double>(p);
    const Mat A = V + shift * Mat::Identity(p, p);
    auto [cond2, delta2] = attempt(A);
    if (!(cond2 <= kMaxCond) || !delta2.allFinite()) {
        std::ostringstream msg;
        msg << "ridge-regularised Hessian still singular (condition estimate " << cond2 << ")";
        throw SingularMatrixError(msg.str(), cond2);
    }
    return {delta2, cond2, true};
}

namespace {

EstimatorTrace run_rounds(std::span<const Shard> shards, const ScheduleConfig& cfg,
                          std::optional<Vec> init, const KernelSpec& k,
                          std::optional<std::span<const Mat>> weights) {
    if (shards.empty()) throw Error("msmse: no shards");
    std::size_t n = 0;
    for (const auto& s : shards) n += s.size();
    const std::size_t m = shards.front().size();
    const double h1 = bandwidth_schedule(1, n, m, cfg);
    const double h0 = std::max(initial_bandwidth(m, cfg), h1);
    if (!init) init = initial_estimator(shards.front().data, h0, cfg.init_opts, k);
    if (static_cast<std::size_t>(init->size()) != shards.front().data.p)
        throw Error("msmse: init has the wrong length");
    const int T = cfg.T_override ? *cfg.T_override : num_iterations(n, m, cfg);
    if (T < 1) throw Error("msmse: T must be >= 1");

    EstimatorTrace trace;
    trace.iterates.push_back({0, *init, h0});
    Vec beta = *init;
    for (int t = 1; t <= T; ++t) {
        const double h = bandwidth_schedule(t, n, m, cfg);
        const auto msgs = collect_moments(shards, beta, h, k);
        const auto agg = aggregate(msgs, weights);
        NewtonStep step;
        try {
            step = newton_solve(agg.V, agg.U, cfg.ridge_eps);
        } catch (const SingularMatrixError& e) {
            throw SingularMatrixError("round " + std::to_string(t) + ": " + e.what(),
                                      e.condition_estimate());
        }
        Vec next = beta - step.delta;
        const double change = (next - beta).lpNorm<Eigen::Infinity>();
        trace.iterates.push_back(
            {t, next, h, agg.U.lpNorm<Eigen::Infinity>(), step.cond_est, step.ridge_used});
        beta = std::move(next);
        trace.T = t;
        if (change < cfg.stall_tol) break;
    }
    trace.final = beta;
    return trace;
}

}  // namespace

EstimatorTrace msmse(std::span<const Shard> shards, const ScheduleConfig& cfg,
                     std::optional<Vec> init, const KernelSpec& k) {
    return run_rounds(shards, cfg, std::move(init), k, std::nullopt);
}

EstimatorTrace weighted_msmse(std::span<const Shard> shards, const ScheduleConfig& cfg,
                              std::optional<Vec> init, const KernelSpec& k) {
    if (shards.empty()) throw Error("weighted_msmse: no shards");
    const auto w = shard_weights(shards);
    return run_rounds(shards, cfg, std::move(init), k, std::span<const Mat>(w));
}

std::vector<Vec> local_smse_all(std::span<const Shard> shards, double h, const SolveOptions& opts,
                                const KernelSpec& k) {
    if (shards.empty()) throw Error("no shards");
    std::vector<Vec> sol(shards.size());
    parallel_for(shards.size(), [&](std::size_t l) {
        try {
            sol[l] = solve_local_smse(shards[l].data, h, opts, k);
        } catch (const SolverError& e) {
            throw SolverError("shard " + std::to_string(shards[l].index) + ": " + e.what(),
                              e.best_iterate(), e.gradient_norm());
        }
    });
    return sol;
}

Vec avg_smse(std::span<const Shard> shards, double h, const SolveOptions& opts,
             const KernelSpec& k) {
    const auto sol = local_smse_all(shards, h, opts, k);
    Vec mean = Vec::Zero(sol.front().size());
    for (const auto& b : sol) mean += b;
    return mean / static_cast<double>(sol.size());
}

Vec weighted_avg_smse(std::span<const Shard> shards, double h, const SolveOptions& opts,
                      const KernelSpec& k) {
    if (shards.empty()) throw Error("weighted_avg_smse: no shards");
    const auto w = shard_weights(shards);
    const auto sol = local_smse_all(shards, h, opts, k);
    Vec out = Vec::Zero(sol.front().size());
    for (std::size_t l = 0; l < sol.size(); ++l) out.noalias() += w[l] * sol[l];
    return out;
}

std::vector<double> local_mse_all(std::span<const Shard> shards, std::optional<GridSpec> grid) {
    if (shards.empty()) throw Error("no shards");
    if (shards.front().data.p != 1)
        throw Error("Avg-MSE is only available for p = 1 (exact MSE for p > 1 is out of scope)");
    std::vector<double> sol(shards.size());
    parallel_for(shards.size(), [&](std::size_t l) {
        const auto g = grid ? *grid : default_grid_1d(shards[l].data);
        sol[l] = solve_mse_grid_1d(shards[l].data, g.lo, g.hi, g.steps);
    });
    return sol;
}

double avg_mse(std::span<const Shard> shards, std::optional<GridSpec> grid) {
    const auto sol = local_mse_all(shards, grid);
    long double s = 0.0L;
    for (double b : sol) s += b;
    return static_cast<double>(s / static_cast<long double>(sol.size()));
}

std::vector<Mat> optimal_weights(std::span<const Mat> V, std::span<const Mat> Vs,
                                 std::span<const std::size_t> m, WeightMethod method) {
    const std::size_t L = V.size();
    if (L == 0 || Vs.size() != L || m.size() != L) throw Error("optimal_weights: list lengths differ");
    const auto p = V.front().rows();
    std::vector<Mat> A(L);
    Mat S = Mat::Zero(p, p);
    for (std::size_t l = 0; l < L; ++l) {
        if (V[l].rows() != p || V[l].cols() != p || Vs[l].rows() != p || Vs[l].cols() != p)
            throw Error("optimal_weights: matrices must all be p x p");
        Eigen::PartialPivLU<Mat> lu(Vs[l]);
        if (!(lu.rcond() > 1e-12))
            throw SingularMatrixError("optimal_weights: V_s for shard " + std::to_string(l) +
                                          " is singular",
                                      lu.rcond() > 0 ? 1.0 / lu.rcond() : INFINITY);
        const Mat VVsinv =
            Eigen::PartialPivLU<Mat>(Vs[l].transpose()).solve(V[l].transpose()).transpose();
        A[l] = static_cast<double>(m[l]) *
               (method == WeightMethod::wAvg ? Mat(VVsinv * V[l]) : VVsinv);
        S += A[l];
    }
    Eigen::PartialPivLU<Mat> Slu(S);
    if (!(Slu.rcond() > 1e-12)) throw SingularMatrixError("optimal_weights: weight normaliser is singular", INFINITY);
    std::vector<Mat> W(L);
    for (std::size_t l = 0; l < L; ++l) W[l] = Slu.solve(A[l]);
    check_weight_sum(W, p);
    return W;
}

std::vector<Mat> size_weights(std::span<const Shard> shards) {
    std::size_t n = 0;
    for (const auto& s : shards) n += s.size();
    std::vector<Mat> W;
    for (const auto& s : shards) {
        const auto p = static_cast<Eigen::Index>(s.data.p);
        W.push_back(Mat::Identity(p, p) * (static_cast<double>(s.size()) / static_cast<double>(n)));
    }
    return W;
}

void write_trace_csv(std::ostream& out, const EstimatorTrace& trace) {
    const auto p = trace.iterates.empty() ? 0 : trace.iterates.front().beta.size();
    out << "t,h_t";
    for (Eigen::Index j = 1; j <= p; ++j) out << ",beta_" << j;
    out << ",grad_inf_norm,cond_est,ridge_used\n";
    for (const auto& r : trace.iterates) {
        out << r.t << ',' << fmt(r.h);
        for (Eigen::Index j = 0; j < p; ++j) out << ',' << fmt(r.beta[j]);
        out << ',' << fmt(r.grad_inf_norm) << ',' << fmt(r.cond_est) << ','
            << (r.ridge_used ? 1 : 0) << '\n';
    }
}

}  // namespace smse
