#include "smse/local_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smse/error.hpp"

namespace smse {

std::vector<double> geometric_ladder(double target, double start, double ratio) {
    if (!(target > 0.0)) throw Error("ladder target must be positive");
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error("ladder ratio must lie in (0, 1)");
    std::vector<double> ladder;
    // Stop one rung early when the next rung would land within a hair of target.
    for (double h = start; h > target * (1.0 + 1e-9); h *= ratio) ladder.push_back(h);
    ladder.push_back(target);
    return ladder;
}

namespace {

void validate_ladder(const std::vector<double>& ladder, double h) {
    if (ladder.empty()) throw Error("continuation ladder is empty");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (!(ladder[i] < ladder[i - 1]))
            throw Error("continuation ladder must be strictly decreasing");
    if (ladder.back() != h) throw Error("continuation ladder must end at the target bandwidth");
}

}  // namespace

SolveResult solve_local_smse_detailed(const DataView& shard, double h, const SolveOptions& opts,
                                      const KernelSpec& k) {
    if (shard.empty()) throw Error("solve_local_smse: empty shard");
    if (!(h > 0.0)) throw Error("solve_local_smse: bandwidth must be positive");
    if (opts.max_iters < 1) throw Error("solve_local_smse: max_iters must be >= 1");
    const auto ladder =
        opts.continuation_ladder.empty() ? geometric_ladder(h) : opts.continuation_ladder;
    validate_ladder(ladder, h);

    Vec beta = opts.init ? *opts.init : Vec::Zero(static_cast<Eigen::Index>(shard.p));
    if (static_cast<std::size_t>(beta.size()) != shard.p)
        throw Error("solve_local_smse: init has the wrong length");

    const auto& rule = opts.step_rule;
    SolveResult res;
    for (std::size_t stage = 0; stage < ladder.size(); ++stage) {
        const double hs = ladder[stage];
        auto cur = smoothed_value_gradient(shard, beta, hs, k);
        double gnorm = cur.gradient.lpNorm<Eigen::Infinity>();
        int it = 0;
        double bb = 0.0;  // Barzilai-Borwein trial step from the last accepted move
        while (gnorm > opts.grad_tol && it < opts.max_iters) {
            const double g2 = cur.gradient.squaredNorm();
            double step = bb > 0.0 ? bb : rule.initial_step;
            bool accepted = false;
            ValueGradient trial;
            Vec cand;
            while (step > 1e-30) {
                cand = beta - step * cur.gradient;
                trial = smoothed_value_gradient(shard, cand, hs, k);
                if (trial.value <= cur.value - rule.sufficient_decrease * step * g2) {
                    accepted = true;
                    break;
                }
                step *= rule.shrink;
            }
            ++it;
            if (!accepted) break;  // no representable descent left along -g
            if (opts.on_step) opts.on_step(hs, cur.value, trial.value);
            const Vec dg = trial.gradient - cur.gradient;
            const double sy = -step * cur.gradient.dot(dg);
            bb = sy > 0.0 ? std::clamp(step * step * g2 / sy, 1e-12, 1e12) : 0.0;
            beta = std::move(cand);
            cur = std::move(trial);
            gnorm = cur.gradient.lpNorm<Eigen::Infinity>();
        }
        res.iterations += it;
        res.objective = cur.value;
        res.grad_norm = gnorm;
        if (stage + 1 == ladder.size() && gnorm > opts.grad_tol) {
            std::ostringstream msg;
            msg << "solve_local_smse: gradient sup-norm " << gnorm << " above tolerance "
                << opts.grad_tol << " at h=" << hs << " after " << it << " iterations";
            throw SolverError(msg.str(), beta, gnorm);
        }
    }
    res.beta = std::move(beta);
    return res;
}

Vec solve_local_smse(const DataView& shard, double h, const SolveOptions& opts,
                     const KernelSpec& k) {
    return solve_local_smse_detailed(shard, h, opts, k).beta;
}

std::size_t argmin_first(std::span<const double> values) {
    if (values.empty()) throw Error("argmin of an empty sequence");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] < values[best]) best = i;
    return best;
}

std::vector<double> score_on_grid_1d(const DataView& shard, double lo, double hi, int steps) {
    if (shard.p != 1) throw Error("grid MSE requires p = 1");
    if (shard.empty()) throw Error("grid MSE on an empty shard");
    if (steps < 2 || !(lo < hi)) throw Error("grid MSE needs steps >= 2 and lo < hi");
    const auto K = static_cast<std::size_t>(steps);
    const double width = (hi - lo) / static_cast<double>(steps - 1);
    auto grid = [&](std::size_t j) { return lo + static_cast<double>(j) * width; };
    auto fires = [&](std::size_t i, std::size_t j) { return shard.x[i] + shard.z[i] * grid(j) >= 0.0; };

    // Each observation's indicator is on over a prefix or suffix of the grid;
    // a difference array collects the contributions in O(n + steps).
    std::vector<long long> diff(K + 1, 0);
    auto add_range = [&](std::size_t from, std::size_t to, long long v) {  // [from, to)
        if (from >= to) return;
        diff[from] += v;
        diff[to] -= v;
    };
    for (std::size_t i = 0; i < shard.size(); ++i) {
        const long long v = shard.y[i] > 0 ? -1 : 1;
        const double zi = shard.z[i];
        if (zi == 0.0) {
            if (shard.x[i] >= 0.0) add_range(0, K, v);
            continue;
        }
        double guess = std::clamp((-shard.x[i] / zi - lo) / width, -1.0, static_cast<double>(K));
        auto j = static_cast<long long>(std::floor(guess));
        j = std::clamp<long long>(j, 0, static_cast<long long>(K) - 1);
        if (zi > 0.0) {
            // first index that fires
            auto first = static_cast<std::size_t>(j);
            while (first > 0 && fires(i, first - 1)) --first;
            while (first < K && !fires(i, first)) ++first;
            add_range(first, K, v);
        } else {
            // one past the last index that fires
            auto end = static_cast<std::size_t>(j) + 1;
            while (end < K && fires(i, end)) ++end;
            while (end > 0 && !fires(i, end - 1)) --end;
            add_range(0, end, v);
        }
    }
    std::vector<double> values(K);
    long long run = 0;
    const double n = static_cast<double>(shard.size());
    for (std::size_t j = 0; j < K; ++j) {
        run += diff[j];
        values[j] = static_cast<double>(run) / n;
    }
    return values;
}

double solve_mse_grid_1d(const DataView& shard, double lo, double hi, int steps) {
    const auto values = score_on_grid_1d(shard, lo, hi, steps);
    const auto j = argmin_first(values);
    return lo + static_cast<double>(j) * ((hi - lo) / static_cast<double>(steps - 1));
}

namespace {

double median_abs(std::span<const double> v) {
    std::vector<double> a(v.size());
    std::transform(v.begin(), v.end(), a.begin(), [](double t) { return std::fabs(t); });
    const auto mid = a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2);
    std::nth_element(a.begin(), mid, a.end());
    return *mid;
}

}  // namespace

GridSpec default_grid_1d(const DataView& shard) {
    if (shard.p != 1) throw Error("default grid requires p = 1");
    if (shard.empty()) throw Error("default grid on an empty shard");
    const double mz = median_abs(shard.z);
    const double mx = median_abs(shard.x);
    double scale = (mz > 0.0 && mx > 0.0) ? mx / mz : 1.0;
    return {-5.0 * scale, 5.0 * scale, 2001};
}

Vec initial_estimator(const DataView& shard, double h0, const SolveOptions& opts,
                      const KernelSpec& k) {
    if (shard.empty()) throw Error("initial_estimator: empty shard");
    SolveOptions o = opts;
    if (shard.p == 1) {
        const auto g = default_grid_1d(shard);
        o.init = Vec::Constant(1, solve_mse_grid_1d(shard, g.lo, g.hi, g.steps));
        o.continuation_ladder = {h0};
    } else {
        o.init = Vec::Zero(static_cast<Eigen::Index>(shard.p));
        o.continuation_ladder = geometric_ladder(h0);
    }
    return solve_local_smse(shard, h0, o, k);
}

}  // namespace smse
