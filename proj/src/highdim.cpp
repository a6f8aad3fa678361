#include "smse/highdim.hpp"

#include <cmath>
#include <sstream>

#include "smse/csv.hpp"
#include "smse/error.hpp"
#include "smse/parallel.hpp"

namespace smse {

Vec hessian_vector_product(const DataView& shard, const Vec& beta_at, const Vec& v, double h,
                           const KernelSpec& k) {
    if (shard.empty()) throw Error("hessian_vector_product: empty shard");
    if (!(h > 0.0)) throw Error("hessian_vector_product: bandwidth must be positive");
    const auto p = static_cast<Eigen::Index>(shard.p);
    if (beta_at.size() != p || v.size() != p)
        throw Error("hessian_vector_product: vector length does not match p");
    Vec acc = Vec::Zero(p);
    for (std::size_t i = 0; i < shard.size(); ++i) {
        const double* z = shard.z.data() + i * shard.p;
        const Eigen::Map<const Vec> zi(z, p);
        const double u = (shard.x[i] + zi.dot(beta_at)) / h;
        if (k.builtin_biweight && std::fabs(u) >= 1.0) continue;
        const double w = k.builtin_biweight ? biweight::Hpp(u) : k.evalHpp(u);
        if (w == 0.0) continue;
        acc.noalias() += (-shard.y[i] * w * zi.dot(v)) * zi;
    }
    return acc / (static_cast<double>(shard.size()) * h * h);
}

Vec hessian_vector_product(const DataView& shard, const Vec& beta_prev, double h,
                           const KernelSpec& k) {
    return hessian_vector_product(shard, beta_prev, beta_prev, h, k);
}

double min_sup_residual(const Mat& Vop, const Vec& rhs) {
    const auto p = Vop.cols();
    const auto r = Vop.rows();
    // x = (beta+, beta-, t): [V -V -1] x <= rhs, [-V V -1] x <= -rhs.
    Mat A(2 * r, 2 * p + 1);
    A << Vop, -Vop, -Vec::Ones(r), -Vop, Vop, -Vec::Ones(r);
    Vec b(2 * r);
    b << rhs, -rhs;
    Vec c = Vec::Zero(2 * p + 1);
    c[2 * p] = 1.0;
    return solve_lp_leq(A, b, c).objective;
}

DantzigResult solve_dantzig(const DantzigProblem& prob) {
    const auto p = prob.Vop.cols();
    const auto r = prob.Vop.rows();
    if (prob.rhs.size() != r) throw Error("solve_dantzig: rhs does not conform with Vop");
    if (!(prob.lambda >= 0.0)) throw Error("solve_dantzig: lambda must be non-negative");
    Mat A(2 * r, 2 * p);
    A << prob.Vop, -prob.Vop, -prob.Vop, prob.Vop;
    Vec b(2 * r);
    b << prob.rhs.array() + prob.lambda, prob.lambda - prob.rhs.array();
    const Vec c = Vec::Ones(2 * p);
    DantzigResult out;
    try {
        out.lp = solve_lp_leq(A, b, c);
    } catch (const InfeasibleError&) {
        const double best = min_sup_residual(prob.Vop, prob.rhs);
        std::ostringstream msg;
        msg << "Dantzig constraint infeasible: lambda=" << prob.lambda
            << " is below the attainable minimum sup-norm " << best;
        throw InfeasibleError(msg.str(), best);
    }
    out.beta = out.lp.x.head(p) - out.lp.x.tail(p);
    return out;
}

double default_h_star(std::size_t n, std::size_t p, int alpha) {
    if (p < 2) throw Error("default_h_star: needs p >= 2 (log p must be positive)");
    return std::pow(std::log(static_cast<double>(p)) / static_cast<double>(n),
                    1.0 / (2.0 * alpha + 1.0));
}

double delta0_from_sparsity(int s, std::size_t p, std::size_t m, int alpha) {
    return std::pow(s * std::log(static_cast<double>(p)) / static_cast<double>(m),
                    alpha / (2.0 * alpha + 1.0));
}

double lambda_schedule(int t, std::size_t n, std::size_t m, std::size_t p, int s, double h_star,
                       double delta0, const HdConfig& cfg) {
    if (t < 1) throw Error("lambda_schedule: t must be >= 1");
    const double a = cfg.alpha;
    const double lp = std::log(static_cast<double>(p));
    const double d = std::pow(cfg.decay, t - 1) * delta0;
    const double floor_term = std::pow(lp / static_cast<double>(n), a / (2 * a + 1));
    const double dev = std::sqrt(s * lp / (static_cast<double>(m) * std::pow(h_star, 3))) * d;
    return cfg.C_lambda * (floor_term + dev + s * d * d);
}

std::vector<Eigen::Index> support(const Vec& beta, double threshold) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        if (std::fabs(beta[j]) > threshold) idx.push_back(j);
    return idx;
}

std::size_t support_size(const Vec& beta) {
    const double mx = beta.lpNorm<Eigen::Infinity>();
    if (mx == 0.0) return 0;
    return support(beta, 1e-6 * mx).size();
}

HdTrace hd_msmse(std::span<const Shard> shards, const HdConfig& cfg, const Vec& init,
                 const KernelSpec& k) {
    if (shards.empty()) throw Error("hd_msmse: no shards");
    if (cfg.hessian_machine >= shards.size()) throw Error("hd_msmse: hessian_machine out of range");
    if (cfg.rounds < 1) throw Error("hd_msmse: rounds must be >= 1");
    if (!(cfg.decay > 0.0 && cfg.decay < 1.0)) throw Error("hd_msmse: decay must lie in (0, 1)");
    const std::size_t p = shards.front().data.p;
    if (static_cast<std::size_t>(init.size()) != p) throw Error("hd_msmse: init has the wrong length");
    std::size_t n = 0;
    for (const auto& s : shards) n += s.size();
    const Shard& hm = shards[cfg.hessian_machine];
    const std::size_t m = hm.size();
    const double h = cfg.h_star ? *cfg.h_star : default_h_star(n, p, cfg.alpha);

    const bool hinted = cfg.sparsity.has_value();
    const int s = hinted ? *cfg.sparsity : std::max<int>(1, static_cast<int>(support_size(init)));
    double delta0 = delta0_from_sparsity(hinted ? s : 1, p, m, cfg.alpha);

    HdTrace trace;
    HdTraceRow row0;
    row0.beta = init;
    row0.h = h;
    row0.l1_norm = init.lpNorm<1>();
    row0.support_size = support_size(init);
    trace.iterates.push_back(row0);

    Vec beta = init;
    for (int t = 1; t <= cfg.rounds; ++t) {
        // Unhinted: round 1 uses the s = 1 rate, later rounds the observed first step.
        if (!hinted && t == 2) delta0 = (trace.iterates[1].beta - trace.iterates[0].beta).norm();
        const int s_eff = (!hinted && t == 1) ? 1 : s;
        const double lam = cfg.lambda_override
                               ? *cfg.lambda_override
                               : lambda_schedule(t, n, m, p, s_eff, h, delta0, cfg);

        std::vector<Vec> grads(shards.size());
        parallel_for(shards.size(),
                     [&](std::size_t l) { grads[l] = smoothed_gradient(shards[l].data, beta, h, k); });
        Vec Un = Vec::Zero(static_cast<Eigen::Index>(p));
        for (const auto& g : grads) Un += g;
        Un /= static_cast<double>(shards.size());

        DantzigProblem prob;
        prob.Vop = smoothed_hessian(hm.data, beta, h, k);
        prob.rhs = hessian_vector_product(hm.data, beta, h, k) - Un;
        prob.lambda = lam;
        DantzigResult sol;
        try {
            sol = solve_dantzig(prob);
        } catch (const InfeasibleError& e) {
            throw InfeasibleError("round " + std::to_string(t) + ": " + e.what(), e.min_sup_norm());
        }

        HdTraceRow row;
        row.t = t;
        row.beta = sol.beta;
        row.h = h;
        row.lambda = lam;
        row.grad_inf_norm = Un.lpNorm<Eigen::Infinity>();
        row.l1_norm = sol.l1_norm();
        row.support_size = support_size(sol.beta);
        row.duality_gap = sol.lp.duality_gap;
        row.feasibility_residual = (prob.Vop * sol.beta - prob.rhs).lpNorm<Eigen::Infinity>() - lam;
        row.delta_proxy = !cfg.lambda_override;
        const double change = (sol.beta - beta).lpNorm<Eigen::Infinity>();
        beta = sol.beta;
        trace.iterates.push_back(std::move(row));
        trace.T = t;
        if (change < cfg.stall_tol) break;
    }
    trace.final = beta;
    return trace;
}

void write_hd_trace_csv(std::ostream& out, const HdTrace& trace) {
    const auto p = trace.iterates.empty() ? 0 : trace.iterates.front().beta.size();
    out << "t,h_t";
    for (Eigen::Index j = 1; j <= p; ++j) out << ",beta_" << j;
    out << ",grad_inf_norm,cond_est,ridge_used,lambda_t,l1_norm,support_size\n";
    for (const auto& r : trace.iterates) {
        out << r.t << ',' << fmt(r.h);
        for (Eigen::Index j = 0; j < p; ++j) out << ',' << fmt(r.beta[j]);
        out << ',' << fmt(r.grad_inf_norm) << ",nan,0," << fmt(r.lambda) << ','
            << fmt(r.l1_norm) << ',' << r.support_size << '\n';
    }
}

}  // namespace smse
