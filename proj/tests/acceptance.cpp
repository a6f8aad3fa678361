// One PASS/FAIL line per acceptance criterion. `acceptance --only 5,8` runs a subset.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include "oracles.hpp"
#include "smse/distributed.hpp"
#include "smse/error.hpp"
#include "smse/highdim.hpp"
#include "smse/kernel.hpp"
#include "smse/objective.hpp"
#include "smse/simlab.hpp"

using namespace smse;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string f3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome c1_kernel() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& k = default_kernel();
    const auto table = verify_order(k, 1e-8);
    const double piU = integrate([&](double x) { return x * x * k.evalHp(x); }, -1, 1, 1e-12);
    const double piV = integrate([&](double x) { return k.evalHp(x) * k.evalHp(x); }, -1, 1, 1e-12);
    const double eU = std::fabs(piU - 1.0 / 7), eV = std::fabs(piV - 5.0 / 7);
    const double eK = std::max(std::fabs(k.piU - 1.0 / 7), std::fabs(k.piV - 5.0 / 7));
    const double secs = seconds_since(t0);
    const bool ok = all_pass(table) && eU < 1e-8 && eV < 1e-8 && eK < 1e-8 && secs < 1.0;
    return {ok, "verify_order " + std::string(all_pass(table) ? "passes" : "fails") + ", |piU-1/7|=" + sci(eU) +
                    ", |piV-5/7|=" + sci(eV) + " (tol 1e-8), " + f3(secs) + " s (< 1 s)"};
}

Outcome c2_calculus() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240501);
    std::uniform_int_distribution<int> nd(1, 50), pd(1, 5);
    std::uniform_real_distribution<double> hd(0.1, 1.0);
    std::normal_distribution<double> N;
    double worst_g = 0, worst_H = 0;
    for (int inst = 0; inst < 200; ++inst) {
        const auto n = static_cast<std::size_t>(nd(rng));
        const auto p = static_cast<std::size_t>(pd(rng));
        const double h = hd(rng);
        Dataset d(p);
        std::vector<double> z(p);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : z) v = N(rng);
            d.add(N(rng) > 0 ? 1 : -1, N(rng), z);
        }
        Vec b(static_cast<Eigen::Index>(p));
        for (auto& v : b) v = 0.5 * N(rng);
        const Vec g = smoothed_gradient(d, b, h);
        const Mat H = smoothed_hessian(d, b, h);
        const Vec gf = oracle::fd_gradient([&](const Vec& v) { return smoothed_objective(d, v, h); }, b);
        const Mat Hf = oracle::fd_jacobian([&](const Vec& v) { return smoothed_gradient(d, v, h); }, b);
        // relative error against the larger of the two norms; both zero counts as exact
        auto rel = [](double diff, double a, double b2) { return diff == 0 ? 0.0 : diff / std::max({a, b2, 1e-6}); };
        worst_g = std::max(worst_g, rel((g - gf).norm(), g.norm(), gf.norm()));
        worst_H = std::max(worst_H, rel((H - Hf).norm(), H.norm(), Hf.norm()));
    }
    const double secs = seconds_since(t0);
    return {worst_g < 1e-5 && worst_H < 1e-4 && secs < 10,
            "200 instances, worst rel err gradient " + sci(worst_g) + " (< 1e-5), Hessian " + sci(worst_H) +
                " (< 1e-4), " + f3(secs) + " s (< 10 s)"};
}

Outcome c3_transparency() {
    const auto t0 = std::chrono::steady_clock::now();
    DesignConfig des;
    des.p = 5;
    des.seed = 303;
    const std::size_t n = 10000;
    const auto d = generate_n(des, n, 0);
    ScheduleConfig cfg;
    cfg.T_override = 3;
    // With lambda_h = 2 the floor (2/n)^{1/5} exceeds m^{-1/3} for every m >= 200, so all
    // shard counts below share one bandwidth sequence.
    cfg.lambda_h = 2.0;
    const Vec init = initial_estimator(d.view().slice(0, 200), std::pow(200.0, -0.2), {});
    const auto ref = msmse(partition(d, 1), cfg, init);
    double worst = 0;
    bool same_h = true;
    for (std::size_t L : {2, 5, 10, 50}) {
        const auto tr = msmse(partition(d, L), cfg, init);
        if (tr.iterates.size() != ref.iterates.size()) return {false, "trace length differs at L=" + std::to_string(L)};
        for (std::size_t t = 0; t < tr.iterates.size(); ++t) {
            worst = std::max(worst, (tr.iterates[t].beta - ref.iterates[t].beta).lpNorm<Eigen::Infinity>());
            if (t > 0) same_h = same_h && tr.iterates[t].h == ref.iterates[t].h;
        }
    }
    const double secs = seconds_since(t0);
    return {same_h && worst <= 1e-10 && secs < 30,
            "n=1e4, p=5, L in {1,2,5,10,50}: max sup-norm iterate gap " + sci(worst) + " (<= 1e-10), " + f3(secs) +
                " s (< 30 s)"};
}

Outcome c4_iterations() {
    const int T = num_iterations(1000000000, 1000, ScheduleConfig{});
    return {T == 3, "num_iterations(1e9, 1000, alpha=2, lambda_h=1) = " + std::to_string(T) + " (expected 3)"};
}

const MetricsRow* find_row(const std::vector<MetricsRow>& rows, double expo, const std::string& method,
                           std::optional<int> t) {
    for (const auto& r : rows)
        if (std::fabs(r.exponent - expo) < 1e-12 && r.method == method && r.t == t) return &r;
    return nullptr;
}

std::vector<MetricsRow> study(const StudyConfig& base, const std::vector<double>& exponents) {
    std::vector<MetricsRow> all;
    for (double e : exponents) {
        StudyConfig c = base;
        c.design.exponent = e;
        const auto rows = run_study(c);
        all.insert(all.end(), rows.begin(), rows.end());
    }
    return all;
}

Outcome c5_coverage_p1() {
    const auto t0 = std::chrono::steady_clock::now();
    StudyConfig cfg;
    cfg.design.p = 1;
    cfg.design.m = 5000;
    cfg.design.reps = 200;
    cfg.design.seed = 515;
    cfg.methods = {Method::mSMSE, Method::AvgSMSE};
    cfg.max_t = 3;
    const std::vector<double> ex{1.35, 1.55, 1.75};
    const double target[] = {0.96, 0.96, 0.95};
    const auto rows = study(cfg, ex);
    bool ok = true;
    std::string msg = "mSMSE t=3 coverage";
    for (std::size_t i = 0; i < ex.size(); ++i) {
        const auto* r = find_row(rows, ex[i], "mSMSE", 3);
        const double c = r ? r->coverage : -1;
        ok = ok && r && std::fabs(c - target[i]) <= 0.04;
        msg += " " + f3(c) + "@" + f3(ex[i]).substr(0, 4) + " (target " + f3(target[i]).substr(0, 4) + "+-0.04)";
    }
    const auto* a135 = find_row(rows, 1.35, "AvgSMSE", std::nullopt);
    const auto* a175 = find_row(rows, 1.75, "AvgSMSE", std::nullopt);
    const auto* a155 = find_row(rows, 1.55, "AvgSMSE", std::nullopt);
    ok = ok && a135 && a175 && a135->coverage <= 0.95 && a175->coverage <= 0.10;
    const double secs = seconds_since(t0);
    ok = ok && secs <= 1800;
    msg += "; Avg-SMSE coverage " + f3(a135 ? a135->coverage : -1) + "@1.35 (<= 0.95), " +
           f3(a155 ? a155->coverage : -1) + "@1.55, " + f3(a175 ? a175->coverage : -1) +
           "@1.75 (<= 0.10), bias@1.75 " + f3(a175 ? a175->bias * 100 : 0) + "e-2; 200 reps, " + f3(secs) +
           " s (<= 1800 s)";
    return {ok, msg};
}

Outcome c6_coverage_p10() {
    const auto t0 = std::chrono::steady_clock::now();
    StudyConfig cfg;
    cfg.design.p = 10;
    cfg.design.m = 5000;
    cfg.design.reps = 100;
    cfg.design.seed = 616;
    cfg.methods = {Method::mSMSE, Method::AvgSMSE};
    cfg.max_t = 3;
    const auto rows = study(cfg, {1.55});
    const auto* m3 = find_row(rows, 1.55, "mSMSE", 3);
    const auto* av = find_row(rows, 1.55, "AvgSMSE", std::nullopt);
    const double secs = seconds_since(t0);
    const bool ok = m3 && av && m3->coverage >= 0.90 && m3->coverage <= 0.99 && av->coverage <= 0.5 && secs <= 3600;
    return {ok, "p=10, exponent 1.55, 100 reps: mSMSE t=3 coverage " + f3(m3 ? m3->coverage : -1) +
                    " (in [0.90,0.99]), Avg-SMSE " + f3(av ? av->coverage : -1) + " (<= 0.5), " + f3(secs) +
                    " s (<= 3600 s)"};
}

Outcome c7_rate() {
    const auto t0 = std::chrono::steady_clock::now();
    DesignConfig des;
    des.p = 1;
    des.m = 5000;
    des.seed = 707;
    const std::vector<std::size_t> grid{10000, 30000, 100000, 300000};
    const int reps = 50;
    std::vector<double> lx, ly;
    std::string errs;
    for (std::size_t n : grid) {
        double sum = 0;
        for (int r = 0; r < reps; ++r) {
            const auto d = generate_n(des, n, r);
            const auto tr = msmse(partition(d, n / des.m), ScheduleConfig{});
            sum += (tr.final - true_beta(des)).norm();
        }
        lx.push_back(std::log(double(n)));
        ly.push_back(std::log(sum / reps));
        errs += " " + sci(sum / reps);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = sxy / sxx;
    return {slope >= -0.55 && slope <= -0.25,
            "mean error over n={1e4,3e4,1e5,3e5}:" + errs + "; slope " + f3(slope) + " (in [-0.55,-0.25]), " +
                f3(seconds_since(t0)) + " s"};
}

Outcome c8_dantzig() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(808);
    std::normal_distribution<double> N;
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst_obj = 0, worst_gap = 0, worst_infeas = 0, worst_cs = 0;
    int infeasible_ok = 0, mismatched = 0;
    for (int inst = 0; inst < 500; ++inst) {
        const long p = 1 + inst % 4;
        Mat V(p, p);
        for (auto& x : V.reshaped()) x = N(rng);
        if (inst % 3 == 0) V = V * V.transpose();
        Vec r(p);
        for (auto& x : r) x = N(rng);
        const double lam = U(rng) * r.lpNorm<Eigen::Infinity>();
        const double best = oracle::dantzig_by_vertices(V, r, lam);
        if (!std::isfinite(best)) {
            try {
                solve_dantzig({V, r, lam});
                ++mismatched;
            } catch (const InfeasibleError&) {
                ++infeasible_ok;
            }
            continue;
        }
        const auto res = solve_dantzig({V, r, lam});
        worst_obj = std::max(worst_obj, std::fabs(res.l1_norm() - best));
        worst_gap = std::max(worst_gap, res.lp.duality_gap);
        worst_infeas = std::max({worst_infeas, res.lp.primal_infeasibility, res.lp.dual_infeasibility});
        worst_cs = std::max(worst_cs, res.lp.cs_residual);
    }
    const double secs = seconds_since(t0);
    // cs_residual is reported only: it is an unscaled product and duals reach 1e6 on
    // near-singular V
    return {worst_obj < 1e-8 && worst_gap < 1e-8 && worst_infeas < 1e-8 && mismatched == 0 && secs < 30,
            "500 instances p<=4: max |objective - vertex oracle| " + sci(worst_obj) + " (< 1e-8), max duality gap " +
                sci(worst_gap) + " (< 1e-8), max primal/dual infeasibility " + sci(worst_infeas) +
                " (< 1e-8), max |y*slack| " + sci(worst_cs) + ", infeasible mismatches " + std::to_string(mismatched) + ", " +
                std::to_string(infeasible_ok) + " infeasible confirmed, " + f3(secs) + " s (< 30 s)"};
}

Outcome c9_highdim() {
    const auto t0 = std::chrono::steady_clock::now();
    DesignConfig des;
    des.p = 200;
    des.sparsity = 3;
    des.m = 4000;
    des.seed = 909;
    const std::size_t n = 20000, L = n / des.m, s = 3;
    const Vec bstar = true_beta(des);
    HdConfig hc;
    hc.sparsity = static_cast<int>(s);
    hc.rounds = 4;
    hc.C_lambda = 0.3;
    // bandwidth with s^2 log p / (m h^3) = 0.1, the restricted-eigenvalue condition for the
    // single-machine Hessian
    hc.h_star = std::cbrt(double(s * s) * std::log(double(des.p)) / (0.1 * double(des.m)));
    const int reps = 50;
    int monotone = 0, covered = 0;
    for (int rep = 0; rep < reps; ++rep) {
        const auto d = generate_n(des, n, rep);
        std::mt19937_64 rng(rep_seed(des.seed + 1, static_cast<std::uint64_t>(rep)));
        std::normal_distribution<double> N;
        Vec init = bstar;
        for (auto& v : init) v += 0.3 / std::sqrt(double(des.p)) * N(rng);
        const auto tr = hd_msmse(partition(d, L), hc, init);
        bool mono = true;
        for (std::size_t t = 1; t < tr.iterates.size(); ++t)
            mono = mono && (tr.iterates[t].beta - bstar).norm() <= (tr.iterates[t - 1].beta - bstar).norm();
        monotone += mono;
        const auto S = support(tr.final, 1e-3);
        const std::set<Eigen::Index> Sset(S.begin(), S.end());
        bool all = true;
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(s); ++j) all = all && Sset.count(j);
        covered += all;
    }
    const double secs = seconds_since(t0);
    const double fm = double(monotone) / reps, fs = double(covered) / reps;
    return {fm >= 0.8 && fs >= 0.8 && secs <= 1200,
            "p=200, s=3, n=2e4, m=4e3, 50 reps: l2 error non-increasing in " + f3(fm) +
                " (>= 0.8), support recovered in " + f3(fs) + " (>= 0.8), h=" + f3(*hc.h_star) + ", C_lambda=0.3, " +
                f3(secs) + " s (<= 1200 s)"};
}

Outcome c10_weights() {
    Mat V(3, 3), Vs(3, 3);
    V << 2, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 1;
    Vs << 1, 0.1, 0, 0.1, 0.8, 0.05, 0, 0.05, 0.6;
    const std::vector<Mat> Vl(5, V), Vsl(5, Vs);
    const std::vector<std::size_t> m(5, 1000);
    double worst = 0;
    for (auto method : {WeightMethod::wAvg, WeightMethod::wmSMSE})
        for (const auto& W : optimal_weights(Vl, Vsl, m, method))
            worst = std::max(worst, (W - Mat::Identity(3, 3) / 5).lpNorm<Eigen::Infinity>());
    const std::vector<Mat> v2{Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, 1.0)};
    const std::vector<Mat> s2{Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0)};
    const auto w = optimal_weights(v2, s2, std::vector<std::size_t>{1, 1}, WeightMethod::wmSMSE);
    const double e2 = std::max(std::fabs(w[0](0, 0) - 2.0 / 3), std::fabs(w[1](0, 0) - 1.0 / 3));
    return {worst <= 1e-10 && e2 <= 1e-12,
            "homogeneous weights within " + sci(worst) + " of I/L (<= 1e-10); scalar wmSMSE weights (" +
                f3(w[0](0, 0)) + ", " + f3(w[1](0, 0)) + ") vs (2/3, 1/3), err " + sci(e2)};
}

Outcome c11_determinism() {
    const fs::path root = fs::temp_directory_path() / ("smse_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root / "a");
    fs::create_directories(root / "b");
    {
        std::ofstream c(root / "sim.json");
        c << R"({"mode":"simulate","design":{"p":1,"m":400,"exponents":[1.3,1.4],"reps":20,"seed":1111},)"
             R"("methods":["mSMSE","AvgSMSE","AvgMSE","pooledSMSE"],"max_t":3})";
    }
    auto run = [&](const fs::path& out) {
        const std::string cmd = std::string("\"") + SMSE_CLI_PATH + "\" simulate --threads 2 --config \"" +
                                (root / "sim.json").string() + "\" --out \"" + out.string() + "\" > /dev/null";
        return std::system(cmd.c_str());
    };
    const int ra = run(root / "a"), rb = run(root / "b");
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const auto a = slurp(root / "a" / "metrics.csv"), b = slurp(root / "b" / "metrics.csv");
    fs::remove_all(root);
    const bool ok = ra == 0 && rb == 0 && !a.empty() && a == b;
    return {ok, "two CLI simulate runs (20 reps, 2 exponents, 4 methods): metrics.csv " +
                    std::string(a == b && !a.empty() ? "byte-identical" : "differ or missing") + " (" +
                    std::to_string(a.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"kernel contract", c1_kernel},
        {"calculus correctness", c2_calculus},
        {"distribution transparency", c3_transparency},
        {"iteration count", c4_iterations},
        {"coverage, p=1 grid", c5_coverage_p1},
        {"coverage, p=10", c6_coverage_p10},
        {"rate check", c7_rate},
        {"Dantzig LP", c8_dantzig},
        {"high-dimensional pattern", c9_highdim},
        {"weighted reductions", c10_weights},
        {"determinism", c11_determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  C" << id << " " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
