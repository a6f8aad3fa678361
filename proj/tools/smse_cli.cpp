#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "smse/distributed.hpp"
#include "smse/error.hpp"
#include "smse/highdim.hpp"
#include "smse/inference.hpp"
#include "smse/kernel.hpp"
#include "smse/parallel.hpp"
#include "smse/simlab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace smse;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw Error(where + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw Error("unknown key '" + key + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(std::string("config key '") + key + "' has the wrong type");
    }
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("config " + path + ": " + e.what());
    }
}

Vec to_vec(const json& j, const char* what) {
    if (!j.is_array()) throw Error(std::string(what) + " must be an array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw Error(std::string(what) + " must be an array of numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

SolveOptions solve_options(const json& cfg) {
    SolveOptions so;
    so.max_iters = get_or(cfg, "max_iters", so.max_iters);
    so.grad_tol = get_or(cfg, "grad_tol", so.grad_tol);
    return so;
}

struct Projection {
    std::string id;
    Vec v0;
};

std::vector<Projection> projections(const json& cfg, std::size_t p) {
    std::vector<Projection> out;
    if (cfg.contains("v0")) {
        const auto& list = cfg.at("v0");
        if (!list.is_object()) throw Error("v0 must map ids to vectors");
        for (const auto& [id, vec] : list.items()) {
            Vec v = to_vec(vec, "v0 entry");
            if (static_cast<std::size_t>(v.size()) != p) throw Error("v0 '" + id + "' has the wrong length");
            out.push_back({id, v});
        }
        return out;
    }
    out.push_back({"ones", Vec::Ones(static_cast<Eigen::Index>(p))});
    for (std::size_t j = 0; j < p; ++j)
        out.push_back({"e" + std::to_string(j + 1), Vec::Unit(static_cast<Eigen::Index>(p),
                                                              static_cast<Eigen::Index>(j))});
    return out;
}

int cmd_estimate(const json& cfg, const fs::path& out_dir) {
    reject_unknown(cfg,
                   {"mode", "data", "method", "L", "lambda_h", "alpha", "kappa", "xi", "T_override",
                    "ridge_eps", "plugin_lambda", "v0", "hd", "max_iters", "grad_tol", "threads",
                    "seed", "h"},
                   "estimate config");
    if (!cfg.contains("data")) throw Error("estimate config needs 'data'");
    const Dataset data = read_dataset_csv(cfg.at("data").get<std::string>());
    const std::string method = get_or<std::string>(cfg, "method", "mSMSE");
    const std::size_t L = get_or<std::size_t>(cfg, "L", 1);
    auto shards = partition(data.view(), L);
    const std::size_t n = data.size();
    const std::size_t p = data.dim();

    ScheduleConfig sc;
    sc.alpha = get_or(cfg, "alpha", 2);
    sc.lambda_h = get_or(cfg, "lambda_h", 1.0);
    if (cfg.contains("T_override") && !cfg.at("T_override").is_null())
        sc.T_override = cfg.at("T_override").get<int>();
    if (cfg.contains("ridge_eps") && !cfg.at("ridge_eps").is_null())
        sc.ridge_eps = cfg.at("ridge_eps").get<double>();
    sc.init_opts = solve_options(cfg);
    InferenceConfig ic{sc.alpha, get_or(cfg, "kappa", 0.5)};
    const double xi = get_or(cfg, "xi", 0.05);
    fs::create_directories(out_dir);

    std::vector<InferenceReport> reports;
    auto add_reports = [&](const Vec& beta, double h, double lambda_h) {
        const auto nu = estimate_nuisances(shards, beta, h, ic);
        for (const auto& pr : projections(cfg, p)) {
            auto r = confidence_interval(beta, nu, pr.v0, xi, n, lambda_h, sc.alpha);
            r.v0_id = pr.id;
            reports.push_back(std::move(r));
        }
    };

    if (method == "mSMSE") {
        EstimatorTrace trace;
        if (get_or(cfg, "plugin_lambda", false)) {
            auto run = msmse_plugin(shards, sc, ic);
            trace = std::move(run.second);
            sc.lambda_h = run.lambda_hat;
            std::cerr << "plug-in lambda_h = " << run.lambda_hat << '\n';
        } else {
            trace = msmse(shards, sc);
        }
        auto out = open_out(out_dir / "trace.csv");
        write_trace_csv(out, trace);
        add_reports(trace.final, trace.iterates.back().h, sc.lambda_h);
    } else if (method == "AvgSMSE") {
        const double h = get_or(cfg, "h", std::pow(sc.lambda_h / static_cast<double>(n),
                                                   1.0 / (2.0 * sc.alpha + 1.0)));
        EstimatorTrace trace;
        trace.final = avg_smse(shards, h, solve_options(cfg));
        trace.iterates.push_back({1, trace.final, h});
        trace.T = 1;
        auto out = open_out(out_dir / "trace.csv");
        write_trace_csv(out, trace);
        add_reports(trace.final, h, sc.lambda_h);
    } else if (method == "AvgMSE") {
        const auto local = local_mse_all(shards);
        auto r = avg_mse_interval(local, xi);
        r.v0_id = "ones";
        reports.push_back(r);
        EstimatorTrace trace;
        trace.final = Vec::Constant(1, r.point);
        trace.iterates.push_back({1, trace.final, 0.0});
        trace.T = 1;
        auto out = open_out(out_dir / "trace.csv");
        write_trace_csv(out, trace);
    } else if (method == "hdmSMSE") {
        const json hd = cfg.contains("hd") ? cfg.at("hd") : json::object();
        reject_unknown(hd,
                       {"C_lambda", "sparsity", "h_star", "decay", "rounds", "hessian_machine",
                        "init", "lambda"},
                       "hd config");
        HdConfig hc;
        hc.alpha = sc.alpha;
        hc.C_lambda = get_or(hd, "C_lambda", 1.0);
        if (hd.contains("sparsity")) hc.sparsity = hd.at("sparsity").get<int>();
        if (hd.contains("h_star")) hc.h_star = hd.at("h_star").get<double>();
        if (hd.contains("lambda")) hc.lambda_override = hd.at("lambda").get<double>();
        hc.decay = get_or(hd, "decay", 0.5);
        hc.rounds = get_or(hd, "rounds", 4);
        hc.hessian_machine = get_or<std::size_t>(hd, "hessian_machine", 0);
        if (!hd.contains("init")) throw Error("hdmSMSE needs hd.init (the initial estimate)");
        const Vec init = to_vec(hd.at("init"), "hd.init");
        const auto trace = hd_msmse(shards, hc, init);
        auto out = open_out(out_dir / "trace.csv");
        write_hd_trace_csv(out, trace);
    } else {
        throw Error("unknown method '" + method + "'");
    }
    auto out = open_out(out_dir / "inference.csv");
    write_inference_csv(out, reports);
    return 0;
}

int cmd_simulate(const json& cfg, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
    reject_unknown(cfg,
                   {"mode", "design", "methods", "max_t", "level", "lambda_h", "kappa", "alpha",
                    "timing", "mse_grid_steps", "max_iters", "grad_tol", "threads", "seed", "name"},
                   "simulate config");
    if (!cfg.contains("design")) throw Error("simulate config needs 'design'");
    const json& dj = cfg.at("design");
    reject_unknown(dj, {"p", "m", "exponents", "exponent", "noise", "sigma", "reps", "seed"},
                   "design");
    StudyConfig sc;
    sc.design.p = get_or<std::size_t>(dj, "p", 1);
    sc.design.m = get_or<std::size_t>(dj, "m", 5000);
    sc.design.noise.kind = parse_noise_kind(get_or<std::string>(dj, "noise", "HomoNormal"));
    sc.design.noise.sigma = get_or(dj, "sigma", 0.25);
    sc.design.reps = get_or(dj, "reps", 200);
    sc.design.seed = seed ? *seed : get_or<std::uint64_t>(dj, "seed", get_or<std::uint64_t>(cfg, "seed", 1));
    std::vector<double> exponents;
    if (dj.contains("exponents")) exponents = dj.at("exponents").get<std::vector<double>>();
    else exponents.push_back(get_or(dj, "exponent", 1.35));
    if (exponents.empty()) throw Error("design needs at least one exponent");
    if (cfg.contains("methods")) {
        sc.methods.clear();
        for (const auto& m : cfg.at("methods")) sc.methods.push_back(parse_method(m.get<std::string>()));
    }
    sc.max_t = get_or(cfg, "max_t", 3);
    sc.level = get_or(cfg, "level", 0.95);
    sc.lambda_h = get_or(cfg, "lambda_h", 1.0);
    sc.inference.alpha = get_or(cfg, "alpha", 2);
    sc.inference.kappa = get_or(cfg, "kappa", 0.5);
    sc.timing = get_or(cfg, "timing", false);
    sc.mse_grid_steps = get_or(cfg, "mse_grid_steps", 2001);
    sc.solve = solve_options(cfg);
    sc.design_name = get_or<std::string>(cfg, "name", "");
    if (sc.design.reps < 1) throw Error("design.reps must be >= 1");

    std::vector<MetricsRow> rows;
    for (double e : exponents) {
        sc.design.exponent = e;
        auto r = run_study(sc);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    fs::create_directories(out_dir);
    {
        auto out = open_out(out_dir / "metrics.csv");
        write_metrics_csv(out, rows);
    }
    auto out = open_out(out_dir / "metrics.txt");
    write_metrics_table(out, rows);
    write_metrics_table(std::cout, rows);
    return 0;
}

int cmd_verify_kernel(double tol) {
    const auto& k = default_kernel();
    const auto table = verify_order(k, tol);
    std::cout << "moment  value                    pass\n";
    for (const auto& row : table)
        std::cout << row.index << "       " << row.value << (row.pass ? "  yes" : "  NO") << '\n';
    const auto c = kernel_constants(k, 1e-12);
    std::cout << "pi_U = " << c.piU << " (1/7 = " << 1.0 / 7 << ")\n";
    std::cout << "pi_V = " << c.piV << " (5/7 = " << 5.0 / 7 << ")\n";
    return all_pass(table) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed smoothed maximum score estimation"};
    app.require_subcommand(1);
    std::string config;
    std::string out_dir = ".";
    std::size_t threads = 1;
    std::optional<std::uint64_t> seed;
    double tol = 1e-8;

    auto* est = app.add_subcommand("estimate", "estimate from a CSV dataset");
    auto* sim = app.add_subcommand("simulate", "run a Monte Carlo study");
    auto* ker = app.add_subcommand("verify-kernel", "check the built-in kernel's order and constants");
    for (auto* sub : {est, sim}) {
        sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "override the configured seed");
    }
    ker->add_option("--tol", tol, "moment tolerance");

    CLI11_PARSE(app, argc, argv);
    try {
        set_num_threads(threads);
        if (ker->parsed()) return cmd_verify_kernel(tol);
        const json cfg = load_config(config);
        if (!cfg.is_object()) throw Error("config must be a JSON object");
        if (cfg.contains("threads") && threads == 1) set_num_threads(cfg.at("threads").get<std::size_t>());
        if (est->parsed()) return cmd_estimate(cfg, out_dir);
        return cmd_simulate(cfg, out_dir, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
