#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "smse/error.hpp"
#include "smse/inference.hpp"
#include "smse/normal.hpp"
#include "smse/simlab.hpp"

using namespace smse;

namespace {

NuisanceEstimates scalar_nu(double V, double Vs, double U) {
    NuisanceEstimates nu;
    nu.Vhat = Mat::Constant(1, 1, V);
    nu.Vshat = Mat::Constant(1, 1, Vs);
    nu.Uhat = Vec::Constant(1, U);
    return nu;
}

NuisanceEstimates random_nu(std::mt19937_64& rng, long p) {
    std::normal_distribution<double> N;
    NuisanceEstimates nu;
    Mat A(p, p), B(p, p);
    for (auto& x : A.reshaped()) x = N(rng);
    for (auto& x : B.reshaped()) x = N(rng);
    nu.Vhat = A * A.transpose() + Mat::Identity(p, p);
    nu.Vshat = B * B.transpose() + 0.1 * Mat::Identity(p, p);
    nu.Uhat = Vec(p);
    for (auto& x : nu.Uhat) x = N(rng);
    return nu;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("normal quantile") {
    CHECK(std::fabs(normal_quantile(0.975) - 1.959964) < 1e-5);
    CHECK(std::fabs(normal_quantile(0.5)) < 1e-15);
    CHECK(std::fabs(normal_quantile(0.05) + 1.6448536) < 1e-6);
    CHECK_THROWS(normal_quantile(0.0));
    CHECK_THROWS(normal_quantile(1.0));
}

TEST_CASE("optimal lambda") {
    CHECK(optimal_lambda(scalar_nu(1, 1, 1), 2) == doctest::Approx(0.25).epsilon(1e-15));
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        auto nu = random_nu(rng, 1 + i % 4);
        const double base = optimal_lambda(nu, 2);
        CHECK(base > 0);
        nu.Uhat *= 3.0;
        CHECK(optimal_lambda(nu, 2) == doctest::Approx(base / 9).epsilon(1e-12));
    }
    CHECK_THROWS_AS(optimal_lambda(scalar_nu(1, 1, 0), 2), Error);
    CHECK_THROWS_AS(optimal_lambda(scalar_nu(0, 1, 1), 2), Error);
}

TEST_CASE("confidence interval formulas") {
    const auto nu = scalar_nu(2.0, 0.5, 0.3);
    const Vec beta = Vec::Constant(1, 1.1);
    const Vec v0 = Vec::Ones(1);
    const std::size_t n = 100000;
    const auto r = confidence_interval(beta, nu, v0, 0.05, n, 1.0, 2);
    const double bias = -std::pow(1e5, -0.4) * 0.3 / 2.0;
    const double se = std::sqrt(std::pow(1e5, -0.8) * 0.5 / 4.0);
    CHECK(r.point == 1.1);
    CHECK(r.bias_hat == doctest::Approx(bias).epsilon(1e-13));
    CHECK(r.se_hat == doctest::Approx(se).epsilon(1e-13));
    CHECK(r.ci_lo == doctest::Approx(1.1 + bias - 1.959964 * se).epsilon(1e-6));
    CHECK(r.ci_hi == doctest::Approx(1.1 + bias + 1.959964 * se).epsilon(1e-6));
    CHECK(r.level == doctest::Approx(0.95));
    CHECK(r.ci_lo <= r.ci_hi);

    const auto z = confidence_interval(beta, scalar_nu(2.0, 0.5, 0.0), v0, 0.05, n, 1.0, 2);
    CHECK(z.bias_hat == 0.0);
    CHECK(z.ci_hi - z.point == doctest::Approx(z.point - z.ci_lo).epsilon(1e-14));

    CHECK_THROWS_AS(confidence_interval(beta, scalar_nu(2.0, 0.0, 0.1), v0, 0.05, n, 1.0, 2), Error);
    CHECK_THROWS_AS(confidence_interval(beta, nu, v0, 0.0, n, 1.0, 2), Error);
    CHECK_THROWS_AS(confidence_interval(beta, nu, v0, 1.0, n, 1.0, 2), Error);
}

TEST_CASE("property: scaling laws of bias and standard error in lambda and n") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 30; ++i) {
        const long p = 1 + i % 5;
        const auto nu = random_nu(rng, p);
        const Vec beta = Vec::Random(p);
        const Vec v0 = Vec::Random(p) + Vec::Constant(p, 0.1);
        const auto a = confidence_interval(beta, nu, v0, 0.05, 10000, 1.5, 2);
        const auto b = confidence_interval(beta, nu, v0, 0.05, 10000, 3.0, 2);
        CHECK(b.bias_hat == doctest::Approx(a.bias_hat * std::pow(2.0, 0.4)).epsilon(1e-12));
        CHECK(b.se_hat == doctest::Approx(a.se_hat * std::pow(2.0, -0.1)).epsilon(1e-12));
        const auto c = confidence_interval(beta, nu, v0, 0.05, 320000, 1.5, 2);
        CHECK(c.bias_hat == doctest::Approx(a.bias_hat * std::pow(32.0, -0.4)).epsilon(1e-12));
        CHECK(c.se_hat == doctest::Approx(a.se_hat * std::pow(32.0, -0.4)).epsilon(1e-12));
    }
}

TEST_CASE("average-MSE interval") {
    const double eq[] = {0.7, 0.7, 0.7};
    const auto e = avg_mse_interval(eq, 0.05);
    CHECK(e.ci_lo == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(e.ci_hi == e.ci_lo);
    const double two[] = {0.0, 2.0};
    const auto t = avg_mse_interval(two, 0.05);
    CHECK(t.point == 1.0);
    CHECK(t.se_hat == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(t.ci_lo == doctest::Approx(1 - 1.959964).epsilon(1e-6));
    CHECK(t.ci_hi == doctest::Approx(1 + 1.959964).epsilon(1e-6));
    std::vector<double> v{0.3, 1.2, 0.9, 1.05, 0.8};
    const auto a = avg_mse_interval(v, 0.1);
    std::reverse(v.begin(), v.end());
    std::swap(v[1], v[3]);
    const auto b = avg_mse_interval(v, 0.1);
    CHECK(a.ci_lo == doctest::Approx(b.ci_lo).epsilon(1e-15));
    CHECK(a.ci_hi == doctest::Approx(b.ci_hi).epsilon(1e-15));
    const double one[] = {1.0};
    CHECK_THROWS_AS(avg_mse_interval(one, 0.05), Error);
}

TEST_CASE("nuisances: definitions and partition invariance") {
    DesignConfig des;
    des.p = 3;
    des.seed = 4;
    const auto d = generate_n(des, 6000, 0);
    const Vec b = true_beta(des);
    const double h = 0.3;
    const InferenceConfig cfg;
    const auto one = estimate_nuisances(partition(d, 1), b, h, cfg);
    const auto rows = oracle::rows(d);
    CHECK((one.Vhat - oracle::hessian(rows, b, h)).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((one.Vhat - aggregate(collect_moments(partition(d, 3), b, h)).V).lpNorm<Eigen::Infinity>() < 1e-12);
    const double hk = std::pow(6000.0, -0.1);
    CHECK(one.h_kappa == doctest::Approx(hk).epsilon(1e-14));
    CHECK(one.h_used == h);
    Vec U = Vec::Zero(3);
    Mat S = Mat::Zero(3, 3);
    for (const auto& o : rows) {
        U += o.y * oracle::Hp((o.x + o.z.dot(b)) / hk) * o.z;
        const double w = oracle::Hp((o.x + o.z.dot(b)) / h);
        S += w * w * o.z * o.z.transpose();
    }
    U /= 6000 * std::pow(hk, 3);
    S /= 6000 * h;
    CHECK((one.Uhat - U).lpNorm<Eigen::Infinity>() < 1e-11);
    CHECK((one.Vshat - S).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((one.Vhat - one.Vhat.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12);
    for (std::size_t L : {2, 5, 12}) {
        const auto s = estimate_nuisances(partition(d, L), b, h, cfg);
        CHECK((s.Vhat - one.Vhat).lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK((s.Vshat - one.Vshat).lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK((s.Uhat - one.Uhat).lpNorm<Eigen::Infinity>() < 1e-12 * (1 + one.Uhat.norm()));
    }
}

TEST_CASE("nuisances vanish outside the kernel window") {
    Dataset d(1);
    d.add(1, 3.0, std::vector<double>{0.5});
    d.add(-1, -3.0, std::vector<double>{0.5});
    const auto nu = estimate_nuisances(partition(d, 1), Vec::Zero(1), 0.5);
    CHECK(nu.Vshat.isZero(0.0));
    CHECK(nu.Vhat.isZero(0.0));
}

TEST_CASE("nuisances match the analytic values of the simulation design") {
    // x ~ N(0,1), z ~ N(0,1), eps ~ N(0, 0.25^2), beta* = 1. The second
    // derivative of the population score objective at beta* is
    //   V = 2 f_eps(0) E[z^2 phi(z)],
    // and Vs = pi_V E[z^2 phi(z)] with pi_V = int H'^2 = 5/7.
    const double sigma = 0.25;
    const double pi = 3.14159265358979323846;
    auto phi = [&](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * pi); };
    const double ez2phi = oracle::simpson([&](double z) { return z * z * phi(z) * phi(z); }, -12, 12);
    const double V = 2 * phi(0) / sigma * ez2phi;
    const double Vs = 5.0 / 7.0 * ez2phi;
    CHECK(V == doctest::Approx(0.4502).epsilon(1e-3));

    DesignConfig des;
    des.p = 1;
    des.seed = 3;
    const std::size_t n = 100000;
    const auto d = generate_n(des, n, 0);
    const auto nu = estimate_nuisances(partition(d, 10), true_beta(des), std::pow(double(n), -0.2));
    CHECK(std::fabs(nu.Vhat(0, 0) - V) <= 0.25 * V);
    CHECK(std::fabs(nu.Vshat(0, 0) - Vs) <= 0.25 * Vs);
}

TEST_CASE("plug-in pass reruns from the same start") {
    DesignConfig des;
    des.p = 1;
    des.seed = 8;
    const auto d = generate_n(des, 20000, 0);
    const auto s = partition(d, 4);
    ScheduleConfig c;
    c.T_override = 2;
    const Vec init = Vec::Constant(1, 0.9);
    const auto run = msmse_plugin(s, c, {}, init);
    CHECK(run.first.iterates[0].beta == init);
    CHECK(run.second.iterates[0].beta == init);
    CHECK(run.lambda_hat > 0);
    const auto nu = estimate_nuisances(s, run.first.final, run.first.iterates.back().h);
    CHECK(run.lambda_hat == doctest::Approx(optimal_lambda(nu, 2)).epsilon(1e-12));
    ScheduleConfig c2 = c;
    c2.lambda_h = run.lambda_hat;
    CHECK((msmse(s, c2, init).final - run.second.final).norm() < 1e-14);
}

TEST_CASE("inference CSV") {
    InferenceReport r;
    r.v0_id = "ones";
    r.point = 1.5;
    r.ci_lo = 1.0;
    r.ci_hi = 2.0;
    std::ostringstream os;
    write_inference_csv(os, std::span<const InferenceReport>(&r, 1));
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "v0_id,point,bias_hat,se_hat,ci_lo,ci_hi,level,lambda_h,kappa");
    CHECK(row.rfind("ones,1.5,0,0,1,2,0.95,1,0.5", 0) == 0);
}

}
