#include "smse/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smse/error.hpp"

namespace smse {

namespace {

struct SimpsonState {
    const std::function<double(double)>& f;
    int max_depth;
    bool exhausted = false;
};

double simpson_step(SimpsonState& st, double a, double b, double fa, double fm,
                    double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = st.f(lm);
    const double frm = st.f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth >= st.max_depth) {
        st.exhausted = true;
        return left + right + delta / 15.0;
    }
    return simpson_step(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           simpson_step(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol, int max_depth) {
    if (!(tol > 0.0) || !std::isfinite(tol)) tol = 1e-12;
    SimpsonState st{f, max_depth};
    // Two initial panels so that symmetric integrands cannot cancel the
    // first error estimate by accident.
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double flm = f(0.5 * (a + m)), frm = f(0.5 * (m + b));
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double value = simpson_step(st, a, m, fa, flm, fm, left, 0.5 * tol, 1) +
                         simpson_step(st, m, b, fm, frm, fb, right, 0.5 * tol, 1);
    if (st.exhausted)
        throw QuadratureError("adaptive Simpson did not converge to tol " + std::to_string(tol),
                              value);
    return value;
}

KernelConstants kernel_constants(const KernelSpec& k, double tol) {
    const int alpha = k.alpha;
    const auto& hp = k.evalHp;
    const double piU = integrate([&](double x) { return std::pow(x, alpha) * hp(x); }, -1.0, 1.0, tol);
    const double piV = integrate([&](double x) { const double v = hp(x); return v * v; }, -1.0, 1.0, tol);
    return {piU, piV};
}

KernelSpec make_kernel(int alpha, std::function<double(double)> H,
                       std::function<double(double)> Hp,
                       std::function<double(double)> Hpp, double tol) {
    if (alpha < 1) throw Error("kernel order alpha must be a positive integer");
    KernelSpec k;
    k.alpha = alpha;
    k.evalH = std::move(H);
    k.evalHp = std::move(Hp);
    k.evalHpp = std::move(Hpp);
    const auto c = kernel_constants(k, tol);
    k.piU = c.piU;
    k.piV = c.piV;
    return k;
}

KernelSpec biweight_integral_kernel() {
    KernelSpec k = make_kernel(2, biweight::H, biweight::Hp, biweight::Hpp);
    k.builtin_biweight = true;
    return k;
}

const KernelSpec& default_kernel() {
    static const KernelSpec k = biweight_integral_kernel();
    return k;
}

std::vector<MomentCheck> verify_order(const KernelSpec& k, double tol) {
    const double quad_tol = std::isfinite(tol) ? std::min(1e-12, 0.01 * tol) : 1e-12;
    std::vector<MomentCheck> table;
    for (int j = 0; j <= k.alpha; ++j) {
        const double v = integrate([&](double x) { return std::pow(x, j) * k.evalHp(x); },
                                   -1.0, 1.0, quad_tol);
        bool pass;
        if (!std::isfinite(tol))
            pass = true;
        else if (j == k.alpha)
            pass = std::fabs(v) > tol;
        else if (j == 0)
            pass = std::fabs(v - 1.0) <= tol;
        else
            pass = std::fabs(v) <= tol;
        table.push_back({j, v, pass});
    }
    return table;
}

}  // namespace smse
