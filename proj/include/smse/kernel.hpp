#pragma once

#include <functional>
#include <limits>
#include <vector>

namespace smse {

/// Smoother H: the integral of an order-alpha kernel H' supported on [-1, 1].
///
/// piU is the alpha-th moment of H' and piV the integral of (H')^2; both are
/// filled by quadrature when the spec is built through make_kernel().
/// Immutable after construction.
struct KernelSpec {
    int alpha = 2;
    std::function<double(double)> evalH;
    std::function<double(double)> evalHp;
    std::function<double(double)> evalHpp;
    double piU = 0.0;
    double piV = 0.0;
    /// Set only for the built-in biweight; lets hot loops inline the polynomials.
    bool builtin_biweight = false;
};

namespace biweight {

inline double H(double x) {
    if (x < -1.0) return 0.0;
    if (x > 1.0) return 1.0;
    const double x2 = x * x;
    return 0.5 + (15.0 / 16.0) * x * (1.0 - x2 * (2.0 / 3.0 - x2 / 5.0));
}

inline double Hp(double x) {
    if (x < -1.0 || x > 1.0) return 0.0;
    const double u = 1.0 - x * x;
    return (15.0 / 16.0) * u * u;
}

inline double Hpp(double x) {
    if (x < -1.0 || x > 1.0) return 0.0;
    return -(15.0 / 4.0) * x * (1.0 - x * x);
}

}  // namespace biweight

struct KernelConstants {
    double piU;
    double piV;
};

struct MomentCheck {
    int index;
    double value;
    bool pass;
};

/// Adaptive Simpson on [a, b] to absolute tolerance tol.
/// Throws QuadratureError (carrying the last estimate) when max_depth is hit.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10, int max_depth = 50);

/// Builds a kernel from H and its derivatives and fills piU, piV by quadrature.
KernelSpec make_kernel(int alpha, std::function<double(double)> H,
                       std::function<double(double)> Hp,
                       std::function<double(double)> Hpp, double tol = 1e-10);

/// alpha = 2 kernel H(x) = 1/2 + 15/16 (x - 2x^3/3 + x^5/5) on [-1, 1].
KernelSpec biweight_integral_kernel();

/// Shared immutable biweight instance used as the default smoother.
const KernelSpec& default_kernel();

/// piU = int x^alpha H'(x) dx and piV = int H'(x)^2 dx over [-1, 1].
KernelConstants kernel_constants(const KernelSpec& k, double tol = 1e-10);

/// Moments 0..alpha of H'. Moment 0 must be 1, moments 1..alpha-1 must
/// vanish (both within tol), and moment alpha must be nonzero.
std::vector<MomentCheck> verify_order(const KernelSpec& k, double tol = 1e-8);

inline bool all_pass(const std::vector<MomentCheck>& table) {
    for (const auto& m : table)
        if (!m.pass) return false;
    return true;
}

}  // namespace smse
