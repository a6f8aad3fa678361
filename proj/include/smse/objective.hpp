#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "smse/dataset.hpp"
#include "smse/kernel.hpp"

namespace smse {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Gradient/Hessian payload of the smoothed objective on one block of data.
/// U is the gradient, V the Hessian, count the number of observations.
struct Moments {
    Vec U;
    Mat V;
    std::size_t count = 0;
};

/// (1/n) sum (-y_i) 1[x_i + z_i'beta >= 0].
double score_objective(const DataView& data, const Vec& beta);

/// (1/n) sum (-y_i) H((x_i + z_i'beta) / h).
double smoothed_objective(const DataView& data, const Vec& beta, double h,
                          const KernelSpec& k = default_kernel());

/// 1/(n h) sum (-y_i) H'(.) z_i.
Vec smoothed_gradient(const DataView& data, const Vec& beta, double h,
                      const KernelSpec& k = default_kernel());

/// 1/(n h^2) sum (-y_i) H''(.) z_i z_i'.
Mat smoothed_hessian(const DataView& data, const Vec& beta, double h,
                     const KernelSpec& k = default_kernel());

struct ValueGradient {
    double value;
    Vec gradient;
};

/// Objective and gradient in a single pass.
ValueGradient smoothed_value_gradient(const DataView& data, const Vec& beta, double h,
                                      const KernelSpec& k = default_kernel());

/// Gradient and Hessian at (beta, h) in one pass; beta - V^{-1} U is the
/// Newton step on the smoothed objective.
Moments newton_moments(const DataView& data, const Vec& beta, double h,
                       const KernelSpec& k = default_kernel());

/// 1/(n h) sum H'(.)^2 z_i z_i', the plug-in for the score covariance.
Mat squared_score_matrix(const DataView& data, const Vec& beta, double h,
                         const KernelSpec& k = default_kernel());

/// Size-weighted average of Moments; equals the Moments of the concatenated data.
Moments pool_moments(std::span<const Moments> parts);

}  // namespace smse
