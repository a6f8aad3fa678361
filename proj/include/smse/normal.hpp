#pragma once

#include <boost/math/distributions/normal.hpp>

#include "smse/error.hpp"

namespace smse {

/// Standard normal quantile; p must lie in (0, 1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error("normal_quantile: p must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double normal_cdf(double x) {
    return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

}  // namespace smse
