#include "smse/objective.hpp"

#include <cmath>
#include <vector>

#include "smse/error.hpp"

namespace smse {

namespace {

constexpr std::size_t kBlock = 4096;

struct BiweightFns {
    double H(double a) const { return biweight::H(a); }
    double Hp(double a) const { return biweight::Hp(a); }
    double Hpp(double a) const { return biweight::Hpp(a); }
};

struct GenericFns {
    const KernelSpec& k;
    double H(double a) const { return k.evalH(a); }
    double Hp(double a) const { return k.evalHp(a); }
    double Hpp(double a) const { return k.evalHpp(a); }
};

template <class Fn>
decltype(auto) with_kernel(const KernelSpec& k, Fn&& fn) {
    if (k.builtin_biweight) return fn(BiweightFns{});
    return fn(GenericFns{k});
}

/// Two-level extended-precision accumulator: observations are summed into a
/// block buffer which is flushed into the running total every kBlock rows.
class BlockSum {
public:
    explicit BlockSum(std::size_t len) : block_(len, 0.0L), total_(len, 0.0L) {}
    long double* block() noexcept { return block_.data(); }
    void tick() {
        if (++rows_ == kBlock) flush();
    }
    void flush() {
        for (std::size_t j = 0; j < block_.size(); ++j) {
            total_[j] += block_[j];
            block_[j] = 0.0L;
        }
        rows_ = 0;
    }
    const std::vector<long double>& total() {
        flush();
        return total_;
    }

private:
    std::vector<long double> block_;
    std::vector<long double> total_;
    std::size_t rows_ = 0;
};

void check_args(const DataView& data, const Vec& beta, double h) {
    if (data.empty()) throw Error("objective evaluated on an empty dataset");
    if (static_cast<std::size_t>(beta.size()) != data.p)
        throw Error("beta has length " + std::to_string(beta.size()) + ", expected p=" +
                    std::to_string(data.p));
    if (!(h > 0.0)) throw Error("bandwidth h must be positive");
}

inline double index_of(const DataView& d, std::size_t i, const double* b) {
    const double* z = d.row(i);
    double s = d.x[i];
    for (std::size_t j = 0; j < d.p; ++j) s += z[j] * b[j];
    return s;
}

Mat unpack_upper(const std::vector<long double>& tri, std::size_t p, long double scale) {
    Mat V(p, p);
    std::size_t idx = 0;
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = a; b < p; ++b) {
            const double v = static_cast<double>(tri[idx++] * scale);
            V(a, b) = v;
            V(b, a) = v;
        }
    return V;
}

inline void add_outer(long double* tri, const double* z, std::size_t p, double w) {
    std::size_t idx = 0;
    for (std::size_t a = 0; a < p; ++a) {
        const double wa = w * z[a];
        for (std::size_t b = a; b < p; ++b) tri[idx++] += wa * z[b];
    }
}

}  // namespace

double score_objective(const DataView& data, const Vec& beta) {
    check_args(data, beta, 1.0);
    long double total = 0.0L;
    long double block = 0.0L;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (index_of(data, i, beta.data()) >= 0.0) block -= data.y[i];
        if ((i + 1) % kBlock == 0) {
            total += block;
            block = 0.0L;
        }
    }
    total += block;
    return static_cast<double>(total / static_cast<long double>(data.size()));
}

double smoothed_objective(const DataView& data, const Vec& beta, double h, const KernelSpec& k) {
    return smoothed_value_gradient(data, beta, h, k).value;
}

ValueGradient smoothed_value_gradient(const DataView& data, const Vec& beta, double h,
                                      const KernelSpec& k) {
    check_args(data, beta, h);
    const std::size_t p = data.p;
    return with_kernel(k, [&](auto fns) {
        BlockSum acc(p + 1);
        const double inv_h = 1.0 / h;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double a = index_of(data, i, beta.data()) * inv_h;
            const double ny = -data.y[i];
            long double* blk = acc.block();
            if (a > 1.0) {
                blk[p] += ny;
            } else if (a >= -1.0) {
                blk[p] += ny * fns.H(a);
                const double g = ny * fns.Hp(a);
                const double* z = data.row(i);
                for (std::size_t j = 0; j < p; ++j) blk[j] += g * z[j];
            }
            acc.tick();
        }
        const auto& t = acc.total();
        const long double n = static_cast<long double>(data.size());
        ValueGradient out{static_cast<double>(t[p] / n), Vec(p)};
        for (std::size_t j = 0; j < p; ++j) out.gradient[j] = static_cast<double>(t[j] / (n * h));
        return out;
    });
}

Vec smoothed_gradient(const DataView& data, const Vec& beta, double h, const KernelSpec& k) {
    check_args(data, beta, h);
    const std::size_t p = data.p;
    return with_kernel(k, [&](auto fns) {
        BlockSum acc(p);
        const double inv_h = 1.0 / h;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double a = index_of(data, i, beta.data()) * inv_h;
            if (a >= -1.0 && a <= 1.0) {
                const double g = -data.y[i] * fns.Hp(a);
                const double* z = data.row(i);
                long double* blk = acc.block();
                for (std::size_t j = 0; j < p; ++j) blk[j] += g * z[j];
            }
            acc.tick();
        }
        const auto& t = acc.total();
        const long double scale = 1.0L / (static_cast<long double>(data.size()) * h);
        Vec out(p);
        for (std::size_t j = 0; j < p; ++j) out[j] = static_cast<double>(t[j] * scale);
        return out;
    });
}

Mat smoothed_hessian(const DataView& data, const Vec& beta, double h, const KernelSpec& k) {
    return newton_moments(data, beta, h, k).V;
}

Moments newton_moments(const DataView& data, const Vec& beta, double h, const KernelSpec& k) {
    check_args(data, beta, h);
    const std::size_t p = data.p;
    const std::size_t tri = p * (p + 1) / 2;
    return with_kernel(k, [&](auto fns) {
        BlockSum acc(p + tri);
        const double inv_h = 1.0 / h;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double a = index_of(data, i, beta.data()) * inv_h;
            if (a >= -1.0 && a <= 1.0) {
                const double ny = -data.y[i];
                const double g = ny * fns.Hp(a);
                const double s = ny * fns.Hpp(a);
                const double* z = data.row(i);
                long double* blk = acc.block();
                for (std::size_t j = 0; j < p; ++j) blk[j] += g * z[j];
                add_outer(blk + p, z, p, s);
            }
            acc.tick();
        }
        const auto& t = acc.total();
        const long double n = static_cast<long double>(data.size());
        Moments m;
        m.count = data.size();
        m.U.resize(p);
        for (std::size_t j = 0; j < p; ++j) m.U[j] = static_cast<double>(t[j] / (n * h));
        std::vector<long double> upper(t.begin() + static_cast<std::ptrdiff_t>(p), t.end());
        m.V = unpack_upper(upper, p, 1.0L / (n * h * h));
        return m;
    });
}

Mat squared_score_matrix(const DataView& data, const Vec& beta, double h, const KernelSpec& k) {
    check_args(data, beta, h);
    const std::size_t p = data.p;
    return with_kernel(k, [&](auto fns) {
        BlockSum acc(p * (p + 1) / 2);
        const double inv_h = 1.0 / h;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double a = index_of(data, i, beta.data()) * inv_h;
            if (a >= -1.0 && a <= 1.0) {
                const double g = fns.Hp(a);
                add_outer(acc.block(), data.row(i), p, g * g);
            }
            acc.tick();
        }
        return unpack_upper(acc.total(), p, 1.0L / (static_cast<long double>(data.size()) * h));
    });
}

Moments pool_moments(std::span<const Moments> parts) {
    if (parts.empty()) throw Error("pool_moments: no parts");
    const auto p = parts.front().U.size();
    std::size_t n = 0;
    for (const auto& m : parts) {
        if (m.U.size() != p || m.V.rows() != p || m.V.cols() != p)
            throw Error("pool_moments: dimension mismatch");
        n += m.count;
    }
    if (n == 0) throw Error("pool_moments: zero total count");
    Moments out{Vec::Zero(p), Mat::Zero(p, p), n};
    for (const auto& m : parts) {
        const double w = static_cast<double>(m.count) / static_cast<double>(n);
        out.U += w * m.U;
        out.V += w * m.V;
    }
    return out;
}

}  // namespace smse
