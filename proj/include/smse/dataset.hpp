#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace smse {

/// One labelled point of the binary response model y = sign(x + z'beta + eps).
struct Observation {
    int y = 1;  // -1 or +1
    double x = 0.0;
    std::vector<double> z;
};

/// Non-owning window onto a contiguous block of observations. z is row-major
/// (one row of length p per observation). Must not outlive its Dataset.
struct DataView {
    std::span<const double> y;
    std::span<const double> x;
    std::span<const double> z;
    std::size_t p = 0;

    std::size_t size() const noexcept { return y.size(); }
    bool empty() const noexcept { return y.empty(); }
    const double* row(std::size_t i) const noexcept { return z.data() + i * p; }
    DataView slice(std::size_t begin, std::size_t count) const;
};

/// Owning column store: labels, the unit-coefficient covariate x, and the
/// row-major covariate block z. zbound tracks max |z_ij|.
class Dataset {
public:
    explicit Dataset(std::size_t p = 1) : p_(p) {}

    void reserve(std::size_t n);
    void add(int y, double x, std::span<const double> z);
    void add(const Observation& obs) { add(obs.y, obs.x, obs.z); }

    std::size_t size() const noexcept { return y_.size(); }
    std::size_t dim() const noexcept { return p_; }
    double zbound() const noexcept { return zbound_; }
    Observation at(std::size_t i) const;

    DataView view() const noexcept { return {y_, x_, z_, p_}; }
    operator DataView() const noexcept { return view(); }  // NOLINT

    /// Builds a dataset holding the observations of `parts` in order.
    static Dataset concat(std::span<const DataView> parts);
    static Dataset from_view(const DataView& v);

private:
    std::size_t p_;
    double zbound_ = 0.0;
    std::vector<double> y_;
    std::vector<double> x_;
    std::vector<double> z_;
};

/// CSV with header `y,x,z1,...,zp`. Throws ParseError naming the offending line.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& out, const DataView& data);
void write_dataset_csv(const std::string& path, const DataView& data);

}  // namespace smse
