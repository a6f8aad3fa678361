#include "smse/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "smse/error.hpp"

namespace smse {

DataView DataView::slice(std::size_t begin, std::size_t count) const {
    if (begin + count > size()) throw Error("DataView::slice out of range");
    return {y.subspan(begin, count), x.subspan(begin, count), z.subspan(begin * p, count * p), p};
}

void Dataset::reserve(std::size_t n) {
    y_.reserve(n);
    x_.reserve(n);
    z_.reserve(n * p_);
}

void Dataset::add(int y, double x, std::span<const double> z) {
    if (y != 1 && y != -1) throw Error("label must be -1 or +1, got " + std::to_string(y));
    if (z.size() != p_)
        throw Error("covariate length " + std::to_string(z.size()) + " does not match p=" +
                    std::to_string(p_));
    if (!std::isfinite(x)) throw Error("non-finite x");
    for (double v : z) {
        if (!std::isfinite(v)) throw Error("non-finite z entry");
        zbound_ = std::max(zbound_, std::fabs(v));
    }
    y_.push_back(static_cast<double>(y));
    x_.push_back(x);
    z_.insert(z_.end(), z.begin(), z.end());
}

Observation Dataset::at(std::size_t i) const {
    Observation o;
    o.y = static_cast<int>(y_.at(i));
    o.x = x_[i];
    o.z.assign(z_.begin() + static_cast<std::ptrdiff_t>(i * p_),
               z_.begin() + static_cast<std::ptrdiff_t>((i + 1) * p_));
    return o;
}

Dataset Dataset::concat(std::span<const DataView> parts) {
    if (parts.empty()) throw Error("concat of zero parts");
    Dataset out(parts.front().p);
    std::size_t n = 0;
    for (const auto& v : parts) n += v.size();
    out.reserve(n);
    for (const auto& v : parts) {
        if (v.p != out.p_) throw Error("concat: dimension mismatch");
        for (std::size_t i = 0; i < v.size(); ++i)
            out.add(static_cast<int>(v.y[i]), v.x[i], {v.row(i), v.p});
    }
    return out;
}

Dataset Dataset::from_view(const DataView& v) {
    return concat(std::span<const DataView>(&v, 1));
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view tok, std::size_t line, const char* what) {
    tok = trim(tok);
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw ParseError("line " + std::to_string(line) + ": cannot parse " + what + " '" +
                             std::string(tok) + "'",
                         line);
    return v;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("line 1: missing header", 1);
    ++lineno;
    const auto header = split_commas(line);
    if (header.size() < 3 || trim(header[0]) != "y" || trim(header[1]) != "x")
        throw ParseError("line 1: header must be y,x,z1,...,zp", 1);
    for (std::size_t j = 2; j < header.size(); ++j)
        if (trim(header[j]) != "z" + std::to_string(j - 1))
            throw ParseError("line 1: expected column z" + std::to_string(j - 1), 1);
    const std::size_t p = header.size() - 2;
    Dataset data(p);
    std::vector<double> z(p);
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split_commas(line);
        if (fields.size() != p + 2)
            throw ParseError("line " + std::to_string(lineno) + ": expected " +
                                 std::to_string(p + 2) + " fields, got " +
                                 std::to_string(fields.size()),
                             lineno);
        const double y = parse_double(fields[0], lineno, "y");
        if (y != 1.0 && y != -1.0)
            throw ParseError("line " + std::to_string(lineno) + ": y must be -1 or 1", lineno);
        const double x = parse_double(fields[1], lineno, "x");
        for (std::size_t j = 0; j < p; ++j) z[j] = parse_double(fields[j + 2], lineno, "z");
        data.add(static_cast<int>(y), x, z);
    }
    return data;
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const DataView& data) {
    out << "y,x";
    for (std::size_t j = 1; j <= data.p; ++j) out << ",z" << j;
    out << '\n';
    char buf[64];
    auto put = [&](double v) {
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, res.ptr - buf);
    };
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << (data.y[i] > 0 ? "1" : "-1") << ',';
        put(data.x[i]);
        for (std::size_t j = 0; j < data.p; ++j) {
            out << ',';
            put(data.row(i)[j]);
        }
        out << '\n';
    }
}

void write_dataset_csv(const std::string& path, const DataView& data) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    write_dataset_csv(out, data);
}

}  // namespace smse
