#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace smse {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Adaptive quadrature gave up before reaching the requested tolerance.
class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double last_estimate)
        : Error(what), last_estimate_(last_estimate) {}
    double last_estimate() const noexcept { return last_estimate_; }

private:
    double last_estimate_;
};

/// Iterative local solve ran out of iterations at its final bandwidth.
class SolverError : public Error {
public:
    SolverError(const std::string& what, Eigen::VectorXd best, double grad_norm)
        : Error(what), best_(std::move(best)), grad_norm_(grad_norm) {}
    const Eigen::VectorXd& best_iterate() const noexcept { return best_; }
    double gradient_norm() const noexcept { return grad_norm_; }

private:
    Eigen::VectorXd best_;
    double grad_norm_;
};

class PartitionError : public Error {
public:
    using Error::Error;
};

/// Newton system whose condition estimate exceeds the singularity threshold.
class SingularMatrixError : public Error {
public:
    SingularMatrixError(const std::string& what, double cond_est)
        : Error(what), cond_est_(cond_est) {}
    double condition_estimate() const noexcept { return cond_est_; }

private:
    double cond_est_;
};

/// Dantzig constraint set is empty at the requested lambda.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, double min_sup_norm)
        : Error(what), min_sup_norm_(min_sup_norm) {}
    double min_sup_norm() const noexcept { return min_sup_norm_; }

private:
    double min_sup_norm_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace smse
