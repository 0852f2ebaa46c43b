#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace molt {

// Square linear map on R^dim: out = A * in.
struct LinearOperator {
    std::size_t dim = 0;
    std::function<void(std::span<const double>, std::span<double>)> apply;

    std::vector<double> operator()(std::span<const double> in) const;
};

struct GmresOptions {
    double tol = 1e-14; // relative residual
    int max_iter = 200;
};

struct GmresResult {
    std::vector<double> x;
    int iterations = 0;
    double residual = 0.0; // ||rhs - A x|| / ||rhs||, recomputed from x
    std::vector<double> history;
};

// Unrestarted GMRES from a zero initial guess. If the Arnoldi estimate reaches tol but the
// recomputed residual does not, iteration continues from the current iterate within the same
// budget. Throws ConvergenceError (carrying the history) when max_iter is exhausted.
GmresResult gmres_solve(const LinearOperator& op, std::span<const double> rhs, const GmresOptions& opts = {});

double relative_residual(const LinearOperator& op, std::span<const double> x, std::span<const double> rhs);

} // namespace molt
