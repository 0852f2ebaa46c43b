#pragma once

#include "molt/vec3.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace molt {

// Screened-Coulomb kernel G(x|y) = -exp(-lambda r) / (4 pi r); lambda = 0 is the Laplace kernel.
struct KernelParams {
    double lambda = 0.0;

    void validate() const;
};

// Products lambda*r above this are treated as exact underflow.
inline constexpr double kUnderflowArgument = 700.0;

double green(double r, const KernelParams& kernel);
// dG/dr = exp(-lambda r)(1 + lambda r) / (4 pi r^2)
double green_radial_derivative(double r, const KernelParams& kernel);
// Gradient with respect to the target, dx = x - y.
Vec3 green_gradient(const Vec3& dx, const KernelParams& kernel);
// Row-major 3x3 Hessian with respect to the target, dx = x - y.
std::array<double, 9> green_hessian(const Vec3& dx, const KernelParams& kernel);

struct MultiIndex {
    int k1 = 0, k2 = 0, k3 = 0;

    constexpr int order() const { return k1 + k2 + k3; }
    constexpr int operator[](int axis) const { return axis == 0 ? k1 : (axis == 1 ? k2 : k3); }
    friend constexpr bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

// Partial derivative d^l/dx^l G(x|y) for |l| <= 2, dx = x - y.
double green_partial(const Vec3& dx, const KernelParams& kernel, const MultiIndex& l);

// Graded enumeration of all multi-indices with |k| <= max_order, plus neighbour tables for the
// coefficient recurrence. Missing neighbours point at a sentinel slot equal to size().
class MultiIndexSet {
public:
    explicit MultiIndexSet(int max_order);

    static constexpr std::size_t count(int order)
    {
        return order < 0 ? 0 : static_cast<std::size_t>((order + 1) * (order + 2) * (order + 3) / 6);
    }

    int max_order() const { return max_order_; }
    std::size_t size() const { return indices_.size(); }
    std::uint32_t sentinel() const { return static_cast<std::uint32_t>(indices_.size()); }
    const MultiIndex& operator[](std::size_t i) const { return indices_[i]; }
    std::size_t index(const MultiIndex& k) const;

    // k - e_axis, k - 2 e_axis, k + e_axis (sentinel when out of range)
    std::uint32_t lower1(int axis, std::size_t i) const { return lower1_[3 * i + axis]; }
    std::uint32_t lower2(int axis, std::size_t i) const { return lower2_[3 * i + axis]; }
    std::uint32_t raise(int axis, std::size_t i) const { return raise_[3 * i + axis]; }

    struct RecurrenceRow {
        std::uint32_t l1[3], l2[3];
        double inv_n, c1, c2;
    };
    const RecurrenceRow* recurrence() const { return recurrence_.data(); }

private:
    int max_order_;
    std::vector<MultiIndex> indices_;
    std::vector<std::uint32_t> lookup_;
    std::vector<std::uint32_t> lower1_, lower2_, raise_;
    std::vector<RecurrenceRow> recurrence_;
};

// Taylor coefficients a^k = (1/k!) d^k/dy^k G(x|y) at y = x_c for all |k| <= p, in MultiIndexSet
// order. dx is the displacement from the cluster centre to the target, x - x_c.
std::vector<double> taylor_coeffs(const Vec3& dx, const KernelParams& kernel, int p);

// Coefficients of d^l/dx^l applied to the expansion: (-1)^|l| (k+l)!/k! a^{k+l}, |k| <= p.
// The coefficient table is built to order p + 3, so |l| > 3 is rejected.
std::vector<double> derivative_coeffs(const Vec3& dx, const KernelParams& kernel, int p,
                                      const MultiIndex& l);

namespace detail {

inline constexpr int kLanes = 8;

// Batched recurrence. d holds lanes of x_c - x as d[axis * L + lane]; a and b are scratch of
// (set.size() + 1) * L doubles, 64-byte aligned for L = kLanes. On return a[i * L + lane] holds
// the G coefficient of index i for all |k| <= p.
template <int L>
void taylor_batch(const MultiIndexSet& set, int p, double lambda, const double* d, double* a,
                  double* b);

} // namespace detail

} // namespace molt
