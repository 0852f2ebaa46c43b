#include "molt/kernels.hpp"

#include "molt/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace molt {

namespace {

constexpr double kInv4Pi = 0.25 / std::numbers::pi;

double screened_exp(double lambda_r)
{
    return lambda_r > kUnderflowArgument ? 0.0 : std::exp(-lambda_r);
}

double checked_radius(const Vec3& dx)
{
    const double r = norm(dx);
    if (!(r > 0.0) || !std::isfinite(r))
        throw DomainError("kernel evaluated at zero or non-finite displacement");
    return r;
}

double factorial_ratio(const MultiIndex& k, const MultiIndex& l)
{
    double f = 1.0;
    for (int m = 0; m < 3; ++m)
        for (int j = k[m] + 1; j <= k[m] + l[m]; ++j)
            f *= j;
    return f;
}

} // namespace

void KernelParams::validate() const
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ConfigError("kernel decay lambda must be finite and >= 0, got " + std::to_string(lambda));
}

double green(double r, const KernelParams& kernel)
{
    if (!(r > 0.0) || !std::isfinite(r))
        throw DomainError("green: r must be positive and finite");
    return -kInv4Pi * screened_exp(kernel.lambda * r) / r;
}

double green_radial_derivative(double r, const KernelParams& kernel)
{
    if (!(r > 0.0) || !std::isfinite(r))
        throw DomainError("green_radial_derivative: r must be positive and finite");
    const double lr = kernel.lambda * r;
    return kInv4Pi * screened_exp(lr) * (1.0 + lr) / (r * r);
}

Vec3 green_gradient(const Vec3& dx, const KernelParams& kernel)
{
    const double r = checked_radius(dx);
    return (green_radial_derivative(r, kernel) / r) * dx;
}

std::array<double, 9> green_hessian(const Vec3& dx, const KernelParams& kernel)
{
    const double r = checked_radius(dx);
    const double lr = kernel.lambda * r;
    const double e = screened_exp(lr);
    const double g1 = kInv4Pi * e * (1.0 + lr) / (r * r);
    const double g2 = -kInv4Pi * e * (lr * lr + 2.0 * lr + 2.0) / (r * r * r);
    std::array<double, 9> h{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double u = dx[i] * dx[j] / (r * r);
            h[3 * i + j] = g2 * u + g1 * ((i == j ? 1.0 : 0.0) - u) / r;
        }
    return h;
}

double green_partial(const Vec3& dx, const KernelParams& kernel, const MultiIndex& l)
{
    switch (l.order()) {
    case 0:
        return green(checked_radius(dx), kernel);
    case 1: {
        const Vec3 g = green_gradient(dx, kernel);
        return l.k1 ? g.x : (l.k2 ? g.y : g.z);
    }
    case 2: {
        int axes[2];
        int n = 0;
        for (int m = 0; m < 3; ++m)
            for (int c = 0; c < l[m]; ++c)
                axes[n++] = m;
        return green_hessian(dx, kernel)[3 * axes[0] + axes[1]];
    }
    default:
        throw ConfigError("green_partial supports derivative orders up to 2");
    }
}

MultiIndexSet::MultiIndexSet(int max_order) : max_order_(max_order)
{
    if (max_order < 0)
        throw ConfigError("multi-index order must be >= 0");
    const int n1 = max_order + 1;
    lookup_.assign(static_cast<std::size_t>(n1) * n1 * n1, 0xffffffffu);
    for (int n = 0; n <= max_order; ++n)
        for (int a = n; a >= 0; --a)
            for (int b = n - a; b >= 0; --b) {
                lookup_[(static_cast<std::size_t>(a) * n1 + b) * n1 + (n - a - b)] =
                    static_cast<std::uint32_t>(indices_.size());
                indices_.push_back({a, b, n - a - b});
            }
    const std::size_t sz = indices_.size();
    lower1_.assign(3 * sz, sentinel());
    lower2_.assign(3 * sz, sentinel());
    raise_.assign(3 * sz, sentinel());
    for (std::size_t i = 0; i < sz; ++i) {
        for (int m = 0; m < 3; ++m) {
            MultiIndex k = indices_[i];
            int* c = m == 0 ? &k.k1 : (m == 1 ? &k.k2 : &k.k3);
            const int base = *c;
            if (base >= 1) {
                *c = base - 1;
                lower1_[3 * i + m] = static_cast<std::uint32_t>(index(k));
            }
            if (base >= 2) {
                *c = base - 2;
                lower2_[3 * i + m] = static_cast<std::uint32_t>(index(k));
            }
            if (indices_[i].order() < max_order) {
                *c = base + 1;
                raise_[3 * i + m] = static_cast<std::uint32_t>(index(k));
            }
        }
    }
    recurrence_.resize(sz);
    for (std::size_t i = 0; i < sz; ++i) {
        auto& r = recurrence_[i];
        const int n = indices_[i].order();
        for (int m = 0; m < 3; ++m) {
            r.l1[m] = lower1_[3 * i + m];
            r.l2[m] = lower2_[3 * i + m];
        }
        r.inv_n = n > 0 ? 1.0 / n : 0.0;
        r.c1 = 2.0 * n - 1.0;
        r.c2 = n - 1.0;
    }
}

std::size_t MultiIndexSet::index(const MultiIndex& k) const
{
    if (k.k1 < 0 || k.k2 < 0 || k.k3 < 0 || k.order() > max_order_)
        throw ConfigError("multi-index outside table of order " + std::to_string(max_order_));
    const std::size_t n1 = static_cast<std::size_t>(max_order_) + 1;
    return lookup_[(static_cast<std::size_t>(k.k1) * n1 + k.k2) * n1 + k.k3];
}

namespace detail {

namespace {

typedef double v8d __attribute__((vector_size(8 * sizeof(double))));

// Eight-lane specialisation; rows are 64-byte vectors, so a and b must be 64-byte aligned.
void taylor_batch8(const MultiIndexSet& set, int p, double lambda, const double* d, double* a,
                   double* b)
{
    const std::size_t nc = MultiIndexSet::count(p);
    const std::size_t s = set.sentinel();
    v8d* A = reinterpret_cast<v8d*>(__builtin_assume_aligned(a, 64));
    v8d* B = reinterpret_cast<v8d*>(__builtin_assume_aligned(b, 64));
    v8d D0, D1, D2, IR2;
    for (int j = 0; j < 8; ++j) {
        D0[j] = d[j];
        D1[j] = d[8 + j];
        D2[j] = d[16 + j];
        const double r2 = d[j] * d[j] + d[8 + j] * d[8 + j] + d[16 + j] * d[16 + j];
        const double rho = std::sqrt(r2);
        const double f = screened_exp(lambda * rho);
        A[0][j] = f / rho;
        B[0][j] = f;
        IR2[j] = 1.0 / r2;
    }
    const v8d zero = {};
    A[s] = zero;
    B[s] = zero;
    const auto* rec = set.recurrence();
    if (lambda == 0.0) {
        for (std::size_t i = 1; i < nc; ++i) {
            const auto& r = rec[i];
            const v8d s1 = D0 * A[r.l1[0]] + D1 * A[r.l1[1]] + D2 * A[r.l1[2]];
            const v8d s2 = A[r.l2[0]] + A[r.l2[1]] + A[r.l2[2]];
            A[i] = -(r.c1 * s1 + r.c2 * s2) * (r.inv_n * IR2);
        }
    } else {
        for (std::size_t i = 1; i < nc; ++i) {
            const auto& r = rec[i];
            const v8d s1 = D0 * A[r.l1[0]] + D1 * A[r.l1[1]] + D2 * A[r.l1[2]];
            const v8d s2 = A[r.l2[0]] + A[r.l2[1]] + A[r.l2[2]];
            const v8d t = D0 * B[r.l1[0]] + D1 * B[r.l1[1]] + D2 * B[r.l1[2]] + B[r.l2[0]] +
                          B[r.l2[1]] + B[r.l2[2]];
            B[i] = (-lambda * r.inv_n) * (s1 + s2);
            A[i] = -(r.c1 * s1 + r.c2 * s2 + lambda * t) * (r.inv_n * IR2);
        }
    }
    const double scale = -kInv4Pi;
    for (std::size_t i = 0; i < nc; ++i)
        A[i] *= scale;
}

} // namespace

template <int L>
void taylor_batch(const MultiIndexSet& set, int p, double lambda, const double* d, double* a,
                  double* b)
{
    if constexpr (L == 8) {
        taylor_batch8(set, p, lambda, d, a, b);
        return;
    }
    const std::size_t nc = MultiIndexSet::count(p);
    const std::size_t s = set.sentinel();
    double inv_rho2[L];
    for (int j = 0; j < L; ++j) {
        a[s * L + j] = 0.0;
        b[s * L + j] = 0.0;
        const double r2 = d[j] * d[j] + d[L + j] * d[L + j] + d[2 * L + j] * d[2 * L + j];
        const double rho = std::sqrt(r2);
        const double f = screened_exp(lambda * rho);
        a[j] = f / rho;
        b[j] = f;
        inv_rho2[j] = 1.0 / r2;
    }
    const auto* rec = set.recurrence();
    for (std::size_t i = 1; i < nc; ++i) {
        const auto& r = rec[i];
        for (int j = 0; j < L; ++j) {
            const double s1 = d[j] * a[r.l1[0] * L + j] + d[L + j] * a[r.l1[1] * L + j] +
                              d[2 * L + j] * a[r.l1[2] * L + j];
            const double s2 = a[r.l2[0] * L + j] + a[r.l2[1] * L + j] + a[r.l2[2] * L + j];
            const double t = d[j] * b[r.l1[0] * L + j] + d[L + j] * b[r.l1[1] * L + j] +
                             d[2 * L + j] * b[r.l1[2] * L + j] + b[r.l2[0] * L + j] +
                             b[r.l2[1] * L + j] + b[r.l2[2] * L + j];
            b[i * L + j] = (-lambda * r.inv_n) * (s1 + s2);
            a[i * L + j] = -(r.c1 * s1 + r.c2 * s2 + lambda * t) * (r.inv_n * inv_rho2[j]);
        }
    }
    for (std::size_t i = 0; i < nc * L; ++i)
        a[i] *= -kInv4Pi;
}

template void taylor_batch<1>(const MultiIndexSet&, int, double, const double*, double*, double*);
template void taylor_batch<kLanes>(const MultiIndexSet&, int, double, const double*, double*, double*);

} // namespace detail

namespace {

std::vector<double> coefficient_table(const MultiIndexSet& set, const Vec3& dx,
                                      const KernelParams& kernel, int p)
{
    kernel.validate();
    checked_radius(dx);
    std::vector<double> a(set.size() + 1), b(set.size() + 1);
    const double d[3] = {-dx.x, -dx.y, -dx.z};
    detail::taylor_batch<1>(set, p, kernel.lambda, d, a.data(), b.data());
    a.resize(MultiIndexSet::count(p));
    return a;
}

} // namespace

std::vector<double> taylor_coeffs(const Vec3& dx, const KernelParams& kernel, int p)
{
    if (p < 0)
        throw ConfigError("expansion order must be >= 0");
    const MultiIndexSet set(p);
    return coefficient_table(set, dx, kernel, p);
}

std::vector<double> derivative_coeffs(const Vec3& dx, const KernelParams& kernel, int p,
                                      const MultiIndex& l)
{
    if (p < 0 || l.k1 < 0 || l.k2 < 0 || l.k3 < 0)
        throw ConfigError("expansion order and derivative index must be non-negative");
    if (l.order() > 3)
        throw ConfigError("derivative order exceeds the coefficient table (p + 3)");
    const MultiIndexSet set(p + 3);
    const std::vector<double> a = coefficient_table(set, dx, kernel, p + l.order());
    const double sign = (l.order() % 2) ? -1.0 : 1.0;
    std::vector<double> out(MultiIndexSet::count(p));
    for (std::size_t i = 0; i < out.size(); ++i) {
        const MultiIndex& k = set[i];
        const MultiIndex kl{k.k1 + l.k1, k.k2 + l.k2, k.k3 + l.k3};
        out[i] = sign * factorial_ratio(k, l) * a[set.index(kl)];
    }
    return out;
}

} // namespace molt
