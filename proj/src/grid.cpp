#include "molt/grid.hpp"

#include "molt/errors.hpp"

#include <cmath>

namespace molt {

ParticleGrid::ParticleGrid(int n, const Box& box) : n_(n), box_(box)
{
    if (n < 3)
        throw ConfigError("ParticleGrid: need at least 3 particles per direction");
    const double lx = box.hi.x - box.lo.x;
    if (!(lx > 0.0) || std::fabs(box.hi.y - box.lo.y - lx) > 1e-12 * lx || std::fabs(box.hi.z - box.lo.z - lx) > 1e-12 * lx)
        throw ConfigError("ParticleGrid: the box must be a cube");
    h_ = lx / n;
    positions_.reserve(static_cast<std::size_t>(n) * n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                positions_.push_back({coordinate(0, i), coordinate(1, j), coordinate(2, k)});
}

std::vector<double> grid_derivative(const ParticleGrid& g, std::span<const double> f, int axis, std::size_t stride,
                                    std::size_t component)
{
    if (f.size() != g.size() * stride || component >= stride || axis < 0 || axis > 2)
        throw ConfigError("grid_derivative: field does not match the grid");
    const int n = g.n();
    const double inv = 0.5 / g.h();
    const std::size_t step = axis == 0 ? static_cast<std::size_t>(n) * n : (axis == 1 ? n : 1);
    std::vector<double> d(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
        const int i = static_cast<int>((p / step) % n);
        auto at = [&](std::ptrdiff_t off) { return f[(p + off * static_cast<std::ptrdiff_t>(step)) * stride + component]; };
        if (i == 0)
            d[p] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv;
        else if (i == n - 1)
            d[p] = (3.0 * at(0) - 4.0 * at(-1) + at(-2)) * inv;
        else
            d[p] = (at(1) - at(-1)) * inv;
    }
    return d;
}

std::vector<double> grid_gradient(const ParticleGrid& g, std::span<const double> f)
{
    std::vector<double> out(3 * g.size());
    for (int a = 0; a < 3; ++a) {
        const std::vector<double> d = grid_derivative(g, f, a);
        for (std::size_t p = 0; p < g.size(); ++p)
            out[3 * p + a] = d[p];
    }
    return out;
}

std::vector<double> grid_curl(const ParticleGrid& g, std::span<const double> v)
{
    std::vector<double> out(3 * g.size());
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3, c = (a + 2) % 3;
        // (curl v)_a = d_b v_c - d_c v_b
        const std::vector<double> dbc = grid_derivative(g, v, b, 3, c);
        const std::vector<double> dcb = grid_derivative(g, v, c, 3, b);
        for (std::size_t p = 0; p < g.size(); ++p)
            out[3 * p + a] = dbc[p] - dcb[p];
    }
    return out;
}

std::vector<double> grid_divergence(const ParticleGrid& g, std::span<const double> v)
{
    std::vector<double> out(g.size(), 0.0);
    for (int a = 0; a < 3; ++a) {
        const std::vector<double> d = grid_derivative(g, v, a, 3, a);
        for (std::size_t p = 0; p < g.size(); ++p)
            out[p] += d[p];
    }
    return out;
}

double divergence_diagnostic(const ParticleGrid& g, std::span<const double> v)
{
    const std::vector<double> div = grid_divergence(g, v);
    const int n = g.n();
    double sum = 0.0;
    for (int i = 1; i < n - 1; ++i)
        for (int j = 1; j < n - 1; ++j)
            for (int k = 1; k < n - 1; ++k)
                sum += std::fabs(div[g.index(i, j, k)]);
    return sum * g.weight();
}

} // namespace molt
