#pragma once

#include "molt/panels.hpp"
#include "molt/vec3.hpp"

#include <span>
#include <vector>

namespace molt {

// n^3 particles at the cell centres of a uniform grid on a cube, index (i n + j) n + k with
// x = lo + (i + 1/2) h along the first axis.
class ParticleGrid {
public:
    ParticleGrid(int n, const Box& box = {});

    int n() const { return n_; }
    double h() const { return h_; }
    const Box& box() const { return box_; }
    std::size_t size() const { return positions_.size(); }
    double weight() const { return h_ * h_ * h_; }
    const std::vector<Vec3>& positions() const { return positions_; }
    std::size_t index(int i, int j, int k) const
    {
        return (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
    }
    // Coordinate of layer i along any axis.
    double coordinate(int axis, int i) const { return box_.lo[axis] + (i + 0.5) * h_; }

private:
    int n_;
    double h_;
    Box box_;
    std::vector<Vec3> positions_;
};

// Derivative along an axis: second-order central differences inside, second-order one-sided on
// the outermost layers. f has `stride` values per particle; component c is differentiated.
std::vector<double> grid_derivative(const ParticleGrid& g, std::span<const double> f, int axis,
                                    std::size_t stride = 1, std::size_t component = 0);

// Scalar in, 3 values per particle out.
std::vector<double> grid_gradient(const ParticleGrid& g, std::span<const double> f);
// 3 values per particle in.
std::vector<double> grid_curl(const ParticleGrid& g, std::span<const double> v);
std::vector<double> grid_divergence(const ParticleGrid& g, std::span<const double> v);

// Discrete L1 norm (weights h^3) of the central-difference divergence over particles that have
// both neighbours in every direction.
double divergence_diagnostic(const ParticleGrid& g, std::span<const double> v);

} // namespace molt
