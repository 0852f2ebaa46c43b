#pragma once

#include "molt/kernels.hpp"
#include "molt/vec3.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace molt {

struct TreecodeParams {
    double theta = 0.5;
    int p = 9;
    std::size_t leaf_capacity = 64;
    // Accepted clusters holding at most this many sources are summed directly; the expansion
    // would cost more than the pairs it replaces.
    std::size_t direct_below = 32;

    void validate() const;
};

// Sources for a kernel sum. charges has size() * channels entries (particle-major); dipoles is
// either empty or holds size() * channels * 3 entries, a dipole moment vector per channel. A
// dipole p contributes p . grad_y G(x|y).
struct ParticleCloud {
    std::vector<Vec3> positions;
    std::vector<double> weights;
    std::size_t channels = 1;
    std::vector<double> charges;
    std::vector<double> dipoles;

    std::size_t size() const { return positions.size(); }
    bool has_dipoles() const { return !dipoles.empty(); }
    void validate() const;
};

struct ClusterNode {
    Vec3 center;
    double radius = 0.0;
    std::uint32_t begin = 0, end = 0;
    std::int32_t first_child = -1;
    std::uint32_t num_children = 0;
    std::uint32_t level = 0;

    bool is_leaf() const { return num_children == 0; }
    std::uint32_t count() const { return end - begin; }
};

class ClusterTree {
public:
    // Geometry only; call set_sources before evaluating.
    ClusterTree(std::span<const Vec3> positions, const TreecodeParams& params);

    // Replaces charges/dipoles (original particle order) and recomputes every node's moments.
    void set_sources(std::span<const double> charges, std::span<const double> dipoles,
                     std::size_t channels);

    const TreecodeParams& params() const { return params_; }
    const std::vector<ClusterNode>& nodes() const { return nodes_; }
    // permutation()[i] is the original index of the i-th particle in tree order.
    const std::vector<std::uint32_t>& permutation() const { return perm_; }
    const std::vector<Vec3>& sorted_positions() const { return pos_; }
    std::size_t size() const { return pos_.size(); }
    std::size_t channels() const { return channels_; }
    bool has_dipoles() const { return !dip_.empty(); }
    bool has_sources() const { return !q_.empty(); }
    const MultiIndexSet& index_set() const { return set_; }
    std::size_t num_coefficients() const { return MultiIndexSet::count(params_.p); }
    // Moments of node n for channel c, MultiIndexSet order.
    std::span<const double> moments(std::size_t node, std::size_t channel) const;

    // tree-order source data
    const std::vector<double>& sorted_charges() const { return q_; }
    const std::vector<double>& sorted_dipoles() const { return dip_; }

private:
    void split(std::size_t node);
    void leaf_moments(std::size_t node);
    void shift_moments(std::size_t child, std::size_t parent);

    TreecodeParams params_;
    MultiIndexSet set_;
    std::vector<ClusterNode> nodes_;
    std::vector<std::uint32_t> perm_;
    std::vector<Vec3> pos_;
    std::size_t channels_ = 0;
    std::vector<double> q_, dip_;
    std::vector<double> moments_;
};

ClusterTree build_tree(const ParticleCloud& cloud, const TreecodeParams& params);

struct TreecodeStats {
    std::size_t far_interactions = 0;
    std::size_t near_pairs = 0;
};

// potential: targets * channels; gradient (when requested): targets * channels * 3.
struct TreecodeResult {
    std::vector<double> potential;
    std::vector<double> gradient;
    TreecodeStats stats;
};

TreecodeResult evaluate(const ClusterTree& tree, std::span<const Vec3> targets,
                        const KernelParams& kernel, bool want_potential, bool want_gradient);

std::vector<double> evaluate_sum(const ClusterTree& tree, std::span<const Vec3> targets,
                                 const KernelParams& kernel);

// d^l/dx^l of the sum, |l| <= 2 (|l| <= 1 when the tree carries dipoles).
std::vector<double> evaluate_derivative_sum(const ClusterTree& tree, std::span<const Vec3> targets,
                                            const KernelParams& kernel, const MultiIndex& l);

// Integral of G over the sphere of volume cell_volume centred at the singularity.
double self_term(double cell_volume, const KernelParams& kernel);

} // namespace molt
