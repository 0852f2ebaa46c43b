#include "molt/treecode.hpp"

#include "molt/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <new>
#include <numeric>
#include <string>

namespace molt {

namespace {

constexpr double kInv4Pi = 0.25 / std::numbers::pi;
constexpr int L = detail::kLanes;

template <class T>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}
    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(64))); }
    void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t(64)); }
    template <class U>
    bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

double dot_n(const double* a, const double* b, std::size_t n)
{
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (std::size_t i = 0; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

} // namespace

void TreecodeParams::validate() const
{
    if (!(theta >= 0.0 && theta < 1.0))
        throw ConfigError("treecode theta must satisfy 0 <= theta < 1");
    if (p < 0 || p > 20)
        throw ConfigError("treecode order p must lie in [0, 20]");
    if (leaf_capacity < 1)
        throw ConfigError("treecode leaf_capacity must be >= 1");
}

void ParticleCloud::validate() const
{
    const std::size_t n = positions.size();
    if (n == 0)
        throw ConfigError("particle cloud is empty");
    if (channels < 1)
        throw ConfigError("particle cloud needs at least one channel");
    if (!weights.empty()) {
        if (weights.size() != n)
            throw ConfigError("weights length differs from positions");
        for (double w : weights)
            if (!(w > 0.0))
                throw ConfigError("particle weights must be positive");
    }
    if (charges.size() != n * channels)
        throw ConfigError("charges length must equal positions * channels");
    if (!dipoles.empty() && dipoles.size() != 3 * n * channels)
        throw ConfigError("dipoles length must equal 3 * positions * channels");
}

ClusterTree::ClusterTree(std::span<const Vec3> positions, const TreecodeParams& params)
    : params_(params), set_((params.validate(), params.p + 3))
{
    if (positions.empty())
        throw ConfigError("cannot build a tree over zero particles");
    perm_.resize(positions.size());
    std::iota(perm_.begin(), perm_.end(), 0u);
    pos_.assign(positions.begin(), positions.end());
    nodes_.push_back({});
    nodes_[0].begin = 0;
    nodes_[0].end = static_cast<std::uint32_t>(positions.size());
    split(0);
    std::vector<Vec3> sorted(pos_.size());
    for (std::size_t i = 0; i < perm_.size(); ++i)
        sorted[i] = positions[perm_[i]];
    pos_ = std::move(sorted);
}

void ClusterTree::split(std::size_t n)
{
    // pos_ still holds original order here; particles are addressed through perm_.
    const std::uint32_t b = nodes_[n].begin, e = nodes_[n].end;
    Vec3 lo = pos_[perm_[b]], hi = lo;
    for (std::uint32_t i = b; i < e; ++i) {
        const Vec3& x = pos_[perm_[i]];
        for (int m = 0; m < 3; ++m) {
            lo[m] = std::min(lo[m], x[m]);
            hi[m] = std::max(hi[m], x[m]);
        }
    }
    const Vec3 c = 0.5 * (lo + hi);
    double r2 = 0.0;
    for (std::uint32_t i = b; i < e; ++i) {
        const Vec3 d = pos_[perm_[i]] - c;
        r2 = std::max(r2, dot(d, d));
    }
    nodes_[n].center = c;
    nodes_[n].radius = std::sqrt(r2);

    const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
    if (e - b <= params_.leaf_capacity || !(extent > 0.0))
        return;

    // Bisect every direction that is not much thinner than the widest one.
    bool cut[3];
    for (int m = 0; m < 3; ++m)
        cut[m] = (hi[m] - lo[m]) >= 0.5 * extent;
    std::vector<std::uint32_t> code(e - b);
    std::array<std::uint32_t, 8> bucket{};
    for (std::uint32_t i = b; i < e; ++i) {
        const Vec3& x = pos_[perm_[i]];
        std::uint32_t k = 0;
        for (int m = 0; m < 3; ++m)
            if (cut[m] && x[m] > c[m])
                k |= 1u << m;
        code[i - b] = k;
        ++bucket[k];
    }
    std::array<std::uint32_t, 9> start{};
    for (int k = 0; k < 8; ++k)
        start[k + 1] = start[k] + bucket[k];
    std::vector<std::uint32_t> reordered(e - b);
    std::array<std::uint32_t, 8> fill{};
    for (std::uint32_t i = b; i < e; ++i) {
        const std::uint32_t k = code[i - b];
        reordered[start[k] + fill[k]++] = perm_[i];
    }
    std::copy(reordered.begin(), reordered.end(), perm_.begin() + b);

    const std::size_t first = nodes_.size();
    std::uint32_t kids = 0;
    for (int k = 0; k < 8; ++k) {
        if (bucket[k] == 0)
            continue;
        ClusterNode child;
        child.begin = b + start[k];
        child.end = b + start[k + 1];
        child.level = nodes_[n].level + 1;
        nodes_.push_back(child);
        ++kids;
    }
    nodes_[n].first_child = static_cast<std::int32_t>(first);
    nodes_[n].num_children = kids;
    for (std::uint32_t k = 0; k < kids; ++k)
        split(first + k);
}

std::span<const double> ClusterTree::moments(std::size_t node, std::size_t channel) const
{
    const std::size_t nc = num_coefficients();
    return {moments_.data() + (node * channels_ + channel) * nc, nc};
}

void ClusterTree::set_sources(std::span<const double> charges, std::span<const double> dipoles,
                              std::size_t channels)
{
    const std::size_t n = pos_.size();
    if (channels < 1 || charges.size() != n * channels)
        throw ConfigError("charges length must equal particles * channels");
    if (!dipoles.empty() && dipoles.size() != 3 * n * channels)
        throw ConfigError("dipoles length must equal 3 * particles * channels");
    channels_ = channels;
    q_.resize(n * channels);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < channels; ++c)
            q_[i * channels + c] = charges[perm_[i] * channels + c];
    dip_.clear();
    if (!dipoles.empty()) {
        dip_.resize(3 * n * channels);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < 3 * channels; ++c)
                dip_[i * 3 * channels + c] = dipoles[perm_[i] * 3 * channels + c];
    }
    moments_.assign(nodes_.size() * channels_ * num_coefficients(), 0.0);
    for (std::size_t k = nodes_.size(); k-- > 0;) {
        if (nodes_[k].is_leaf())
            leaf_moments(k);
        else
            for (std::uint32_t j = 0; j < nodes_[k].num_children; ++j)
                shift_moments(nodes_[k].first_child + j, k);
    }
}

void ClusterTree::leaf_moments(std::size_t n)
{
    const ClusterNode& node = nodes_[n];
    const std::size_t nc = num_coefficients();
    const std::size_t C = channels_;
    double* mom = moments_.data() + n * C * nc;
    std::vector<double> pw(set_.size() + 1, 0.0);
    std::vector<int> axis(nc, 0);
    for (std::size_t i = 1; i < nc; ++i)
        axis[i] = set_[i].k1 ? 0 : (set_[i].k2 ? 1 : 2);
    for (std::uint32_t s = node.begin; s < node.end; ++s) {
        const Vec3 d = pos_[s] - node.center;
        pw[0] = 1.0;
        for (std::size_t i = 1; i < nc; ++i)
            pw[i] = pw[set_.lower1(axis[i], i)] * d[axis[i]];
        for (std::size_t c = 0; c < C; ++c) {
            const double q = q_[s * C + c];
            double* m = mom + c * nc;
            for (std::size_t i = 0; i < nc; ++i)
                m[i] += q * pw[i];
        }
        if (dip_.empty())
            continue;
        for (std::size_t c = 0; c < C; ++c) {
            const double* p = &dip_[(s * C + c) * 3];
            double* m = mom + c * nc;
            for (std::size_t i = 1; i < nc; ++i) {
                const MultiIndex& k = set_[i];
                double v = 0.0;
                if (k.k1)
                    v += p[0] * k.k1 * pw[set_.lower1(0, i)];
                if (k.k2)
                    v += p[1] * k.k2 * pw[set_.lower1(1, i)];
                if (k.k3)
                    v += p[2] * k.k3 * pw[set_.lower1(2, i)];
                m[i] += v;
            }
        }
    }
}

void ClusterTree::shift_moments(std::size_t child, std::size_t parent)
{
    // (y - c)^k = sum_{j <= k} binom(k, j) (c' - c)^{k-j} (y - c')^j
    const int p = params_.p;
    const std::size_t nc = num_coefficients();
    const Vec3 s = nodes_[child].center - nodes_[parent].center;
    std::vector<double> pw(3 * (p + 1));
    for (int m = 0; m < 3; ++m) {
        pw[m * (p + 1)] = 1.0;
        for (int j = 1; j <= p; ++j)
            pw[m * (p + 1) + j] = pw[m * (p + 1) + j - 1] * s[m];
    }
    std::vector<double> binom((p + 1) * (p + 1), 0.0);
    for (int n = 0; n <= p; ++n) {
        binom[n * (p + 1)] = 1.0;
        for (int j = 1; j <= n; ++j)
            binom[n * (p + 1) + j] = binom[(n - 1) * (p + 1) + j - 1] +
                                     (j <= n - 1 ? binom[(n - 1) * (p + 1) + j] : 0.0);
    }
    auto factor = [&](int m, int k, int j) {
        return binom[k * (p + 1) + j] * pw[m * (p + 1) + (k - j)];
    };
    for (std::size_t c = 0; c < channels_; ++c) {
        const double* src = moments_.data() + (child * channels_ + c) * nc;
        double* dst = moments_.data() + (parent * channels_ + c) * nc;
        for (std::size_t i = 0; i < nc; ++i) {
            const MultiIndex& k = set_[i];
            double v = 0.0;
            for (int j1 = 0; j1 <= k.k1; ++j1) {
                const double f1 = factor(0, k.k1, j1);
                for (int j2 = 0; j2 <= k.k2; ++j2) {
                    const double f2 = f1 * factor(1, k.k2, j2);
                    for (int j3 = 0; j3 <= k.k3; ++j3)
                        v += f2 * factor(2, k.k3, j3) * src[set_.index({j1, j2, j3})];
                }
            }
            dst[i] += v;
        }
    }
}

ClusterTree build_tree(const ParticleCloud& cloud, const TreecodeParams& params)
{
    cloud.validate();
    ClusterTree tree(cloud.positions, params);
    tree.set_sources(cloud.charges, cloud.dipoles, cloud.channels);
    return tree;
}

namespace {

struct Spec {
    MultiIndex l;
    std::vector<std::uint32_t> map;
    std::vector<double> factor;
};

Spec make_spec(const MultiIndexSet& set, int p, const MultiIndex& l)
{
    Spec s;
    s.l = l;
    const std::size_t nc = MultiIndexSet::count(p);
    const double sign = (l.order() % 2) ? -1.0 : 1.0;
    s.map.resize(nc);
    s.factor.resize(nc);
    for (std::size_t i = 0; i < nc; ++i) {
        const MultiIndex& k = set[i];
        double f = 1.0;
        for (int m = 0; m < 3; ++m)
            for (int j = k[m] + 1; j <= k[m] + l[m]; ++j)
                f *= j;
        s.map[i] = static_cast<std::uint32_t>(set.index({k.k1 + l.k1, k.k2 + l.k2, k.k3 + l.k3}));
        s.factor[i] = sign * f;
    }
    return s;
}

// Kernel derivative table at one displacement: value, gradient, Hessian.
struct LocalKernel {
    double g = 0.0;
    double grad[3] = {0.0, 0.0, 0.0};
    double hess[9] = {};

    double at(const MultiIndex& l) const
    {
        switch (l.order()) {
        case 0:
            return g;
        case 1:
            return grad[l.k1 ? 0 : (l.k2 ? 1 : 2)];
        default: {
            int ax[2], n = 0;
            for (int m = 0; m < 3; ++m)
                for (int c = 0; c < l[m]; ++c)
                    ax[n++] = m;
            return hess[3 * ax[0] + ax[1]];
        }
        }
    }
};

class Evaluator {
public:
    Evaluator(const ClusterTree& tree, const KernelParams& kernel, std::vector<MultiIndex> ls)
        : tree_(tree), lambda_(kernel.lambda)
    {
        kernel.validate();
        if (!tree.has_sources())
            throw ConfigError("tree has no sources; call set_sources first");
        int maxl = 0;
        for (const auto& l : ls)
            maxl = std::max(maxl, l.order());
        derivative_level_ = maxl + (tree.has_dipoles() ? 1 : 0);
        if (derivative_level_ > 2)
            throw ConfigError("unsupported derivative order for this source type");
        order_ = tree.params().p + maxl;
        for (const auto& l : ls)
            specs_.push_back(make_spec(tree.index_set(), tree.params().p, l));
        potential_only_ = ls.size() == 1 && ls[0].order() == 0 && !tree.has_dipoles();
        const std::size_t rows = tree.index_set().size() + 1;
        a_.resize(rows * L);
        b_.resize(rows * L);
        lane_.resize(rows);
        tmp_.resize(tree.num_coefficients());
    }

    // out has specs * channels entries.
    void run(const Vec3& x, double* out, TreecodeStats& stats)
    {
        const std::size_t C = tree_.channels();
        std::fill(out, out + specs_.size() * C, 0.0);
        collect(x);
        stats.far_interactions += far_.size();
        for (std::size_t f = 0; f < far_.size(); f += L)
            far_batch(x, f, std::min<std::size_t>(L, far_.size() - f), out);
        for (std::uint32_t n : near_) {
            const ClusterNode& node = tree_.nodes()[n];
            stats.near_pairs += node.count();
            if (potential_only_)
                near_potential(x, node, out);
            else
                near_general(x, node, out);
        }
    }

private:
    void collect(const Vec3& x)
    {
        far_.clear();
        near_.clear();
        stack_.clear();
        stack_.push_back(0);
        const double theta = tree_.params().theta;
        const auto& nodes = tree_.nodes();
        while (!stack_.empty()) {
            const std::uint32_t n = stack_.back();
            stack_.pop_back();
            const ClusterNode& node = nodes[n];
            const Vec3 d = x - node.center;
            const double R = std::sqrt(dot(d, d));
            if (theta > 0.0 && R > 0.0 && node.radius <= theta * R) {
                if (node.count() <= tree_.params().direct_below)
                    near_.push_back(n);
                else
                    far_.push_back(n);
            } else if (node.is_leaf()) {
                near_.push_back(n);
            } else {
                for (std::uint32_t k = node.num_children; k-- > 0;)
                    stack_.push_back(static_cast<std::uint32_t>(node.first_child + k));
            }
        }
    }

    void far_batch(const Vec3& x, std::size_t first, std::size_t count, double* out)
    {
        const auto& nodes = tree_.nodes();
        double d[3 * L];
        for (std::size_t j = 0; j < static_cast<std::size_t>(L); ++j) {
            const Vec3 c = j < count ? nodes[far_[first + j]].center : x + Vec3{1.0, 0.0, 0.0};
            for (int m = 0; m < 3; ++m)
                d[m * L + j] = c[m] - x[m];
        }
        detail::taylor_batch<L>(tree_.index_set(), order_, lambda_, d, a_.data(), b_.data());
        const std::size_t rows = MultiIndexSet::count(order_);
        const std::size_t nc = tree_.num_coefficients();
        const std::size_t C = tree_.channels();
        for (std::size_t j = 0; j < count; ++j) {
            for (std::size_t i = 0; i < rows; ++i)
                lane_[i] = a_[i * L + j];
            const std::size_t node = far_[first + j];
            for (std::size_t s = 0; s < specs_.size(); ++s) {
                const Spec& sp = specs_[s];
                const double* coef = lane_.data();
                if (sp.l.order() > 0) {
                    for (std::size_t i = 0; i < nc; ++i)
                        tmp_[i] = sp.factor[i] * lane_[sp.map[i]];
                    coef = tmp_.data();
                }
                for (std::size_t c = 0; c < C; ++c)
                    out[s * C + c] += dot_n(coef, tree_.moments(node, c).data(), nc);
            }
        }
    }

    void near_potential(const Vec3& x, const ClusterNode& node, double* out) const
    {
        const std::size_t C = tree_.channels();
        const auto& pos = tree_.sorted_positions();
        const auto& q = tree_.sorted_charges();
        for (std::uint32_t s = node.begin; s < node.end; ++s) {
            const Vec3 dx = x - pos[s];
            const double r2 = dot(dx, dx);
            if (r2 == 0.0)
                continue;
            const double r = std::sqrt(r2);
            const double lr = lambda_ * r;
            const double e = lr > kUnderflowArgument ? 0.0 : std::exp(-lr);
            const double g = -kInv4Pi * e / r;
            for (std::size_t c = 0; c < C; ++c)
                out[c] += q[s * C + c] * g;
        }
    }

    void near_general(const Vec3& x, const ClusterNode& node, double* out) const
    {
        const std::size_t C = tree_.channels();
        const auto& pos = tree_.sorted_positions();
        const auto& q = tree_.sorted_charges();
        const auto& dip = tree_.sorted_dipoles();
        const bool dipoles = !dip.empty();
        LocalKernel k;
        for (std::uint32_t s = node.begin; s < node.end; ++s) {
            const Vec3 dx = x - pos[s];
            const double r2 = dot(dx, dx);
            if (r2 == 0.0)
                continue;
            const double r = std::sqrt(r2);
            const double lr = lambda_ * r;
            const double e = lr > kUnderflowArgument ? 0.0 : std::exp(-lr);
            k.g = -kInv4Pi * e / r;
            if (derivative_level_ >= 1) {
                const double g1 = kInv4Pi * e * (1.0 + lr) / r2;
                for (int m = 0; m < 3; ++m)
                    k.grad[m] = g1 * dx[m] / r;
                if (derivative_level_ >= 2) {
                    const double g2 = -kInv4Pi * e * (lr * lr + 2.0 * lr + 2.0) / (r2 * r);
                    for (int a = 0; a < 3; ++a)
                        for (int b = 0; b < 3; ++b) {
                            const double u = dx[a] * dx[b] / r2;
                            k.hess[3 * a + b] = g2 * u + g1 * ((a == b ? 1.0 : 0.0) - u) / r;
                        }
                }
            }
            for (std::size_t sp = 0; sp < specs_.size(); ++sp) {
                const MultiIndex& l = specs_[sp].l;
                const double v = k.at(l);
                double up[3] = {0.0, 0.0, 0.0};
                if (dipoles)
                    for (int m = 0; m < 3; ++m) {
                        MultiIndex lm = l;
                        (m == 0 ? lm.k1 : (m == 1 ? lm.k2 : lm.k3)) += 1;
                        up[m] = k.at(lm);
                    }
                for (std::size_t c = 0; c < C; ++c) {
                    double acc = q[s * C + c] * v;
                    if (dipoles) {
                        const double* p = &dip[(s * C + c) * 3];
                        // grad_y = -grad_x
                        acc -= p[0] * up[0] + p[1] * up[1] + p[2] * up[2];
                    }
                    out[sp * C + c] += acc;
                }
            }
        }
    }

    const ClusterTree& tree_;
    double lambda_;
    int derivative_level_ = 0;
    int order_ = 0;
    bool potential_only_ = false;
    std::vector<Spec> specs_;
    AlignedBuffer a_, b_;
    std::vector<double> lane_, tmp_;
    std::vector<std::uint32_t> stack_, far_, near_;
};

} // namespace

TreecodeResult evaluate(const ClusterTree& tree, std::span<const Vec3> targets,
                        const KernelParams& kernel, bool want_potential, bool want_gradient)
{
    std::vector<MultiIndex> ls;
    if (want_potential)
        ls.push_back({0, 0, 0});
    if (want_gradient) {
        ls.push_back({1, 0, 0});
        ls.push_back({0, 1, 0});
        ls.push_back({0, 0, 1});
    }
    TreecodeResult res;
    if (ls.empty())
        return res;
    Evaluator ev(tree, kernel, ls);
    const std::size_t C = tree.channels();
    if (want_potential)
        res.potential.assign(targets.size() * C, 0.0);
    if (want_gradient)
        res.gradient.assign(targets.size() * C * 3, 0.0);
    std::vector<double> buf(ls.size() * C);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        ev.run(targets[t], buf.data(), res.stats);
        std::size_t s = 0;
        if (want_potential) {
            for (std::size_t c = 0; c < C; ++c)
                res.potential[t * C + c] = buf[c];
            s = 1;
        }
        if (want_gradient)
            for (std::size_t m = 0; m < 3; ++m)
                for (std::size_t c = 0; c < C; ++c)
                    res.gradient[(t * C + c) * 3 + m] = buf[(s + m) * C + c];
    }
    return res;
}

std::vector<double> evaluate_sum(const ClusterTree& tree, std::span<const Vec3> targets,
                                 const KernelParams& kernel)
{
    return evaluate(tree, targets, kernel, true, false).potential;
}

std::vector<double> evaluate_derivative_sum(const ClusterTree& tree, std::span<const Vec3> targets,
                                            const KernelParams& kernel, const MultiIndex& l)
{
    if (l.k1 < 0 || l.k2 < 0 || l.k3 < 0 || l.order() > 2)
        throw ConfigError("evaluate_derivative_sum supports |l| <= 2");
    Evaluator ev(tree, kernel, {l});
    const std::size_t C = tree.channels();
    std::vector<double> out(targets.size() * C);
    TreecodeStats stats;
    for (std::size_t t = 0; t < targets.size(); ++t)
        ev.run(targets[t], out.data() + t * C, stats);
    return out;
}

double self_term(double cell_volume, const KernelParams& kernel)
{
    if (!(cell_volume > 0.0) || !std::isfinite(cell_volume))
        throw DomainError("self_term: cell volume must be positive");
    kernel.validate();
    const double as = std::cbrt(3.0 * cell_volume / (4.0 * std::numbers::pi));
    const double x = kernel.lambda * as;
    if (x == 0.0)
        return -0.5 * as * as;
    if (x < 0.1) {
        // 1 - e^{-x}(1 + x) = sum_n (-1)^n x^{n+2} / (n! (n + 2))
        double sum = 0.0, term = 1.0;
        for (int n = 0; n < 16; ++n) {
            sum += term / (n + 2);
            term *= -x / (n + 1);
        }
        return -as * as * sum;
    }
    if (x > kUnderflowArgument)
        return -1.0 / (kernel.lambda * kernel.lambda);
    return -(1.0 - std::exp(-x) * (1.0 + x)) / (kernel.lambda * kernel.lambda);
}

} // namespace molt
