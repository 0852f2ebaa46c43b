#include "doctest.h"

#include "molt/errors.hpp"
#include "molt/treecode.hpp"

#include <chrono>
#include <cmath>
#include <random>

using namespace molt;

namespace {

ParticleCloud random_cloud(std::size_t n, unsigned seed, std::size_t channels = 1)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0), uq(-1.0, 1.0);
    ParticleCloud c;
    c.channels = channels;
    for (std::size_t i = 0; i < n; ++i) {
        c.positions.push_back({u(rng), u(rng), u(rng)});
        c.weights.push_back(1.0 / n);
        for (std::size_t k = 0; k < channels; ++k)
            c.charges.push_back(uq(rng) / n);
    }
    return c;
}

std::vector<double> direct_sum(const ParticleCloud& c, const std::vector<Vec3>& targets,
                               const KernelParams& k)
{
    std::vector<double> out(targets.size() * c.channels, 0.0);
    for (std::size_t t = 0; t < targets.size(); ++t)
        for (std::size_t i = 0; i < c.size(); ++i) {
            const Vec3 dx = targets[t] - c.positions[i];
            if (dot(dx, dx) == 0.0)
                continue;
            double g = green(norm(dx), k);
            Vec3 grad;
            if (c.has_dipoles())
                grad = green_gradient(dx, k);
            for (std::size_t ch = 0; ch < c.channels; ++ch) {
                out[t * c.channels + ch] += c.charges[i * c.channels + ch] * g;
                if (c.has_dipoles()) {
                    const double* p = &c.dipoles[(i * c.channels + ch) * 3];
                    out[t * c.channels + ch] -= p[0] * grad.x + p[1] * grad.y + p[2] * grad.z;
                }
            }
        }
    return out;
}

std::vector<double> direct_gradient(const ParticleCloud& c, const std::vector<Vec3>& targets,
                                    const KernelParams& k, int axis)
{
    std::vector<double> out(targets.size(), 0.0);
    for (std::size_t t = 0; t < targets.size(); ++t)
        for (std::size_t i = 0; i < c.size(); ++i) {
            const Vec3 dx = targets[t] - c.positions[i];
            if (dot(dx, dx) == 0.0)
                continue;
            out[t] += c.charges[i] * green_gradient(dx, k)[axis];
        }
    return out;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::fabs(a[i] - b[i]) / std::fabs(b[i]));
    return worst;
}

} // namespace

TEST_CASE("single particle tree")
{
    ParticleCloud c;
    c.positions = {{0.3, 0.4, 0.5}};
    c.weights = {1.0};
    c.charges = {2.5};
    const ClusterTree t = build_tree(c, {});
    REQUIRE(t.nodes().size() == 1);
    CHECK(t.nodes()[0].is_leaf());
    CHECK(t.nodes()[0].radius == 0.0);
    const auto m = t.moments(0, 0);
    CHECK(m[0] == 2.5);
    for (std::size_t i = 1; i < m.size(); ++i)
        CHECK(m[i] == 0.0);
}

TEST_CASE("octant particles give a depth-one tree")
{
    ParticleCloud c;
    for (int i = 0; i < 8; ++i) {
        c.positions.push_back({0.25 + 0.5 * (i & 1), 0.25 + 0.5 * ((i >> 1) & 1), 0.25 + 0.5 * ((i >> 2) & 1)});
        c.weights.push_back(1.0);
        c.charges.push_back(1.0);
    }
    TreecodeParams p;
    p.leaf_capacity = 1;
    const ClusterTree t = build_tree(c, p);
    REQUIRE(t.nodes().size() == 9);
    CHECK(t.nodes()[0].num_children == 8);
    for (std::size_t i = 1; i < 9; ++i) {
        CHECK(t.nodes()[i].is_leaf());
        CHECK(t.nodes()[i].level == 1);
    }
}

TEST_CASE("tree structure invariants and charge conservation")
{
    ParticleCloud c;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uq(-1.0, 1.0);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            for (int k = 0; k < 8; ++k) {
                c.positions.push_back({(i + 0.5) / 8, (j + 0.5) / 8, (k + 0.5) / 8});
                c.weights.push_back(1.0 / 512);
                c.charges.push_back(uq(rng));
            }
    TreecodeParams p;
    p.leaf_capacity = 16;
    const ClusterTree t = build_tree(c, p);
    double total = 0.0, leaf_total = 0.0;
    for (double q : c.charges)
        total += q;
    std::vector<int> owner(c.size(), 0);
    for (std::size_t n = 0; n < t.nodes().size(); ++n) {
        const ClusterNode& node = t.nodes()[n];
        CHECK(node.radius >= 0.0);
        if (node.is_leaf()) {
            leaf_total += t.moments(n, 0)[0];
            for (std::uint32_t i = node.begin; i < node.end; ++i)
                ++owner[t.permutation()[i]];
            CHECK(node.count() <= 16);
        } else {
            std::uint32_t covered = node.begin;
            for (std::uint32_t k = 0; k < node.num_children; ++k) {
                const ClusterNode& ch = t.nodes()[node.first_child + k];
                CHECK(ch.begin == covered);
                covered = ch.end;
            }
            CHECK(covered == node.end);
        }
        for (std::uint32_t i = node.begin; i < node.end; ++i)
            CHECK(norm(t.sorted_positions()[i] - node.center) <= node.radius * (1 + 1e-15));
    }
    for (int o : owner)
        CHECK(o == 1);
    CHECK(leaf_total == doctest::Approx(total).epsilon(1e-13));
    CHECK(t.moments(0, 0)[0] == doctest::Approx(total).epsilon(1e-13));
}

TEST_CASE("theta zero reproduces direct summation bitwise")
{
    const ParticleCloud c = random_cloud(500, 1);
    TreecodeParams p;
    p.theta = 0.0;
    p.leaf_capacity = 16;
    const ClusterTree t = build_tree(c, p);
    std::vector<Vec3> targets(c.positions.begin(), c.positions.begin() + 50);
    targets.push_back({0.5, 0.5, 1.3});
    const KernelParams k{2.0};
    const auto tc = evaluate_sum(t, targets, k);
    for (std::size_t j = 0; j < targets.size(); ++j) {
        double s = 0.0; // tree order, the summation order of the near field
        for (std::size_t i = 0; i < t.size(); ++i) {
            const Vec3 dx = targets[j] - c.positions[t.permutation()[i]];
            if (dot(dx, dx) == 0.0)
                continue;
            s += c.charges[t.permutation()[i]] * green(norm(dx), k);
        }
        CHECK(tc[j] == s);
    }
}

TEST_CASE("zero charges give zero potential")
{
    ParticleCloud c = random_cloud(300, 2);
    std::fill(c.charges.begin(), c.charges.end(), 0.0);
    const ClusterTree t = build_tree(c, {});
    for (double v : evaluate_sum(t, c.positions, {1.0}))
        CHECK(v == 0.0);
}

namespace {

double pointwise_potential_error(const ParticleCloud& c, const TreecodeParams& p, const KernelParams& k)
{
    const auto tc = evaluate_sum(build_tree(c, p), c.positions, k);
    return max_rel(tc, direct_sum(c, c.positions, k));
}

double pointwise_gradient_error(const ParticleCloud& c, const TreecodeParams& p, const KernelParams& k)
{
    const auto r = evaluate(build_tree(c, p), c.positions, k, false, true);
    std::vector<double> ref[3];
    for (int m = 0; m < 3; ++m)
        ref[m] = direct_gradient(c, c.positions, k, m);
    double worst = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Vec3 g{ref[0][i], ref[1][i], ref[2][i]};
        const Vec3 e = Vec3{r.gradient[3 * i], r.gradient[3 * i + 1], r.gradient[3 * i + 2]} - g;
        worst = std::max(worst, norm(e) / norm(g));
    }
    return worst;
}

ParticleCloud positive_cloud(std::size_t n, unsigned seed)
{
    ParticleCloud c = random_cloud(n, seed);
    for (auto& q : c.charges)
        q = std::fabs(q);
    return c;
}

} // namespace

// Pointwise errors at the default (theta = 0.5, p = 9) sit near 5e-6 for the sum; see the
// acceptance suite for the 1e-6 target. Here: regression bounds at the defaults, and the
// tighter oracle bounds once the expansion is accurate enough to deliver them.
TEST_CASE("oracle equivalence with direct summation, N=2000, lambda=2")
{
    const ParticleCloud c = positive_cloud(2000, 42);
    const KernelParams k{2.0};
    const TreecodeParams defaults;
    const double e_sum = pointwise_potential_error(c, defaults, k);
    const double e_grad = pointwise_gradient_error(c, defaults, k);
    MESSAGE("theta 0.5 p 9: sum " << e_sum << " gradient " << e_grad);
    CHECK(e_sum <= 1e-5);
    CHECK(e_grad <= 1e-3);

    TreecodeParams tight;
    tight.theta = 0.3;
    tight.p = 12;
    CHECK(pointwise_potential_error(c, tight, k) <= 1e-6);
    CHECK(pointwise_gradient_error(c, tight, k) <= 1e-5);
}

TEST_CASE("derivative sums: identity and one-body")
{
    const ParticleCloud c = random_cloud(400, 9);
    const ClusterTree t = build_tree(c, {});
    const KernelParams k{1.5};
    std::vector<Vec3> targets{{0.1, 0.2, 0.3}, {1.5, 0.2, -0.4}};
    const auto s = evaluate_sum(t, targets, k);
    const auto d0 = evaluate_derivative_sum(t, targets, k, {0, 0, 0});
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(s[i] == d0[i]);

    ParticleCloud one;
    one.positions = {{0.4, 0.5, 0.6}};
    one.weights = {1.0};
    one.charges = {0.75};
    const ClusterTree t1 = build_tree(one, {});
    const Vec3 x{1.0, -0.2, 0.3};
    const Vec3 dx = x - one.positions[0];
    const auto h = green_hessian(dx, k);
    CHECK(evaluate_derivative_sum(t1, std::vector<Vec3>{x}, k, {0, 1, 0})[0] ==
          doctest::Approx(0.75 * green_gradient(dx, k).y).epsilon(1e-15));
    CHECK(evaluate_derivative_sum(t1, std::vector<Vec3>{x}, k, {1, 0, 1})[0] ==
          doctest::Approx(0.75 * h[2]).epsilon(1e-15));
    CHECK_THROWS_AS(evaluate_derivative_sum(t1, std::vector<Vec3>{x}, k, {1, 1, 1}), ConfigError);
}

TEST_CASE("second derivative far field")
{
    ParticleCloud c = random_cloud(2000, 77);
    for (auto& q : c.charges)
        q = std::fabs(q);
    const ClusterTree t = build_tree(c, {});
    const KernelParams k{2.0};
    std::vector<Vec3> targets(c.positions.begin(), c.positions.begin() + 100);
    for (const MultiIndex l : {MultiIndex{2, 0, 0}, MultiIndex{0, 1, 1}}) {
        const auto tc = evaluate_derivative_sum(t, targets, k, l);
        double worst = 0.0, scale = 0.0;
        std::vector<double> ref(targets.size(), 0.0);
        for (std::size_t j = 0; j < targets.size(); ++j) {
            for (std::size_t i = 0; i < c.size(); ++i) {
                const Vec3 dx = targets[j] - c.positions[i];
                if (dot(dx, dx) == 0.0)
                    continue;
                ref[j] += c.charges[i] * green_partial(dx, k, l);
            }
            scale = std::max(scale, std::fabs(ref[j]));
        }
        for (std::size_t j = 0; j < targets.size(); ++j)
            worst = std::max(worst, std::fabs(tc[j] - ref[j]) / std::max(std::fabs(ref[j]), 1e-2 * scale));
        MESSAGE("second derivative " << worst);
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("dipole sources and multi-channel charges")
{
    ParticleCloud c = random_cloud(1500, 13, 3);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    c.dipoles.resize(c.size() * 9);
    for (auto& d : c.dipoles)
        d = u(rng) / c.size();
    TreecodeParams tight;
    tight.theta = 0.3;
    tight.p = 12;
    const ClusterTree t = build_tree(c, tight);
    const KernelParams k{1.0};
    std::vector<Vec3> targets;
    for (int i = 0; i < 60; ++i)
        targets.push_back({u(rng) * 0.5 + 0.5, u(rng) * 0.5 + 0.5, u(rng) * 0.5 + 0.5});
    const auto tc = evaluate_sum(t, targets, k);
    const auto ds = direct_sum(c, targets, k);
    double scale = 0.0, worst = 0.0;
    for (double v : ds)
        scale = std::max(scale, std::fabs(v));
    for (std::size_t i = 0; i < ds.size(); ++i)
        worst = std::max(worst, std::fabs(tc[i] - ds[i]));
    MESSAGE("dipole worst " << worst << " scale " << scale);
    CHECK(worst <= 1e-8 * scale);
}

TEST_CASE("error decreases with expansion order")
{
    ParticleCloud c = random_cloud(2000, 21);
    for (auto& q : c.charges)
        q = std::fabs(q);
    const KernelParams k{2.0};
    std::vector<Vec3> targets(c.positions.begin(), c.positions.begin() + 300);
    const auto ds = direct_sum(c, targets, k);
    double prev = INFINITY;
    for (int p : {3, 6, 9}) {
        TreecodeParams tp;
        tp.p = p;
        tp.direct_below = 0;
        const auto tc = evaluate_sum(build_tree(c, tp), targets, k);
        const double e = max_rel(tc, ds);
        CHECK(e < prev);
        prev = e;
    }
}

TEST_CASE("translation invariance and superposition")
{
    ParticleCloud c = random_cloud(1000, 31);
    const KernelParams k{2.0};
    std::vector<Vec3> targets(c.positions.begin(), c.positions.begin() + 100);
    const auto base = evaluate_sum(build_tree(c, {}), targets, k);

    // a dyadic shift keeps every coordinate difference exact
    ParticleCloud shifted = c;
    const Vec3 s{0.25, -0.5, 0.125};
    for (auto& x : shifted.positions)
        x += s;
    std::vector<Vec3> st = targets;
    for (auto& x : st)
        x += s;
    const auto moved = evaluate_sum(build_tree(shifted, {}), st, k);
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(std::fabs(moved[i] - base[i]) <= 1e-13 * std::fabs(base[i]) + 1e-15);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ParticleCloud c1 = c, c2 = c;
    for (std::size_t i = 0; i < c.size(); ++i) {
        c1.charges[i] = u(rng) / c.size();
        c2.charges[i] = c.charges[i] - c1.charges[i];
    }
    const auto e1 = evaluate_sum(build_tree(c1, {}), targets, k);
    const auto e2 = evaluate_sum(build_tree(c2, {}), targets, k);
    double scale = 0.0;
    for (double v : base)
        scale = std::max(scale, std::fabs(v));
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(std::fabs(e1[i] + e2[i] - base[i]) <= 1e-13 * scale);
}

TEST_CASE("self term")
{
    CHECK(self_term(4.0 * M_PI / 3.0, {0.0}) == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(std::fabs(self_term(1e-3, {1e6})) < 1e-11);
    CHECK_THROWS_AS(self_term(0.0, {1.0}), DomainError);
    // continuity across the series/closed-form switch
    const double v = 4.0 * M_PI / 3.0;
    for (double lam : {0.0999999, 0.05, 0.01}) {
        const double closed = -(1.0 - std::exp(-lam) * (1.0 + lam)) / (lam * lam);
        CHECK(self_term(v, {lam}) == doctest::Approx(closed).epsilon(1e-9));
    }
    CHECK(self_term(v, {0.0999999}) == doctest::Approx(self_term(v, {0.1000001})).epsilon(1e-6));
    CHECK(self_term(v, {1e-9}) == doctest::Approx(-0.5).epsilon(1e-8));

    // equivalent sphere vs the actual cube h = 0.05, lambda = 10, by a polar quadrature of the cube
    const double h = 0.05, lambda = 10.0;
    // integral over the cube of G about its centre: 48 congruent tetrahedral wedges; each has
    // r from 0 to the face plane at distance h/2, so the radial integral is closed form.
    double cube = 0.0;
    const int n = 200;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            // face x = h/2, (y, z) in [-h/2, h/2]^2 midpoint grid; solid angle element
            const double y = -h / 2 + (i + 0.5) * h / n, z = -h / 2 + (j + 0.5) * h / n;
            const double R = std::sqrt(h * h / 4 + y * y + z * z);
            const double dOmega = (h / 2) * (h / n) * (h / n) / (R * R * R);
            const double radial = -(1.0 - std::exp(-lambda * R) * (1.0 + lambda * R)) /
                                  (4.0 * M_PI * lambda * lambda);
            cube += 6.0 * dOmega * radial;
        }
    const double sphere = self_term(h * h * h, {lambda});
    MESSAGE("sphere " << sphere << " cube " << cube);
    CHECK(std::fabs(sphere - cube) <= 0.02 * std::fabs(cube));
}

TEST_CASE("runtime scaling" * doctest::skip(std::getenv("MOLT_SKIP_TIMING") != nullptr))
{
    const KernelParams k{2.0};
    std::vector<double> ns, ts;
    for (std::size_t n : {1000u, 8000u, 64000u}) {
        const ParticleCloud c = random_cloud(n, 99);
        const auto t0 = std::chrono::steady_clock::now();
        const ClusterTree t = build_tree(c, {});
        const auto v = evaluate_sum(t, c.positions, k);
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ns.push_back(std::log(double(n)));
        ts.push_back(std::log(dt));
        MESSAGE("N=" << n << " time " << dt << " s");
        CHECK(v.size() == n);
    }
    const double slope = ((ns[2] - ns[0]) * (ts[2] - ts[0])) / ((ns[2] - ns[0]) * (ns[2] - ns[0]));
    MESSAGE("log-log slope " << slope);
}
