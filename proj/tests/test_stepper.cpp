#include "doctest.h"

#include "molt/errors.hpp"
#include "molt/stepper.hpp"

#include <cmath>
#include <numbers>

using namespace molt;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs(std::span<const double> v)
{
    double m = 0.0;
    for (double x : v)
        m = std::max(m, std::fabs(x));
    return m;
}

ProblemSpec quiet_problem()
{
    ProblemSpec p = make_problem(ProblemId::P1);
    p.E0 = [](const Vec3&) { return Vec3{}; };
    p.exact = nullptr;
    return p;
}

StepperOptions options(double dt, Formulation f = Formulation::Direct, Variant v = Variant::Dissipative)
{
    StepperOptions o;
    o.dt = dt;
    o.formulation = f;
    o.variant = v;
    o.gmres.max_iter = 400;
    return o;
}

void set_exact_history(Stepper& s, const ProblemSpec& p, double t0)
{
    FieldHistory h = s.history();
    h.t = t0;
    const double dt = s.options().dt;
    for (int m = 0; m < 3; ++m)
        for (std::size_t i = 0; i < s.targets().size(); ++i) {
            const Vec3 w = exact_fields(p, t0 - m * dt, s.targets()[i]).w;
            for (int k = 0; k < 3; ++k)
                h.w[m][3 * i + k] = w[k];
        }
    s.set_history(std::move(h));
}

} // namespace

TEST_CASE("reconstruct_E")
{
    const std::vector<double> c{1.5, -2.0, 0.25};
    CHECK(max_abs(reconstruct_E(c, c, c, 0.3)) == 0.0);
    // w = t c at t = 2, 1.5, 1 with dt = 0.5
    std::vector<double> a(3), b(3), d(3);
    for (int k = 0; k < 3; ++k) {
        a[k] = 2.0 * c[k];
        b[k] = 1.5 * c[k];
        d[k] = 1.0 * c[k];
    }
    const std::vector<double> E = reconstruct_E(a, b, d, 0.5);
    for (int k = 0; k < 3; ++k)
        CHECK(E[k] == doctest::Approx(c[k]).epsilon(1e-15));
    CHECK_THROWS_AS(reconstruct_E(a, b, std::vector<double>(2), 0.5), ConfigError);
}

TEST_CASE("reconstruct_B")
{
    const ParticleGrid g(5);
    const double c = 0.8, eps = 0.5;
    std::vector<double> w(3 * g.size()), B0(3 * g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        w[3 * i + 2] = c * g.positions()[i].x;
        B0[3 * i] = 0.1;
        B0[3 * i + 1] = -0.2;
        B0[3 * i + 2] = 0.3;
    }
    // curl (0, 0, c x1) = (0, -c, 0)
    const std::vector<double> B = reconstruct_B(g, w, B0, eps);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(B[3 * i] == doctest::Approx(0.1).epsilon(1e-13));
        CHECK(B[3 * i + 1] == doctest::Approx(-0.2 + c / eps).epsilon(1e-13));
        CHECK(B[3 * i + 2] == doctest::Approx(0.3).epsilon(1e-13));
    }
    std::fill(w.begin(), w.end(), 4.0);
    const std::vector<double> B2 = reconstruct_B(g, w, B0, eps);
    for (std::size_t i = 0; i < B2.size(); ++i)
        CHECK(std::fabs(B2[i] - B0[i]) < 1e-12);
}

TEST_CASE("Neumann recursion")
{
    const std::vector<double> zero(4, 0.0);
    CHECK(max_abs(neumann_boundary_data(zero, zero, zero, 0.1)) == 0.0);

    // rho = 0: any constant is a fixed point; constant rho: d grows by dt rho per step
    const double dt = 0.07;
    const std::vector<double> level{0.3, -1.0, 2.0, 0.0};
    CHECK(neumann_boundary_data(level, level, zero, dt) == level);
    std::vector<double> a{0.5}, b{0.5 - dt * 1.3};
    for (int n = 0; n < 10; ++n) {
        const std::vector<double> c = neumann_boundary_data(a, b, std::vector<double>{1.3}, dt);
        CHECK(c[0] == doctest::Approx(0.5 + (n + 1) * dt * 1.3).epsilon(1e-13));
        b = a;
        a = c;
    }

    // the sequence satisfies (3/2 d^{n+1} - 2 d^n + 1/2 d^{n-1}) / dt = rho^{n+1}
    std::vector<double> d0{0.0}, d1{0.01};
    for (int n = 1; n < 40; ++n) {
        const std::vector<double> r{std::sin(0.3 * n) + 0.5};
        const std::vector<double> d2 = neumann_boundary_data(d1, d0, r, dt);
        CHECK(std::fabs((1.5 * d2[0] - 2.0 * d1[0] + 0.5 * d0[0]) / dt - r[0]) <= 1e-13);
        d0 = d1;
        d1 = d2;
    }
    CHECK_THROWS_AS(neumann_boundary_data(zero, std::vector<double>(3), zero, dt), ConfigError);
}

TEST_CASE("configuration checks")
{
    const ParticleGrid g(6);
    const ProblemSpec p1 = make_problem(ProblemId::P1), p2 = make_problem(ProblemId::P2);
    CHECK_THROWS_AS(Stepper(p1, g, options(0.0)), ConfigError);
    CHECK_THROWS_AS(Stepper(p1, g, options(0.1, Formulation::SilverMuller)), FormulationError);
    CHECK_THROWS_AS(Stepper(p2, g, options(0.1, Formulation::Direct)), FormulationError);
    CHECK_THROWS_AS(Stepper(p2, g, options(0.1, Formulation::SilverMuller, Variant::Dispersive)), FormulationError);
    const ProblemSpec p3 = make_problem(ProblemId::P3);
    CHECK_THROWS_AS(Stepper(p3, ParticleGrid(5), options(0.1, Formulation::SilverMuller)), ConfigError);
    CHECK_THROWS_AS(Stepper(p1, g, options(0.1), {Vec3{0.5, 0.5, 1.0}}), DomainError);
    StepperOptions limit = options(0.1, Formulation::SilverMuller);
    limit.formal_limit = true;
    CHECK_THROWS_AS(Stepper(p2, g, limit), FormulationError);

    Stepper s(p1, g, options(0.1));
    FieldHistory h = s.history();
    h.E.pop_back();
    CHECK_THROWS_AS(s.set_history(h), ConfigError);
    CHECK(parse_formulation("indirect_v2") == Formulation::IndirectV2);
    CHECK(parse_variant("dispersive") == Variant::Dispersive);
    CHECK_THROWS_AS(parse_formulation("v3"), ConfigError);
    CHECK(scheme_kernel(1.0, 0.5).lambda == doctest::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("zero data stays zero")
{
    const ParticleGrid g(6);
    const ProblemSpec p = quiet_problem();
    for (auto [f, v] : {std::pair{Formulation::Direct, Variant::Dissipative},
                        std::pair{Formulation::Direct, Variant::Dispersive},
                        std::pair{Formulation::IndirectV1, Variant::Dissipative},
                        std::pair{Formulation::IndirectV2, Variant::Dissipative}}) {
        Stepper s(p, g, options(0.1, f, v));
        for (int n = 0; n < 2; ++n)
            s.step();
        CHECK(max_abs(s.history().w[0]) == 0.0);
        CHECK(max_abs(s.history().E) == 0.0);
        CHECK(max_abs(s.history().B) == 0.0);
    }
}

TEST_CASE("startup history")
{
    const ParticleGrid g(4);
    // Problem 1: T(0) = 0, ghosts are -m dt E0
    {
        const ProblemSpec p = make_problem(ProblemId::P1);
        Stepper s(p, g, options(0.1), {Vec3{0.3, 0.4, 0.7}});
        const FieldHistory& h = s.history();
        CHECK(max_abs(h.w[0]) == 0.0);
        for (std::size_t i = 0; i < s.targets().size(); ++i) {
            const Vec3 e = p.E0(s.targets()[i]);
            for (int k = 0; k < 3; ++k) {
                CHECK(h.w[1][3 * i + k] == doctest::Approx(-0.1 * e[k]).epsilon(1e-15));
                CHECK(h.w[2][3 * i + k] == doctest::Approx(-0.2 * e[k]).epsilon(1e-15));
                CHECK(h.E[3 * i + k] == e[k]);
            }
        }
    }
    // Problem 3: zero initial fields, zero history
    {
        Stepper s(make_problem(ProblemId::P3), g, options(0.1, Formulation::SilverMuller));
        const FieldHistory& h = s.history();
        for (int m = 0; m < 3; ++m)
            CHECK(max_abs(h.w[m]) == 0.0);
        CHECK(max_abs(h.trace[1]) == 0.0);
    }
    // Problem 2: ghosts agree with the exact field to O(dt^3) away from the grid stencils
    {
        const ProblemSpec p = make_problem(ProblemId::P2);
        const std::vector<Vec3> probes{{0.3, 0.4, 0.7}, {0.85, 0.1, 0.2}, {0.5, 0.6, 0.45}};
        double prev[3] = {0.0, 0.0, 0.0};
        for (double dt : {0.1, 0.05, 0.025}) {
            Stepper s(p, g, options(dt, Formulation::SilverMuller), probes);
            const FieldHistory& h = s.history();
            double err[3] = {0.0, 0.0, 0.0};
            for (int m = 1; m <= 2; ++m)
                for (std::size_t q = 0; q < probes.size(); ++q) {
                    const std::size_t i = g.size() + q;
                    const Vec3 w = exact_fields(p, -m * dt, probes[q]).w;
                    for (int k = 0; k < 3; ++k)
                        err[m] = std::max(err[m], std::fabs(h.w[m][3 * i + k] - w[k]));
                }
            // panel-centre traces of w(-dt)
            for (std::size_t j = 0; j < s.mesh().size(); ++j) {
                const Vec3 w = exact_fields(p, -dt, s.mesh()[j].center).w;
                for (int k = 0; k < 3; ++k)
                    err[0] = std::max(err[0], std::fabs(h.trace[1][3 * j + k] - w[k]));
            }
            if (prev[1] > 0.0)
                for (int m = 0; m < 3; ++m) {
                    CHECK(prev[m] / err[m] > 6.0);
                    CHECK(prev[m] / err[m] < 10.0);
                }
            std::copy(err, err + 3, prev);
        }
    }
}

TEST_CASE("one step from exact history has third-order local error")
{
    const ParticleGrid g(20);
    const ProblemSpec p = make_problem(ProblemId::P1);
    double err[2];
    int idx = 0;
    for (double dt : {0.2, 0.1}) {
        Stepper s(p, g, options(dt));
        set_exact_history(s, p, 0.3);
        s.step();
        double e = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Vec3 w = exact_fields(p, 0.3 + dt, g.positions()[i]).w;
            for (int k = 0; k < 3; ++k)
                e += std::fabs(s.history().w[0][3 * i + k] - w[k]);
        }
        err[idx++] = e * g.weight();
    }
    MESSAGE("one-step L1 errors ", err[0], " ", err[1]);
    CHECK(err[0] / err[1] > 6.0);
    CHECK(err[0] / err[1] < 10.0);
}

TEST_CASE("step is linear in the history")
{
    const ParticleGrid g(6);
    const ProblemSpec p = make_problem(ProblemId::P1);
    for (Formulation f : {Formulation::Direct, Formulation::IndirectV2})
        for (Variant v : {Variant::Dissipative, Variant::Dispersive}) {
            Stepper a(p, g, options(0.15, f, v)), b(p, g, options(0.15, f, v));
            set_exact_history(a, p, 0.2);
            set_exact_history(b, p, 0.2);
            FieldHistory h = b.history();
            const double alpha = -0.37;
            for (auto& level : h.w)
                for (double& x : level)
                    x *= alpha;
            b.set_history(h);
            a.step();
            b.step();
            const auto& wa = a.history().w[0];
            const auto& wb = b.history().w[0];
            double diff = 0.0;
            for (std::size_t i = 0; i < wa.size(); ++i)
                diff = std::max(diff, std::fabs(wb[i] - alpha * wa[i]));
            CHECK(diff <= 1e-12 * std::fabs(alpha) * max_abs(wa));
        }
}

TEST_CASE("charge integral and volume source")
{
    const ParticleGrid g(6);
    ProblemSpec p = quiet_problem();
    const double c = 0.7;
    p.rho = [c](double, const Vec3&) { return c; };
    Stepper s(p, g, options(0.1));
    CHECK(max_abs(s.volume_source(std::vector<double>(g.size(), 0.0), 0.0)) == 0.0);
    s.step();
    s.step();
    const FieldHistory& h = s.history();
    for (double v : h.S)
        CHECK(v == doctest::Approx(c * 0.2).epsilon(1e-15));
    CHECK(max_abs(h.T[0]) <= 1e-13);
    // divergence targets follow the recursion towards 2 dt rho
    CHECK(h.div[0][0] == doctest::Approx((2.0 / 3.0) * 0.1 * c * (1.0 + 4.0 / 3.0)).epsilon(1e-14));

    // B0 and J enter with the epsilon prefactor, and drop in the formal limit
    ProblemSpec q = quiet_problem();
    q.epsilon = 0.5;
    q.B0 = [](const Vec3& x) { return Vec3{0.0, 0.0, x.x * x.x}; };
    q.J = [](double t, const Vec3&) { return Vec3{t, 0.0, 0.0}; };
    Stepper sq(q, g, options(0.1));
    const std::vector<double> T = sq.volume_source(std::vector<double>(g.size(), 0.0), 2.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        // curl (0, 0, x1^2) = (0, -2 x1, 0)
        CHECK(T[3 * i] == doctest::Approx(-0.5 * 2.0).epsilon(1e-13));
        CHECK(T[3 * i + 1] == doctest::Approx(-0.5 * 2.0 * g.positions()[i].x).epsilon(1e-12));
        CHECK(std::fabs(T[3 * i + 2]) <= 1e-13);
    }
    StepperOptions lo = options(0.1);
    lo.formal_limit = true;
    Stepper sl(q, g, lo);
    CHECK(sl.kernel().lambda == 0.0);
    CHECK(max_abs(sl.volume_source(std::vector<double>(g.size(), 0.0), 2.0)) == 0.0);
}

TEST_CASE("stability at large CFL")
{
    // a fixed number of steps: at CFL 50 one step already passes T = 1 on small grids
    const ParticleGrid g(10);
    const ProblemSpec p = make_problem(ProblemId::P1);
    for (double cfl : {3.2, 10.0, 50.0}) {
        Stepper s(p, g, options(cfl * g.h()));
        double peak = 0.0;
        for (int n = 0; n < 25; ++n) {
            s.step();
            peak = std::max(peak, max_abs(s.history().w[0]));
        }
        MESSAGE("CFL ", cfl, ": max |w| over 25 steps ", peak);
        CHECK(std::isfinite(peak));
        // the exact amplitude is 1/omega ~ 0.13
        CHECK(peak <= 0.5);
    }
}

TEST_CASE("repeated runs are bitwise identical")
{
    const ParticleGrid g(6);
    const ProblemSpec p = make_problem(ProblemId::P2);
    Stepper a(p, g, options(0.2, Formulation::SilverMuller), {Vec3{0.4, 0.4, 0.4}});
    Stepper b(p, g, options(0.2, Formulation::SilverMuller), {Vec3{0.4, 0.4, 0.4}});
    for (int n = 0; n < 2; ++n) {
        const StepStats sa = a.step(), sb = b.step();
        CHECK(sa.solves.size() == 1);
        CHECK(sa.solves[0].iterations == sb.solves[0].iterations);
        CHECK(sa.solves[0].residual <= 1e-14);
    }
    CHECK(a.history().w[0] == b.history().w[0]);
    CHECK(a.history().B == b.history().B);
}

TEST_CASE("Problem 3 line current drives B1 antisymmetrically")
{
    const ParticleGrid g(8);
    Stepper s(make_problem(ProblemId::P3), g, options(0.1, Formulation::SilverMuller));
    s.step();
    const auto& B = s.history().B;
    // mirror x2 -> 1 - x2 flips B1
    double scale = max_abs(B), err = 0.0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            for (int k = 0; k < 8; ++k)
                err = std::max(err, std::fabs(B[3 * g.index(i, j, k)] + B[3 * g.index(i, 7 - j, k)]));
    CHECK(scale > 0.0);
    CHECK(err <= 1e-4 * scale);
}
