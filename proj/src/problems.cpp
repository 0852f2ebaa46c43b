#include "molt/problems.hpp"

#include "molt/errors.hpp"

#include <cmath>
#include <numbers>

namespace molt {

namespace {

constexpr double kPi = std::numbers::pi;

ProblemSpec problem1(double eps)
{
    ProblemSpec p;
    p.id = ProblemId::P1;
    p.epsilon = eps;
    p.omega = std::sqrt(6.0) * kPi / eps;
    p.tags = face_tags(ProblemId::P1);
    auto e0 = [](const Vec3& x) {
        const double s1 = std::sin(kPi * x.x), c1 = std::cos(kPi * x.x);
        const double s2 = std::sin(kPi * x.y), c2 = std::cos(kPi * x.y);
        const double s3 = std::sin(-2.0 * kPi * x.z), c3 = std::cos(-2.0 * kPi * x.z);
        return Vec3{c1 * s2 * s3, s1 * c2 * s3, s1 * s2 * c3};
    };
    p.E0 = e0;
    p.B0 = [](const Vec3&) { return Vec3{}; };
    const double omega = p.omega;
    p.exact = [e0, omega](double t, const Vec3& x) {
        const Vec3 e = e0(x);
        const double s1 = std::sin(kPi * x.x), c1 = std::cos(kPi * x.x);
        const double s2 = std::sin(kPi * x.y), c2 = std::cos(kPi * x.y);
        const double c3 = std::cos(-2.0 * kPi * x.z);
        const double b = std::sqrt(1.5) * std::sin(omega * t);
        return ExactFields{e * (std::sin(omega * t) / omega), e * std::cos(omega * t),
                           Vec3{-s1 * c2 * c3, c1 * s2 * c3, 0.0} * b};
    };
    p.b_component = 0;
    return p;
}

ProblemSpec problem2(double eps)
{
    ProblemSpec p;
    p.id = ProblemId::P2;
    p.epsilon = eps;
    p.omega = std::sqrt(2.0) * kPi / eps;
    p.tags = face_tags(ProblemId::P2);
    const double omega = p.omega;
    p.E0 = [](const Vec3& x) { return Vec3{std::sin(kPi * x.y) * std::sin(kPi * x.z), 0.0, 0.0}; };
    auto b = [](double t, double omega, const Vec3& x) {
        const double ph = kPi * x.z - omega * t;
        return Vec3{0.0, std::sin(kPi * x.y) * std::sin(ph), std::cos(kPi * x.y) * std::cos(ph)} *
               (1.0 / std::sqrt(2.0));
    };
    p.B0 = [b](const Vec3& x) { return b(0.0, 0.0, x); };
    p.exact = [b, omega](double t, const Vec3& x) {
        const double s2 = std::sin(kPi * x.y), ph = kPi * x.z - omega * t;
        return ExactFields{Vec3{s2 * (std::cos(ph) - std::cos(kPi * x.z)) / omega, 0.0, 0.0},
                           Vec3{s2 * std::sin(ph), 0.0, 0.0}, b(t, omega, x)};
    };
    p.g = [omega](double t, const Vec3& x) {
        const double c = x.z < 0.5 ? -(std::sqrt(2.0) + 2.0) / 2.0 : -(std::sqrt(2.0) - 2.0) / 2.0;
        return Vec3{c * std::sin(kPi * x.y) * std::sin(omega * t), 0.0, 0.0};
    };
    p.b_component = 1;
    return p;
}

ProblemSpec problem3(double eps)
{
    ProblemSpec p;
    p.id = ProblemId::P3;
    p.epsilon = eps;
    p.omega = 2.0 * kPi;
    p.tags = face_tags(ProblemId::P3);
    p.E0 = [](const Vec3&) { return Vec3{}; };
    p.B0 = [](const Vec3&) { return Vec3{}; };
    p.line_current = true;
    p.g = [](double, const Vec3&) { return Vec3{}; };
    p.b_component = 0;
    return p;
}

constexpr int kLineOrder = 10;

struct LineSum {
    double v = 0.0;
    Vec3 g;
};

LineSum gauss_segment(const Vec3& x, double a, double b, const KernelParams& kernel)
{
    const GaussRule& rule = gauss_legendre(kLineOrder);
    LineSum s;
    for (int i = 0; i < kLineOrder; ++i) {
        const double z = a + (b - a) * rule.nodes[i];
        const double w = (b - a) * rule.weights[i];
        const Vec3 dx = x - Vec3{0.5, 0.5, z};
        s.v += w * green(norm(dx), kernel);
        s.g += green_gradient(dx, kernel) * w;
    }
    return s;
}

LineSum adaptive_segment(const Vec3& x, double a, double b, const LineSum& whole, const KernelParams& kernel,
                         double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const LineSum l = gauss_segment(x, a, m, kernel), r = gauss_segment(x, m, b, kernel);
    LineSum both{l.v + r.v, l.g + r.g};
    const double diff = std::fabs(both.v - whole.v) + norm(both.g - whole.g);
    if (diff < tol || depth >= 50)
        return both;
    const LineSum a1 = adaptive_segment(x, a, m, l, kernel, 0.5 * tol, depth + 1);
    const LineSum a2 = adaptive_segment(x, m, b, r, kernel, 0.5 * tol, depth + 1);
    return {a1.v + a2.v, a1.g + a2.g};
}

} // namespace

std::string to_string(ProblemId id)
{
    switch (id) {
    case ProblemId::P1:
        return "P1";
    case ProblemId::P2:
        return "P2";
    default:
        return "P3";
    }
}

ProblemId parse_problem(const std::string& s)
{
    if (s == "P1" || s == "p1" || s == "1")
        return ProblemId::P1;
    if (s == "P2" || s == "p2" || s == "2")
        return ProblemId::P2;
    if (s == "P3" || s == "p3" || s == "3")
        return ProblemId::P3;
    throw ConfigError("unknown problem '" + s + "'");
}

ProblemSpec make_problem(ProblemId id, double epsilon)
{
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw ConfigError("make_problem: epsilon must be positive");
    switch (id) {
    case ProblemId::P1:
        return problem1(epsilon);
    case ProblemId::P2:
        return problem2(epsilon);
    default:
        return problem3(epsilon);
    }
}

FaceTags face_tags(ProblemId id)
{
    const FaceBc P = FaceBc::Pec, S = FaceBc::SilverMuller;
    switch (id) {
    case ProblemId::P1:
        return kAllPec;
    case ProblemId::P2:
        return {P, P, P, P, S, S};
    default:
        return {S, S, S, S, P, P};
    }
}

ExactFields exact_fields(const ProblemSpec& p, double t, const Vec3& x)
{
    if (!p.exact)
        throw FormulationError("exact_fields: no exact solution for " + to_string(p.id));
    return p.exact(t, x);
}

Vec3 boundary_data_g(const ProblemSpec& p, double t, const Vec3& x)
{
    const double tol = 1e-12;
    bool on = false;
    for (int f = 0; f < 6; ++f) {
        const int a = face_axis(f);
        const double plane = f % 2 == 0 ? 0.0 : 1.0;
        if (p.tags[f] == FaceBc::SilverMuller && std::fabs(x[a] - plane) <= tol)
            on = true;
    }
    if (!on)
        throw DomainError("boundary_data_g: point is not on a Silver-Mueller face");
    return p.g ? p.g(t, x) : Vec3{};
}

LineIntegral line_integral(const Vec3& x, const KernelParams& kernel)
{
    const double rho = std::hypot(x.x - 0.5, x.y - 0.5);
    if (!(rho > 0.0))
        throw DomainError("line_integral: target on the current line");
    // Split at the foot point where the integrand peaks.
    const double foot = std::clamp(x.z, 0.0, 1.0);
    LineSum total;
    for (auto [a, b] : {std::pair{0.0, foot}, std::pair{foot, 1.0}}) {
        if (b - a <= 0.0)
            continue;
        const LineSum whole = gauss_segment(x, a, b, kernel);
        const LineSum s = adaptive_segment(x, a, b, whole, kernel, 1e-10, 0);
        total.v += s.v;
        total.g += s.g;
    }
    return {total.v, total.g};
}

std::vector<double> line_current_convolution(std::span<const Vec3> targets, double t, const KernelParams& kernel,
                                             double epsilon)
{
    const double c = -epsilon * std::cos(2.0 * kPi * t);
    std::vector<double> out(targets.size(), 0.0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const LineIntegral li = line_integral(targets[i], kernel);
        out[i] = c == 0.0 ? 0.0 : c * li.value;
    }
    return out;
}

} // namespace molt
