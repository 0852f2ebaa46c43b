#pragma once

#include "molt/kernels.hpp"
#include "molt/panels.hpp"
#include "molt/vec3.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace molt {

enum class ProblemId { P1, P2, P3 };

std::string to_string(ProblemId id);
ProblemId parse_problem(const std::string& s);

struct ExactFields {
    Vec3 w, E, B;
};

// Everything the stepper needs to know about a configuration. Empty functions stand for zero
// fields (rho, J, g) or for "not available" (exact).
struct ProblemSpec {
    ProblemId id = ProblemId::P1;
    double epsilon = 1.0;
    double omega = 0.0;
    FaceTags tags = kAllPec;
    std::function<Vec3(const Vec3&)> E0;
    std::function<Vec3(const Vec3&)> B0;
    std::function<double(double, const Vec3&)> rho;
    std::function<Vec3(double, const Vec3&)> J;
    // Line current (0, 0, delta(x1 - 1/2) delta(x2 - 1/2) cos(2 pi t)).
    bool line_current = false;
    std::function<ExactFields(double, const Vec3&)> exact;
    std::function<Vec3(double, const Vec3&)> g;
    // Component of B used for the error tables.
    int b_component = 0;
};

ProblemSpec make_problem(ProblemId id, double epsilon = 1.0);

FaceTags face_tags(ProblemId id);

// Throws FormulationError when the problem has no exact solution.
ExactFields exact_fields(const ProblemSpec& p, double t, const Vec3& x);

// Silver-Mueller data on a tagged face; DomainError when x is not on one.
Vec3 boundary_data_g(const ProblemSpec& p, double t, const Vec3& x);

// Integral over the bar {(1/2, 1/2, s), 0 <= s <= 1} of G(x|y) and of grad_x G, by adaptive
// Gauss-Legendre with successive refinements agreeing to 1e-10.
struct LineIntegral {
    double value = 0.0;
    Vec3 gradient;
};
LineIntegral line_integral(const Vec3& x, const KernelParams& kernel);

// Third component of the volume term of the line current at time t:
// -epsilon cos(2 pi t) int G(x | (1/2, 1/2, s)) ds.
std::vector<double> line_current_convolution(std::span<const Vec3> targets, double t, const KernelParams& kernel,
                                             double epsilon);

} // namespace molt
