#pragma once

#include "molt/bie.hpp"
#include "molt/gmres.hpp"
#include "molt/grid.hpp"
#include "molt/problems.hpp"
#include "molt/treecode.hpp"

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace molt {

enum class Variant { Dissipative, Dispersive };

std::string to_string(Variant v);
std::string to_string(Formulation f);
Variant parse_variant(const std::string& s);
Formulation parse_formulation(const std::string& s);

struct StepperOptions {
    Formulation formulation = Formulation::Direct;
    Variant variant = Variant::Dissipative;
    double dt = 0.0;
    TreecodeParams tree;
    GmresOptions gmres;
    // Gauss points per panel direction for layer potentials at particles.
    int rep_order = 4;
    // Panels per face direction; 0 means one panel per particle layer.
    int panels_per_face = 0;
    BoundaryInteractions::Storage storage = BoundaryInteractions::Storage::Auto;
    // Limit operator as epsilon -> 0: lambda = 0, no history charge, T = -grad S.
    bool formal_limit = false;
};

// lambda = sqrt(2) epsilon / dt
KernelParams scheme_kernel(double epsilon, double dt);

// Vector fields hold 3 values per point. Target fields (w, E) cover the particles followed by the
// extra targets; grid fields (B, B0, S, rho, T) cover the particles only.
struct FieldHistory {
    double t = 0.0;
    int step = 0;
    std::array<std::vector<double>, 3> w; // w^n, w^{n-1}, w^{n-2}
    std::vector<double> E, B, B0;
    std::vector<double> S, rho;            // int_0^t rho and rho at t^n
    std::array<std::vector<double>, 2> T; // T^n, T^{n-1}
    std::array<std::vector<double>, 2> trace; // w at panel centres, t^n and t^{n-1}
    std::array<std::vector<double>, 2> div;   // div w at panel centres, t^n and t^{n-1}
};

struct SolveStats {
    int iterations = 0;
    double residual = 0.0;
};

struct StepStats {
    double t = 0.0;
    std::vector<SolveStats> solves;
    double seconds = 0.0;
    // volume convolution, boundary solves, representation at the targets
    double seconds_volume = 0.0, seconds_solve = 0.0, seconds_layers = 0.0;
};

// d^{n+1} = (2/3) dt rho^{n+1} + (4/3) d^n - (1/3) d^{n-1}, elementwise.
std::vector<double> neumann_boundary_data(std::span<const double> d_n, std::span<const double> d_nm1,
                                          std::span<const double> rho_next, double dt);

// (3/2 w^{n+1} - 2 w^n + 1/2 w^{n-1}) / dt
std::vector<double> reconstruct_E(std::span<const double> w_np1, std::span<const double> w_n,
                                  std::span<const double> w_nm1, double dt);

// -(1/epsilon) curl w + B0 on the particle grid; w holds the particles first.
std::vector<double> reconstruct_B(const ParticleGrid& grid, std::span<const double> w, std::span<const double> B0,
                                  double epsilon);

class Stepper {
public:
    Stepper(const ProblemSpec& problem, const ParticleGrid& grid, const StepperOptions& opts,
            std::vector<Vec3> extra_targets = {});
    ~Stepper();
    Stepper(const Stepper&) = delete;
    Stepper& operator=(const Stepper&) = delete;

    const ProblemSpec& problem() const { return problem_; }
    const ParticleGrid& grid() const { return grid_; }
    const StepperOptions& options() const { return opts_; }
    const PanelMesh& mesh() const { return mesh_; }
    const KernelParams& kernel() const { return kernel_; }
    std::span<const Vec3> targets() const { return targets_; }
    std::size_t particle_count() const { return grid_.size(); }

    const FieldHistory& history() const { return hist_; }
    // Replaces the state, e.g. with exact data; sizes are checked.
    void set_history(FieldHistory h);
    // Taylor ghost levels about t = 0.
    FieldHistory startup_history() const;

    // T = -grad S + epsilon curl B0 - epsilon J on the particles (line currents excluded).
    std::vector<double> volume_source(std::span<const double> S, double t) const;

    StepStats step();

private:
    struct Impl;

    ProblemSpec problem_;
    ParticleGrid grid_;
    StepperOptions opts_;
    KernelParams kernel_;
    PanelMesh mesh_;
    std::vector<Vec3> targets_;
    std::vector<Vec3> centres_;
    FieldHistory hist_;
    std::unique_ptr<Impl> impl_;
};

} // namespace molt
