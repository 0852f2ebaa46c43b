#pragma once

#include "molt/gmres.hpp"
#include "molt/problems.hpp"
#include "molt/stepper.hpp"
#include "molt/treecode.hpp"

#include <string>
#include <vector>

namespace molt {

struct RunConfig {
    ProblemId problem = ProblemId::P1;
    Formulation formulation = Formulation::Direct;
    Variant variant = Variant::Dissipative;
    int N = 30;
    double cfl = 3.2;
    double epsilon = 1.0;
    double t_final = 1.0;
    int steps = 0; // 0: floor(t_final / dt)
    TreecodeParams tree;
    GmresOptions gmres{1e-14, 500};
    int rep_order = 4;
    std::string output = "out";
    Vec3 probe{0.86602540378443865, 0.70710678118654752, 0.35355339059327376};
    // slice output: field name (w1..w3, E1..E3, B1..B3), fixed axis (1-3) and coordinate
    std::string slice_field;
    int slice_axis = 1;
    double slice_coord = 0.5;
    std::vector<double> slice_times;
    // The code has no parallel reductions, so results never depend on scheduling; the flag is
    // recorded for completeness.
    bool deterministic = true;

    double h() const { return 1.0 / N; }
    double dt() const { return cfl * h(); }
    int step_count() const;
    // Throws ConfigError / FormulationError for invalid or incompatible settings.
    void validate() const;
};

RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
// One key = value assignment.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
// Text form that parse_config reads back to the same configuration.
std::string to_config_text(const RunConfig& cfg);
std::vector<std::string> config_keys();

// Locale-independent, 17 significant digits.
std::string format_number(double v);

StepperOptions stepper_options(const RunConfig& cfg);

} // namespace molt
