#pragma once

#include "molt/config.hpp"
#include "molt/stepper.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace molt {

// Discrete L1 norm sum_i |a_i - b_i| * weight, all components.
double l1_difference(std::span<const double> a, std::span<const double> b, double weight);

// max over time of the discrete L1 norm; errors[n] holds e(x_i, t^n) for every point i.
double error_norm(const std::vector<std::vector<double>>& errors, double weight);

// log(e_k / e_{k+1}) / log(h_k / h_{k+1}) for consecutive rows.
std::vector<double> convergence_order(std::span<const double> errors, std::span<const double> h);

struct QuantityError {
    std::string name; // w1, E1, B1 or B2
    double error = 0.0;
};

struct ProbeSample {
    double t = 0.0;
    Vec3 w, E, B;
    bool has_exact = false;
    ExactFields exact;
};

struct Slice {
    std::string field;
    double t = 0.0;
    int axis = 1; // fixed axis, 1-based
    double coord = 0.0;
    std::vector<double> a, b, value; // free coordinates in increasing axis order
};

struct RunResult {
    RunConfig config;
    int steps = 0;
    double h = 0.0, dt = 0.0, lambda = 0.0;
    std::size_t panels = 0;
    std::vector<QuantityError> errors; // empty without an exact solution
    double divergence_B = 0.0;         // at the final time
    std::vector<StepStats> step_stats;
    int max_iterations = 0;
    double max_residual = 0.0;
    double seconds = 0.0;
    std::vector<ProbeSample> probe;
    std::vector<Slice> slices;
};

using StepCallback = std::function<void(const StepStats&, const RunResult&)>;

// Runs the configured simulation in memory.
RunResult simulate(const RunConfig& cfg, const StepCallback& on_step = {});
// errors.csv, probe_timeseries.csv, slice_*.csv and run_meta.json in cfg.output.
std::vector<std::string> write_outputs(const RunResult& r);
RunResult run(const RunConfig& cfg, const StepCallback& on_step = {});

// Sample a particle-grid field (3 values per particle) on the slice plane, linearly interpolating
// between the neighbouring particle layers along the fixed axis.
Slice extract_slice(const ParticleGrid& grid, std::span<const double> field, int component, int axis,
                    double coord);

// Trilinear interpolation of a particle-grid field, 3 values per particle; points within h/2 of
// the walls use the outermost cells.
Vec3 interpolate(const ParticleGrid& grid, std::span<const double> field, const Vec3& x);

struct ConvergenceRow {
    int N = 0;
    double h = 0.0, dt = 0.0;
    std::vector<QuantityError> errors;
    int max_iterations = 0;
    double seconds = 0.0;
};

struct ConvergenceTable {
    std::vector<std::string> quantities;
    std::vector<ConvergenceRow> rows;
    // orders[q][k]: between rows k and k+1
    std::vector<std::vector<double>> orders;
};

ConvergenceTable convergence(const RunConfig& base, std::span<const int> Ns, bool write,
                             const StepCallback& on_step = {});
void write_convergence(const ConvergenceTable& table, const std::string& path);

// Published error tables: rows (N, w1, E1, B) and the minimum observed order between the last two
// published grids, per quantity.
struct ReferenceRow {
    int N;
    double w, E, B;
};
struct ReferenceTable {
    std::string name;
    std::vector<ReferenceRow> rows;
    double min_order[3] = {0.0, 0.0, 0.0};
    double band = 0.5; // relative
};
// Empty rows when the configuration has no published table.
ReferenceTable reference_table(const RunConfig& cfg);

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Error bands, orders and GMRES iteration limit against the published table.
inline constexpr int kMaxGmresIterations = 30;
std::vector<Check> check_table(const RunConfig& base, const ConvergenceTable& table);

struct ApConfig {
    int N = 20;
    double cfl = 3.2;
    std::vector<double> epsilons{1e-2, 1e-3, 1e-4};
    TreecodeParams tree;
    GmresOptions gmres{1e-14, 500};
    bool zero_data = false;
};

struct ApReport {
    std::vector<double> epsilons, discrepancies;
    double slope = 0.0; // least-squares fit of log discrepancy vs log epsilon
};

// P1-style box with a static charge, a divergence-free E0 and a nonzero B0; one dissipative step
// per epsilon against the formal-limit step from the same state.
ProblemSpec ap_problem(double epsilon, bool zero_data = false);
// One dissipative step from the startup history; particle values of w^1.
std::vector<double> ap_step(const ApConfig& cfg, double epsilon, bool formal_limit);
ApReport ap_check(const ApConfig& cfg);

// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct BenchConfig {
    std::vector<std::size_t> sizes{1000, 8000, 64000};
    std::size_t accuracy_size = 2000;
    double lambda = 2.0;
    TreecodeParams tree;
    std::uint64_t seed = 7;
};

struct BenchReport {
    std::vector<std::size_t> sizes;
    std::vector<double> seconds;
    double exponent = 0.0;
    // pointwise max |tc - direct| / |direct| at accuracy_size particles with positive charges;
    // the gradient uses vector norms
    double sum_error = 0.0, gradient_error = 0.0;
};

// Uniform random particles in the unit cube with charges in [-1, 1] / n, or [0, 1] / n.
ParticleCloud random_cloud(std::size_t n, std::uint64_t seed, bool positive = false);
BenchReport treecode_bench(const BenchConfig& cfg);

} // namespace molt
