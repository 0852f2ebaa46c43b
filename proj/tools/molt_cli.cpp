#include "molt/config.hpp"
#include "molt/errors.hpp"
#include "molt/harness.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

using namespace molt;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    bool check = false;
    bool quiet = false;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("-c,--config", c.config, "config file (key = value lines)");
    app->add_option("-s,--set", c.sets, "override a config key, key=value (repeatable)");
    app->add_flag("--check", c.check, "exit nonzero when an acceptance check fails");
    app->add_flag("-q,--quiet", c.quiet, "no per-step progress");
}

RunConfig build_config(const Common& c)
{
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
    for (const std::string& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + s + "'");
        apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    return cfg;
}

StepCallback progress(bool quiet)
{
    if (quiet)
        return {};
    return [](const StepStats& st, const RunResult& r) {
        int its = 0;
        for (const SolveStats& s : st.solves)
            its = std::max(its, s.iterations);
        std::printf("N=%d t=%.4f  iterations %d  %.2fs", r.config.N, st.t, its, st.seconds);
        for (const QuantityError& q : r.errors)
            std::printf("  %s %.3e", q.name.c_str(), q.error);
        std::printf("\n");
        std::fflush(stdout);
    };
}

int report(const std::vector<Check>& checks, bool check_mode)
{
    bool ok = true;
    for (const Check& c : checks) {
        std::printf("%s  %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
        ok = ok && c.pass;
    }
    return check_mode && !ok ? 2 : 0;
}

int cmd_run(const Common& c)
{
    RunConfig cfg = build_config(c);
    const RunResult r = run(cfg, progress(c.quiet));
    std::printf("%d steps, %.1fs, max GMRES iterations %d, div B %.3e, output in %s\n", r.steps, r.seconds,
                r.max_iterations, r.divergence_B, cfg.output.c_str());
    for (const QuantityError& q : r.errors)
        std::printf("%s %.6e\n", q.name.c_str(), q.error);
    if (!c.check)
        return 0;
    ConvergenceTable t;
    ConvergenceRow row{cfg.N, r.h, r.dt, r.errors, r.max_iterations, r.seconds};
    t.rows.push_back(row);
    return report(check_table(cfg, t), true);
}

int cmd_convergence(const Common& c, std::vector<int> Ns)
{
    RunConfig cfg = build_config(c);
    if (Ns.empty()) {
        for (const ReferenceRow& rr : reference_table(cfg).rows)
            Ns.push_back(rr.N);
        if (Ns.empty())
            Ns = {30, 40, 50};
    }
    const ConvergenceTable t = convergence(cfg, Ns, true, progress(c.quiet));
    std::printf("%-6s %5s %10s %10s %12s %8s\n", "qty", "N", "h", "dt", "error", "order");
    for (std::size_t q = 0; q < t.quantities.size(); ++q)
        for (std::size_t k = 0; k < t.rows.size(); ++k) {
            const ConvergenceRow& row = t.rows[k];
            std::printf("%-6s %5d %10.5f %10.5f %12.4e", t.quantities[q].c_str(), row.N, row.h, row.dt,
                        row.errors[q].error);
            if (k > 0)
                std::printf(" %8.2f", t.orders[q][k - 1]);
            std::printf("\n");
        }
    return c.check ? report(check_table(cfg, t), true) : 0;
}

int cmd_bench(const Common& c, BenchConfig bc)
{
    RunConfig cfg = build_config(c);
    bc.tree = cfg.tree;
    const BenchReport r = treecode_bench(bc);
    for (std::size_t i = 0; i < r.sizes.size(); ++i)
        std::printf("N=%zu  %.4fs\n", r.sizes[i], r.seconds[i]);
    std::printf("fitted exponent %.3f\n", r.exponent);
    std::vector<Check> checks{{"time exponent", r.exponent <= 1.25, format_number(r.exponent) + " <= 1.25"}};
    if (bc.accuracy_size > 0) {
        std::printf("max relative error at N=%zu: sum %.3e, gradient %.3e\n", bc.accuracy_size, r.sum_error,
                    r.gradient_error);
        checks.push_back({"sum error", r.sum_error <= 1e-6, format_number(r.sum_error) + " <= 1e-6"});
        checks.push_back({"gradient error", r.gradient_error <= 1e-5, format_number(r.gradient_error) + " <= 1e-5"});
    }
    return c.check ? report(checks, true) : 0;
}

int cmd_ap(const Common& c, ApConfig ac)
{
    RunConfig cfg = build_config(c);
    ac.tree = cfg.tree;
    ac.gmres = cfg.gmres;
    const ApReport r = ap_check(ac);
    for (std::size_t i = 0; i < r.epsilons.size(); ++i)
        std::printf("epsilon %.1e  discrepancy %.6e\n", r.epsilons[i], r.discrepancies[i]);
    std::printf("fitted slope %.3f\n", r.slope);
    return c.check ? report({{"AP slope", r.slope >= 0.9, format_number(r.slope) + " >= 0.9"}}, true) : 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Particle MOL^T solver for the rescaled Maxwell equations"};
    app.require_subcommand(1);

    Common run_c, conv_c, bench_c, ap_c;
    CLI::App* run_cmd = app.add_subcommand("run", "run one simulation and write CSV outputs");
    add_common(run_cmd, run_c);

    std::vector<int> Ns;
    CLI::App* conv_cmd = app.add_subcommand("convergence", "error table over several grids");
    add_common(conv_cmd, conv_c);
    conv_cmd->add_option("--N", Ns, "grids (default: the published rows, else 30 40 50)");

    BenchConfig bc;
    CLI::App* bench_cmd = app.add_subcommand("treecode-bench", "treecode timing and accuracy vs direct sums");
    add_common(bench_cmd, bench_c);
    bench_cmd->add_option("--sizes", bc.sizes, "particle counts to time");
    bench_cmd->add_option("--accuracy-size", bc.accuracy_size, "particles for the direct-sum comparison (0: skip)");
    bench_cmd->add_option("--lambda", bc.lambda, "screening parameter");
    bench_cmd->add_option("--seed", bc.seed, "random seed");

    ApConfig ac;
    CLI::App* ap_cmd = app.add_subcommand("ap-check", "one step at several epsilon vs the formal limit");
    add_common(ap_cmd, ap_c);
    ap_cmd->add_option("--N", ac.N, "particles per direction");
    ap_cmd->add_option("--cfl", ac.cfl, "dt / h");
    ap_cmd->add_option("--eps", ac.epsilons, "epsilon values");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run_cmd)
            return cmd_run(run_c);
        if (*conv_cmd)
            return cmd_convergence(conv_c, Ns);
        if (*bench_cmd)
            return cmd_bench(bench_c, bc);
        if (*ap_cmd)
            return cmd_ap(ap_c, ac);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 3;
    } catch (const FormulationError& e) {
        std::cerr << "formulation error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
