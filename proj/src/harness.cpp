#include "molt/harness.hpp"

#include "molt/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

namespace molt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vec3 at(std::span<const double> f, std::size_t i)
{
    return {f[3 * i], f[3 * i + 1], f[3 * i + 2]};
}

int field_component(const std::string& f)
{
    return f[1] - '1';
}

std::span<const double> field_of(const FieldHistory& h, char name, std::size_t particles)
{
    const std::vector<double>& v = name == 'w' ? h.w[0] : (name == 'E' ? h.E : h.B);
    return std::span<const double>(v).first(3 * particles);
}

std::string axis_name(int a)
{
    return "x" + std::to_string(a);
}

void open_or_throw(std::ofstream& out, const std::filesystem::path& p)
{
    out.open(p);
    if (!out)
        throw std::runtime_error("output: cannot write '" + p.string() + "'");
}

std::string short_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string b_name(const ProblemSpec& p)
{
    return "B" + std::to_string(p.b_component + 1);
}

} // namespace

double l1_difference(std::span<const double> a, std::span<const double> b, double weight)
{
    if (a.size() != b.size())
        throw ConfigError("l1_difference: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::fabs(a[i] - b[i]);
    return s * weight;
}

double error_norm(const std::vector<std::vector<double>>& errors, double weight)
{
    double worst = 0.0;
    for (const auto& e : errors) {
        double s = 0.0;
        for (double v : e)
            s += std::fabs(v);
        worst = std::max(worst, s * weight);
    }
    return worst;
}

std::vector<double> convergence_order(std::span<const double> errors, std::span<const double> h)
{
    if (errors.size() != h.size() || errors.size() < 2)
        throw ConfigError("convergence_order: need at least two rows of matching size");
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < errors.size(); ++k)
        out.push_back(std::log(errors[k] / errors[k + 1]) / std::log(h[k] / h[k + 1]));
    return out;
}

Slice extract_slice(const ParticleGrid& grid, std::span<const double> field, int component, int axis,
                    double coord)
{
    if (axis < 1 || axis > 3)
        throw ConfigError("slice: axis must be 1, 2 or 3");
    const int n = grid.n(), a = axis - 1;
    const double s = (coord - grid.box().lo[a]) / grid.h() - 0.5;
    if (s < -1e-12 || s > n - 1 + 1e-12)
        throw DomainError("slice: coordinate outside the particle layers");
    int i0 = std::clamp(static_cast<int>(std::floor(s)), 0, std::max(0, n - 2));
    double frac = std::clamp(s - i0, 0.0, 1.0);
    const int i1 = std::min(i0 + 1, n - 1);
    int fb = (a + 1) % 3, fc = (a + 2) % 3;
    if (fb > fc)
        std::swap(fb, fc);
    Slice out;
    out.axis = axis;
    out.coord = coord;
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            int idx0[3], idx1[3];
            idx0[a] = i0;
            idx1[a] = i1;
            idx0[fb] = idx1[fb] = j;
            idx0[fc] = idx1[fc] = k;
            const double v0 = field[3 * grid.index(idx0[0], idx0[1], idx0[2]) + component];
            const double v1 = field[3 * grid.index(idx1[0], idx1[1], idx1[2]) + component];
            out.a.push_back(grid.coordinate(fb, j));
            out.b.push_back(grid.coordinate(fc, k));
            out.value.push_back(frac == 0.0 ? v0 : (1.0 - frac) * v0 + frac * v1);
        }
    return out;
}

Vec3 interpolate(const ParticleGrid& grid, std::span<const double> field, const Vec3& x)
{
    const int n = grid.n();
    int i0[3];
    double fr[3];
    for (int a = 0; a < 3; ++a) {
        const double s = std::clamp((x[a] - grid.box().lo[a]) / grid.h() - 0.5, 0.0, n - 1.0);
        i0[a] = std::min(static_cast<int>(std::floor(s)), n - 2);
        fr[a] = s - i0[a];
    }
    Vec3 out;
    for (int c = 0; c < 8; ++c) {
        const int d[3] = {c & 1, (c >> 1) & 1, (c >> 2) & 1};
        double wgt = 1.0;
        for (int a = 0; a < 3; ++a)
            wgt *= d[a] ? fr[a] : 1.0 - fr[a];
        if (wgt == 0.0)
            continue;
        out += wgt * at(field, grid.index(i0[0] + d[0], i0[1] + d[1], i0[2] + d[2]));
    }
    return out;
}

RunResult simulate(const RunConfig& cfg, const StepCallback& on_step)
{
    cfg.validate();
    const auto t0 = Clock::now();
    const ProblemSpec problem = make_problem(cfg.problem, cfg.epsilon);
    const ParticleGrid grid(cfg.N);
    Stepper stepper(problem, grid, stepper_options(cfg), {cfg.probe});
    stepper.set_history(stepper.startup_history());

    RunResult r;
    r.config = cfg;
    r.steps = cfg.step_count();
    r.h = cfg.h();
    r.dt = cfg.dt();
    r.lambda = stepper.kernel().lambda;
    r.panels = stepper.mesh().size();

    const std::size_t np = grid.size();
    const bool exact = static_cast<bool>(problem.exact);
    const int bc = problem.b_component;
    double max_w = 0.0, max_E = 0.0, max_B = 0.0;
    std::vector<bool> slice_done(cfg.slice_times.size(), false);

    auto record = [&](const FieldHistory& h) {
        ProbeSample s;
        s.t = h.t;
        s.w = at(h.w[0], np);
        s.E = at(h.E, np);
        s.B = interpolate(grid, h.B, cfg.probe);
        if (exact) {
            s.has_exact = true;
            s.exact = problem.exact(h.t, cfg.probe);
            std::vector<double> ew(np), eE(np), eB(np);
            for (std::size_t i = 0; i < np; ++i) {
                const ExactFields f = problem.exact(h.t, grid.positions()[i]);
                ew[i] = h.w[0][3 * i] - f.w.x;
                eE[i] = h.E[3 * i] - f.E.x;
                eB[i] = h.B[3 * i + bc] - f.B[bc];
            }
            const double wgt = grid.weight();
            max_w = std::max(max_w, error_norm({ew}, wgt));
            max_E = std::max(max_E, error_norm({eE}, wgt));
            max_B = std::max(max_B, error_norm({eB}, wgt));
        }
        r.probe.push_back(s);
        if (!cfg.slice_field.empty())
            for (std::size_t k = 0; k < cfg.slice_times.size(); ++k)
                if (!slice_done[k] && std::fabs(h.t - cfg.slice_times[k]) <= 0.5 * r.dt + 1e-12) {
                    Slice sl = extract_slice(grid, field_of(h, cfg.slice_field[0], np),
                                             field_component(cfg.slice_field), cfg.slice_axis, cfg.slice_coord);
                    sl.field = cfg.slice_field;
                    sl.t = h.t;
                    r.slices.push_back(std::move(sl));
                    slice_done[k] = true;
                }
    };

    record(stepper.history());
    for (int n = 0; n < r.steps; ++n) {
        StepStats st;
        try {
            st = stepper.step();
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("run: step " + std::to_string(n + 1) + " at t = " +
                                       format_number((n + 1) * r.dt) + ": " + e.what(),
                                   e.residual_history);
        }
        for (const SolveStats& s : st.solves) {
            r.max_iterations = std::max(r.max_iterations, s.iterations);
            r.max_residual = std::max(r.max_residual, s.residual);
        }
        record(stepper.history());
        r.step_stats.push_back(st);
        if (exact)
            r.errors = {{"w1", max_w}, {"E1", max_E}, {b_name(problem), max_B}};
        if (on_step)
            on_step(st, r);
    }
    r.divergence_B = divergence_diagnostic(grid, stepper.history().B);
    r.seconds = seconds_since(t0);
    return r;
}

std::vector<std::string> write_outputs(const RunResult& r)
{
    namespace fs = std::filesystem;
    const RunConfig& cfg = r.config;
    const fs::path dir(cfg.output);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("output: cannot create '" + dir.string() + "': " + ec.message());
    std::vector<std::string> files;

    {
        std::ofstream out;
        open_or_throw(out, dir / "errors.csv");
        out << "quantity,N,h,dt,error,order\n";
        for (const QuantityError& q : r.errors)
            out << q.name << ',' << cfg.N << ',' << format_number(r.h) << ',' << format_number(r.dt) << ','
                << format_number(q.error) << ",\n";
        files.push_back("errors.csv");
    }
    {
        std::ofstream out;
        open_or_throw(out, dir / "probe_timeseries.csv");
        out << "t,w1,w2,w3,E1,E2,E3,B1,B2,B3";
        const bool ex = !r.probe.empty() && r.probe.front().has_exact;
        if (ex)
            out << ",w1_exact,w2_exact,w3_exact,E1_exact,E2_exact,E3_exact,B1_exact,B2_exact,B3_exact";
        out << '\n';
        for (const ProbeSample& s : r.probe) {
            out << format_number(s.t);
            for (const Vec3* v : {&s.w, &s.E, &s.B})
                for (int c = 0; c < 3; ++c)
                    out << ',' << format_number((*v)[c]);
            if (ex)
                for (const Vec3* v : {&s.exact.w, &s.exact.E, &s.exact.B})
                    for (int c = 0; c < 3; ++c)
                        out << ',' << format_number((*v)[c]);
            out << '\n';
        }
        files.push_back("probe_timeseries.csv");
    }
    for (const Slice& sl : r.slices) {
        int fb = sl.axis % 3 + 1, fc = (sl.axis + 1) % 3 + 1;
        if (fb > fc)
            std::swap(fb, fc);
        const std::string name = "slice_" + sl.field + "_" + axis_name(sl.axis) + "_" + short_number(sl.coord) +
                                 "_t" + short_number(sl.t) + ".csv";
        std::ofstream out;
        open_or_throw(out, dir / name);
        out << axis_name(fb) << ',' << axis_name(fc) << ',' << sl.field << '@' << axis_name(sl.axis) << '='
            << format_number(sl.coord) << '\n';
        for (std::size_t i = 0; i < sl.value.size(); ++i)
            out << format_number(sl.a[i]) << ',' << format_number(sl.b[i]) << ',' << format_number(sl.value[i])
                << '\n';
        files.push_back(name);
    }

    nlohmann::ordered_json meta;
    meta["config_text"] = to_config_text(cfg);
    nlohmann::ordered_json c;
    c["problem"] = to_string(cfg.problem);
    c["formulation"] = to_string(cfg.formulation);
    c["variant"] = to_string(cfg.variant);
    c["N"] = cfg.N;
    c["cfl"] = cfg.cfl;
    c["epsilon"] = cfg.epsilon;
    c["t_final"] = cfg.t_final;
    c["steps"] = cfg.steps;
    c["theta"] = cfg.tree.theta;
    c["order"] = cfg.tree.p;
    c["leaf_capacity"] = cfg.tree.leaf_capacity;
    c["direct_below"] = cfg.tree.direct_below;
    c["gmres_tol"] = cfg.gmres.tol;
    c["gmres_max_iter"] = cfg.gmres.max_iter;
    c["rep_order"] = cfg.rep_order;
    c["probe"] = {cfg.probe.x, cfg.probe.y, cfg.probe.z};
    c["slice_field"] = cfg.slice_field;
    c["slice_axis"] = cfg.slice_axis;
    c["slice_coord"] = cfg.slice_coord;
    c["slice_times"] = cfg.slice_times;
    c["deterministic"] = cfg.deterministic;
    meta["config"] = c;
    meta["derived"] = {{"h", r.h}, {"dt", r.dt}, {"lambda", r.lambda}, {"steps", r.steps}, {"panels", r.panels},
                       {"particles", static_cast<std::size_t>(cfg.N) * cfg.N * cfg.N}};
    nlohmann::ordered_json errs = nlohmann::ordered_json::object();
    for (const QuantityError& q : r.errors)
        errs[q.name] = q.error;
    meta["errors"] = errs;
    meta["divergence_B"] = r.divergence_B;
    meta["max_iterations"] = r.max_iterations;
    meta["max_residual"] = r.max_residual;
    meta["seconds"] = r.seconds;
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const StepStats& s : r.step_stats) {
        nlohmann::ordered_json js;
        js["t"] = s.t;
        std::vector<int> its;
        std::vector<double> res;
        for (const SolveStats& v : s.solves) {
            its.push_back(v.iterations);
            res.push_back(v.residual);
        }
        js["iterations"] = its;
        js["residuals"] = res;
        js["seconds"] = s.seconds;
        js["seconds_volume"] = s.seconds_volume;
        js["seconds_solve"] = s.seconds_solve;
        js["seconds_layers"] = s.seconds_layers;
        steps.push_back(js);
    }
    meta["steps"] = steps;
    nlohmann::ordered_json slices = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.slices.size(); ++i)
        slices.push_back({{"file", files[2 + i]}, {"field", r.slices[i].field}, {"t", r.slices[i].t},
                          {"axis", r.slices[i].axis}, {"coord", r.slices[i].coord}});
    meta["slices"] = slices;
    meta["outputs"] = files;
#ifdef __VERSION__
    meta["compiler"] = __VERSION__;
#endif
    {
        std::ofstream out;
        open_or_throw(out, dir / "run_meta.json");
        out << meta.dump(2) << '\n';
    }
    files.push_back("run_meta.json");
    return files;
}

RunResult run(const RunConfig& cfg, const StepCallback& on_step)
{
    RunResult r = simulate(cfg, on_step);
    write_outputs(r);
    return r;
}

ConvergenceTable convergence(const RunConfig& base, std::span<const int> Ns, bool write,
                             const StepCallback& on_step)
{
    if (Ns.size() < 2)
        throw ConfigError("convergence: need at least two grids");
    ConvergenceTable table;
    for (int N : Ns) {
        RunConfig cfg = base;
        cfg.N = N;
        cfg.output = (std::filesystem::path(base.output) / ("N" + std::to_string(N))).string();
        const RunResult r = write ? run(cfg, on_step) : simulate(cfg, on_step);
        if (r.errors.empty())
            throw FormulationError("convergence: " + to_string(cfg.problem) + " has no exact solution");
        ConvergenceRow row;
        row.N = N;
        row.h = r.h;
        row.dt = r.dt;
        row.errors = r.errors;
        row.max_iterations = r.max_iterations;
        row.seconds = r.seconds;
        table.rows.push_back(row);
    }
    for (const QuantityError& q : table.rows.front().errors)
        table.quantities.push_back(q.name);
    for (std::size_t q = 0; q < table.quantities.size(); ++q) {
        std::vector<double> e, h;
        for (const ConvergenceRow& row : table.rows) {
            e.push_back(row.errors[q].error);
            h.push_back(row.h);
        }
        table.orders.push_back(convergence_order(e, h));
    }
    if (write) {
        std::filesystem::create_directories(base.output);
        write_convergence(table, (std::filesystem::path(base.output) / "errors.csv").string());
    }
    return table;
}

void write_convergence(const ConvergenceTable& t, const std::string& path)
{
    std::ofstream out;
    open_or_throw(out, path);
    out << "quantity,N,h,dt,error,order\n";
    for (std::size_t q = 0; q < t.quantities.size(); ++q)
        for (std::size_t k = 0; k < t.rows.size(); ++k) {
            const ConvergenceRow& row = t.rows[k];
            out << t.quantities[q] << ',' << row.N << ',' << format_number(row.h) << ',' << format_number(row.dt)
                << ',' << format_number(row.errors[q].error) << ',';
            if (k > 0)
                out << format_number(t.orders[q][k - 1]);
            out << '\n';
        }
}

ReferenceTable reference_table(const RunConfig& cfg)
{
    const bool diss = cfg.variant == Variant::Dissipative;
    ReferenceTable t;
    if (cfg.problem == ProblemId::P1 && cfg.formulation == Formulation::Direct && diss && cfg.cfl == 3.2 &&
        cfg.t_final == 1.0) {
        t.name = "P1 direct dissipative";
        t.rows = {{30, 3.06e-2, 1.68e-1, 2.71e-1}, {40, 1.96e-2, 1.10e-1, 1.78e-1}, {50, 1.23e-2, 6.65e-2, 1.13e-1}};
        t.min_order[0] = t.min_order[1] = t.min_order[2] = 1.8;
    } else if (cfg.problem == ProblemId::P1 && cfg.formulation == Formulation::Direct && !diss && cfg.cfl == 4.2 &&
               cfg.t_final == 1.0) {
        t.name = "P1 direct dispersive";
        t.rows = {{30, 3.68e-2, 2.14e-1, 3.27e-1}, {40, 2.37e-2, 1.21e-1, 2.16e-1}, {50, 1.48e-2, 7.41e-2, 1.36e-1}};
        t.min_order[0] = t.min_order[1] = t.min_order[2] = 1.8;
    } else if (cfg.problem == ProblemId::P1 && cfg.formulation == Formulation::IndirectV1 && diss &&
               cfg.cfl == 3.2 && cfg.t_final == 1.0) {
        t.name = "P1 indirect v1 dissipative";
        t.rows = {{30, 3.51e-2, 1.93e-1, 3.07e-1}, {40, 2.56e-2, 1.43e-1, 2.28e-1}};
        t.min_order[0] = t.min_order[1] = 1.0;
        t.min_order[2] = 1.4;
    } else if (cfg.problem == ProblemId::P2 && cfg.formulation == Formulation::SilverMuller && cfg.cfl == 4.9 &&
               cfg.t_final == 1.5) {
        t.name = "P2 silver_muller dissipative";
        t.rows = {{30, 4.59e-2, 2.12e-1, 1.59e-1}, {40, 2.97e-2, 1.24e-1, 9.46e-2}};
        t.min_order[0] = t.min_order[1] = t.min_order[2] = 1.4;
    }
    return t;
}

std::vector<Check> check_table(const RunConfig& base, const ConvergenceTable& table)
{
    const ReferenceTable ref = reference_table(base);
    std::vector<Check> out;
    auto find = [&](int N) -> const ConvergenceRow* {
        for (const ConvergenceRow& r : table.rows)
            if (r.N == N)
                return &r;
        return nullptr;
    };
    for (const ReferenceRow& rr : ref.rows) {
        const ConvergenceRow* row = find(rr.N);
        if (!row)
            continue;
        const double paper[3] = {rr.w, rr.E, rr.B};
        for (std::size_t q = 0; q < 3 && q < row->errors.size(); ++q) {
            const double e = row->errors[q].error;
            Check c;
            c.name = row->errors[q].name + " error at N=" + std::to_string(rr.N);
            c.pass = std::fabs(e / paper[q] - 1.0) <= ref.band;
            c.detail = format_number(e) + " vs " + format_number(paper[q]) + " +-50%";
            out.push_back(c);
        }
    }
    if (ref.rows.size() >= 2) {
        const int Nc = ref.rows[ref.rows.size() - 2].N, Nf = ref.rows.back().N;
        const ConvergenceRow *rc = find(Nc), *rf = find(Nf);
        if (rc && rf)
            for (std::size_t q = 0; q < 3 && q < rc->errors.size(); ++q) {
                const double ord = std::log(rc->errors[q].error / rf->errors[q].error) / std::log(rc->h / rf->h);
                Check c;
                c.name = rc->errors[q].name + " order " + std::to_string(Nc) + "->" + std::to_string(Nf);
                c.pass = ord >= ref.min_order[q];
                c.detail = format_number(ord) + " >= " + format_number(ref.min_order[q]);
                out.push_back(c);
            }
    }
    int its = 0;
    for (const ConvergenceRow& r : table.rows)
        its = std::max(its, r.max_iterations);
    out.push_back({"GMRES iterations", its <= kMaxGmresIterations,
                   std::to_string(its) + " <= " + std::to_string(kMaxGmresIterations)});
    return out;
}

ProblemSpec ap_problem(double epsilon, bool zero_data)
{
    ProblemSpec p;
    p.id = ProblemId::P1;
    p.epsilon = epsilon;
    p.tags = kAllPec;
    if (zero_data) {
        p.E0 = [](const Vec3&) { return Vec3{}; };
        p.B0 = [](const Vec3&) { return Vec3{}; };
        return p;
    }
    p.E0 = make_problem(ProblemId::P1, 1.0).E0;
    p.B0 = [](const Vec3& x) {
        return Vec3{std::sin(M_PI * x.y), std::sin(M_PI * x.z), std::sin(M_PI * x.x)};
    };
    p.rho = [](double, const Vec3& x) {
        return std::cos(M_PI * x.x) * std::cos(M_PI * x.y) * std::cos(M_PI * x.z);
    };
    return p;
}

std::vector<double> ap_step(const ApConfig& cfg, double epsilon, bool formal_limit)
{
    const ParticleGrid grid(cfg.N);
    StepperOptions o;
    o.dt = cfg.cfl * grid.h();
    o.tree = cfg.tree;
    o.gmres = cfg.gmres;
    o.formal_limit = formal_limit;
    Stepper s(ap_problem(epsilon, cfg.zero_data), grid, o);
    s.set_history(s.startup_history());
    s.step();
    return s.history().w[0];
}

double loglog_slope(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw ConfigError("loglog_slope: need at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

ApReport ap_check(const ApConfig& cfg)
{
    if (cfg.epsilons.empty())
        throw ConfigError("ap_check: no epsilon values");
    const std::vector<double> limit = ap_step(cfg, 1.0, true);
    const double wgt = 1.0 / (static_cast<double>(cfg.N) * cfg.N * cfg.N);
    ApReport rep;
    for (double eps : cfg.epsilons) {
        rep.epsilons.push_back(eps);
        rep.discrepancies.push_back(l1_difference(ap_step(cfg, eps, false), limit, wgt));
    }
    bool positive = rep.epsilons.size() >= 2;
    for (double d : rep.discrepancies)
        positive = positive && d > 0.0;
    rep.slope = positive ? loglog_slope(rep.epsilons, rep.discrepancies) : 0.0;
    return rep;
}

ParticleCloud random_cloud(std::size_t n, std::uint64_t seed, bool positive)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0), uq(-1.0, 1.0);
    ParticleCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        c.positions.push_back({u(rng), u(rng), u(rng)});
        c.weights.push_back(1.0 / n);
        const double q = uq(rng) / n;
        c.charges.push_back(positive ? std::fabs(q) : q);
    }
    return c;
}

BenchReport treecode_bench(const BenchConfig& cfg)
{
    const KernelParams k{cfg.lambda};
    BenchReport rep;
    for (std::size_t n : cfg.sizes) {
        const ParticleCloud c = random_cloud(n, cfg.seed);
        const auto t0 = Clock::now();
        const auto v = evaluate_sum(build_tree(c, cfg.tree), c.positions, k);
        rep.seconds.push_back(seconds_since(t0));
        rep.sizes.push_back(n);
        (void)v;
    }
    if (rep.sizes.size() >= 2) {
        std::vector<double> x(rep.sizes.begin(), rep.sizes.end());
        rep.exponent = loglog_slope(x, rep.seconds);
    }
    if (cfg.accuracy_size > 0) {
        const ParticleCloud c = random_cloud(cfg.accuracy_size, cfg.seed + 1, true);
        const TreecodeResult tc = evaluate(build_tree(c, cfg.tree), c.positions, k, true, true);
        for (std::size_t t = 0; t < c.size(); ++t) {
            double pot = 0.0;
            Vec3 grad;
            for (std::size_t i = 0; i < c.size(); ++i) {
                const Vec3 dx = c.positions[t] - c.positions[i];
                if (dot(dx, dx) == 0.0)
                    continue;
                pot += c.charges[i] * green(norm(dx), k);
                grad += c.charges[i] * green_gradient(dx, k);
            }
            rep.sum_error = std::max(rep.sum_error, std::fabs(tc.potential[t] - pot) / std::fabs(pot));
            const Vec3 g{tc.gradient[3 * t], tc.gradient[3 * t + 1], tc.gradient[3 * t + 2]};
            rep.gradient_error = std::max(rep.gradient_error, norm(g - grad) / norm(grad));
        }
    }
    return rep;
}

} // namespace molt
