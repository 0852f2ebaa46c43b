#include "molt/config.hpp"
#include "molt/errors.hpp"
#include "molt/harness.hpp"
#include "molt/kernels.hpp"
#include "molt/problems.hpp"
#include "molt/stepper.hpp"
#include "molt/treecode.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace molt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> points(const Array& a, const char* what)
{
    if (a.ndim() != 2 || a.shape(1) != 3)
        throw ConfigError(std::string(what) + " must have shape (n, 3)");
    std::vector<Vec3> out(a.shape(0));
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        out[i] = {r(i, 0), r(i, 1), r(i, 2)};
    return out;
}

std::vector<double> values(const Array& a, std::size_t n, const char* what)
{
    if (a.ndim() != 1 || static_cast<std::size_t>(a.shape(0)) != n)
        throw ConfigError(std::string(what) + " must have shape (n,) matching the positions");
    return std::vector<double>(a.data(), a.data() + n);
}

py::array_t<double> to_array(const std::vector<double>& v)
{
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<double> vec_rows(const std::vector<Vec3>& v)
{
    py::array_t<double> out({static_cast<py::ssize_t>(v.size()), py::ssize_t{3}});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < v.size(); ++i)
        for (int c = 0; c < 3; ++c)
            w(i, c) = v[i][c];
    return out;
}

std::string setting_text(const py::handle& v)
{
    if (py::isinstance<py::bool_>(v))
        return v.cast<bool>() ? "true" : "false";
    if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
        std::string s;
        for (const py::handle& e : v)
            s += (s.empty() ? "" : ",") + py::str(e).cast<std::string>();
        return s;
    }
    if (py::isinstance<py::float_>(v))
        return format_number(v.cast<double>());
    return py::str(v).cast<std::string>();
}

void apply_kwargs(RunConfig& c, const py::kwargs& kw)
{
    for (const auto& item : kw)
        apply_setting(c, item.first.cast<std::string>(), setting_text(item.second));
}

py::dict result_dict(const RunResult& r)
{
    py::dict d;
    d["steps"] = r.steps;
    d["h"] = r.h;
    d["dt"] = r.dt;
    d["lambda"] = r.lambda;
    d["panels"] = r.panels;
    py::dict errs;
    for (const QuantityError& q : r.errors)
        errs[py::str(q.name)] = q.error;
    d["errors"] = errs;
    d["divergence_B"] = r.divergence_B;
    d["max_iterations"] = r.max_iterations;
    d["max_residual"] = r.max_residual;
    d["seconds"] = r.seconds;
    py::list its;
    for (const StepStats& s : r.step_stats) {
        py::list l;
        for (const SolveStats& v : s.solves)
            l.append(v.iterations);
        its.append(l);
    }
    d["iterations"] = its;

    std::vector<double> t;
    std::vector<Vec3> w, E, B, ew, eE, eB;
    for (const ProbeSample& s : r.probe) {
        t.push_back(s.t);
        w.push_back(s.w);
        E.push_back(s.E);
        B.push_back(s.B);
        ew.push_back(s.exact.w);
        eE.push_back(s.exact.E);
        eB.push_back(s.exact.B);
    }
    py::dict probe;
    probe["t"] = to_array(t);
    probe["w"] = vec_rows(w);
    probe["E"] = vec_rows(E);
    probe["B"] = vec_rows(B);
    if (!r.probe.empty() && r.probe.front().has_exact) {
        probe["w_exact"] = vec_rows(ew);
        probe["E_exact"] = vec_rows(eE);
        probe["B_exact"] = vec_rows(eB);
    }
    d["probe"] = probe;
    py::list slices;
    for (const Slice& s : r.slices) {
        py::dict sd;
        sd["field"] = s.field;
        sd["t"] = s.t;
        sd["axis"] = s.axis;
        sd["coord"] = s.coord;
        sd["a"] = to_array(s.a);
        sd["b"] = to_array(s.b);
        sd["value"] = to_array(s.value);
        slices.append(sd);
    }
    d["slices"] = slices;
    return d;
}

TreecodeParams tree_params(double theta, int p, std::size_t leaf_capacity)
{
    TreecodeParams tp;
    tp.theta = theta;
    tp.p = p;
    tp.leaf_capacity = leaf_capacity;
    tp.validate();
    return tp;
}

} // namespace

PYBIND11_MODULE(_molt, m)
{
    m.doc() = "Particle MOL^T solver for the rescaled Maxwell equations";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormulationError>(m, "FormulationError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init([](const py::kwargs& kw) {
                 RunConfig c;
                 apply_kwargs(c, kw);
                 return c;
             }),
             "Defaults overridden by config keys, e.g. RunConfig(problem='P2', formulation='silver_muller')")
        .def("set", [](RunConfig& c, const std::string& key, const py::object& v) { apply_setting(c, key, setting_text(v)); })
        .def("validate", &RunConfig::validate)
        .def("to_text", [](const RunConfig& c) { return to_config_text(c); })
        .def_property_readonly("h", &RunConfig::h)
        .def_property_readonly("dt", &RunConfig::dt)
        .def_property_readonly("step_count", &RunConfig::step_count)
        .def_property_readonly("problem", [](const RunConfig& c) { return to_string(c.problem); })
        .def_property_readonly("formulation", [](const RunConfig& c) { return to_string(c.formulation); })
        .def_property_readonly("variant", [](const RunConfig& c) { return to_string(c.variant); })
        .def_readwrite("N", &RunConfig::N)
        .def_readwrite("cfl", &RunConfig::cfl)
        .def_readwrite("epsilon", &RunConfig::epsilon)
        .def_readwrite("t_final", &RunConfig::t_final)
        .def_readwrite("steps", &RunConfig::steps)
        .def_readwrite("output", &RunConfig::output)
        .def("__repr__", [](const RunConfig& c) { return "RunConfig(\n" + to_config_text(c) + ")"; });

    m.def("parse_config", [](const std::string& text) { return parse_config(text); });
    m.def("load_config", [](const std::string& path) { return load_config(path); });

    m.def("green", [](double r, double lambda) { return green(r, {lambda}); }, py::arg("r"), py::arg("lam") = 0.0,
          "G(r) = -exp(-lam r) / (4 pi r)");
    m.def(
        "green_gradient",
        [](std::array<double, 3> dx, double lambda) {
            const Vec3 g = green_gradient({dx[0], dx[1], dx[2]}, {lambda});
            return std::array<double, 3>{g.x, g.y, g.z};
        },
        py::arg("dx"), py::arg("lam") = 0.0);
    m.def("self_term", [](double v, double lambda) { return self_term(v, {lambda}); }, py::arg("cell_volume"),
          py::arg("lam") = 0.0);
    m.def("scheme_lambda", [](double eps, double dt) { return scheme_kernel(eps, dt).lambda; }, py::arg("epsilon"),
          py::arg("dt"));

    m.def(
        "treecode_sum",
        [](const Array& pos, const Array& q, double lambda, std::optional<Array> targets, double theta, int p,
           std::size_t leaf) {
            ParticleCloud c;
            c.positions = points(pos, "positions");
            c.charges = values(q, c.size(), "charges");
            c.weights.assign(c.size(), 1.0);
            const std::vector<Vec3> tg = targets ? points(*targets, "targets") : c.positions;
            py::gil_scoped_release release;
            const auto out = evaluate_sum(build_tree(c, tree_params(theta, p, leaf)), tg, {lambda});
            py::gil_scoped_acquire acquire;
            return to_array(out);
        },
        py::arg("positions"), py::arg("charges"), py::arg("lam") = 0.0, py::arg("targets") = py::none(),
        py::arg("theta") = 0.5, py::arg("p") = 9, py::arg("leaf_capacity") = 64,
        "sum_j q_j G(x_i | y_j) by the treecode; coincident pairs are skipped");
    m.def(
        "direct_sum",
        [](const Array& pos, const Array& q, double lambda, std::optional<Array> targets) {
            const std::vector<Vec3> src = points(pos, "positions");
            const std::vector<double> qs = values(q, src.size(), "charges");
            const std::vector<Vec3> tg = targets ? points(*targets, "targets") : src;
            std::vector<double> out(tg.size(), 0.0);
            for (std::size_t t = 0; t < tg.size(); ++t)
                for (std::size_t j = 0; j < src.size(); ++j) {
                    const Vec3 dx = tg[t] - src[j];
                    if (dot(dx, dx) > 0.0)
                        out[t] += qs[j] * green(norm(dx), {lambda});
                }
            return to_array(out);
        },
        py::arg("positions"), py::arg("charges"), py::arg("lam") = 0.0, py::arg("targets") = py::none());

    m.def(
        "exact_fields",
        [](const std::string& problem, double t, std::array<double, 3> x, double eps) {
            const ProblemSpec p = make_problem(parse_problem(problem), eps);
            const ExactFields f = exact_fields(p, t, {x[0], x[1], x[2]});
            py::dict d;
            d["w"] = std::array<double, 3>{f.w.x, f.w.y, f.w.z};
            d["E"] = std::array<double, 3>{f.E.x, f.E.y, f.E.z};
            d["B"] = std::array<double, 3>{f.B.x, f.B.y, f.B.z};
            return d;
        },
        py::arg("problem"), py::arg("t"), py::arg("x"), py::arg("epsilon") = 1.0);

    m.def(
        "simulate",
        [](const RunConfig& c) {
            RunResult r;
            {
                py::gil_scoped_release release;
                r = simulate(c);
            }
            return result_dict(r);
        },
        py::arg("config"), "run in memory; returns errors, probe series, slices and solver statistics");
    m.def(
        "run",
        [](const RunConfig& c) {
            RunResult r;
            std::vector<std::string> files;
            {
                py::gil_scoped_release release;
                r = simulate(c);
                files = write_outputs(r);
            }
            py::dict d = result_dict(r);
            d["files"] = files;
            return d;
        },
        py::arg("config"), "run and write errors.csv, probe_timeseries.csv, slice files and run_meta.json");
    m.def(
        "convergence",
        [](const RunConfig& c, std::vector<int> Ns, bool write) {
            ConvergenceTable t;
            {
                py::gil_scoped_release release;
                t = convergence(c, Ns, write);
            }
            py::dict d;
            d["quantities"] = t.quantities;
            py::list rows;
            for (const ConvergenceRow& r : t.rows) {
                py::dict rd;
                rd["N"] = r.N;
                rd["h"] = r.h;
                rd["dt"] = r.dt;
                py::dict e;
                for (const QuantityError& q : r.errors)
                    e[py::str(q.name)] = q.error;
                rd["errors"] = e;
                rd["max_iterations"] = r.max_iterations;
                rows.append(rd);
            }
            d["rows"] = rows;
            d["orders"] = t.orders;
            return d;
        },
        py::arg("config"), py::arg("N"), py::arg("write") = false);

    m.def(
        "convergence_order",
        [](std::vector<double> e, std::vector<double> h) { return convergence_order(e, h); }, py::arg("errors"),
        py::arg("h"));
    m.def(
        "error_norm", [](std::vector<std::vector<double>> e, double weight) { return error_norm(e, weight); },
        py::arg("errors"), py::arg("weight"), "max over rows of sum |e| * weight");

    m.def(
        "ap_check",
        [](int N, double cfl, std::vector<double> eps, bool zero_data) {
            ApConfig ac;
            ac.N = N;
            ac.cfl = cfl;
            ac.epsilons = std::move(eps);
            ac.zero_data = zero_data;
            ApReport r;
            {
                py::gil_scoped_release release;
                r = ap_check(ac);
            }
            py::dict d;
            d["epsilons"] = r.epsilons;
            d["discrepancies"] = r.discrepancies;
            d["slope"] = r.slope;
            return d;
        },
        py::arg("N") = 20, py::arg("cfl") = 3.2, py::arg("epsilons") = std::vector<double>{1e-2, 1e-3, 1e-4},
        py::arg("zero_data") = false);

    m.def(
        "treecode_bench",
        [](std::vector<std::size_t> sizes, std::size_t accuracy_size, double lambda, std::uint64_t seed) {
            BenchConfig bc;
            bc.sizes = std::move(sizes);
            bc.accuracy_size = accuracy_size;
            bc.lambda = lambda;
            bc.seed = seed;
            BenchReport r;
            {
                py::gil_scoped_release release;
                r = treecode_bench(bc);
            }
            py::dict d;
            d["sizes"] = r.sizes;
            d["seconds"] = r.seconds;
            d["exponent"] = r.exponent;
            d["sum_error"] = r.sum_error;
            d["gradient_error"] = r.gradient_error;
            return d;
        },
        py::arg("sizes") = std::vector<std::size_t>{1000, 8000, 64000}, py::arg("accuracy_size") = 2000,
        py::arg("lam") = 2.0, py::arg("seed") = 7);
}
