#include "doctest.h"

#include "molt/config.hpp"
#include "molt/errors.hpp"
#include "molt/harness.hpp"

#include <clocale>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace molt;

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("molt_test_harness_" + name);
    std::filesystem::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("config parsing and round trip")
{
    const RunConfig c = parse_config("# comment\n"
                                     "problem = P2   # trailing\n"
                                     "formulation = silver_muller\n"
                                     "N = 12\n"
                                     "cfl = 4.9\n"
                                     "t_final = 1.5\n"
                                     "theta = 0.4\n"
                                     "order = 7\n"
                                     "gmres_max_iter = 900\n"
                                     "probe = 0.25, 0.5, 0.75\n"
                                     "slice_field = E1\n"
                                     "slice_coord = 0.51\n"
                                     "slice_times = 0.5, 1.0\n"
                                     "\n");
    CHECK(c.problem == ProblemId::P2);
    CHECK(c.formulation == Formulation::SilverMuller);
    CHECK(c.N == 12);
    CHECK(c.tree.theta == 0.4);
    CHECK(c.tree.p == 7);
    CHECK(c.gmres.max_iter == 900);
    CHECK(c.probe.z == 0.75);
    CHECK(c.slice_times.size() == 2);
    CHECK_NOTHROW(c.validate());
    CHECK(c.step_count() == 3);

    const RunConfig back = parse_config(to_config_text(c));
    CHECK(to_config_text(back) == to_config_text(c));
    CHECK(back.cfl == c.cfl);
    CHECK(back.slice_coord == c.slice_coord);

    CHECK_THROWS_AS(parse_config("colour = red\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("N = twelve\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("cfl = 1.5x\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("N 12\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("probe = 0.5, 0.5\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/molt.cfg"), ConfigError);
    CHECK(config_keys().size() == 22);
}

TEST_CASE("config validation")
{
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    auto bad = [](auto edit) {
        RunConfig x;
        edit(x);
        return x;
    };
    CHECK_THROWS_AS(bad([](RunConfig& x) { x.N = 2; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& x) { x.cfl = 0.0; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& x) { x.t_final = 0.01; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& x) { x.problem = ProblemId::P2; }).validate(), FormulationError);
    CHECK_THROWS_AS(bad([](RunConfig& x) { x.formulation = Formulation::SilverMuller; }).validate(), FormulationError);
    CHECK_THROWS_AS(bad([](RunConfig& x) {
                        x.problem = ProblemId::P2;
                        x.formulation = Formulation::SilverMuller;
                        x.variant = Variant::Dispersive;
                    }).validate(),
                    FormulationError);
    CHECK_THROWS_AS(bad([](RunConfig& x) {
                        x.problem = ProblemId::P3;
                        x.formulation = Formulation::SilverMuller;
                        x.N = 31;
                    }).validate(),
                    ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& x) { x.probe = {0.5, 1.0, 0.5}; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& x) { x.slice_field = "Q1"; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& x) {
                        x.slice_field = "B1";
                        x.slice_coord = 0.001;
                    }).validate(),
                    ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& x) { x.tree.p = 21; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](RunConfig& x) { x.gmres.tol = 0.0; }).validate(), ConfigError);
}

TEST_CASE("number formatting")
{
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 0.0}) {
        const std::string s = format_number(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(format_number(0.1) == "0.10000000000000001");
    // independent of the C locale
    const char* old = std::setlocale(LC_NUMERIC, nullptr);
    const std::string saved = old ? old : "C";
    if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8"))
        CHECK(format_number(0.5) == "0.5");
    std::setlocale(LC_NUMERIC, saved.c_str());
}

TEST_CASE("error norm")
{
    const int n = 10;
    const double w = 1.0 / (n * n * n);
    CHECK(error_norm({std::vector<double>(n * n * n, 0.37)}, w) == doctest::Approx(0.37).epsilon(1e-14));
    CHECK(error_norm({std::vector<double>(n * n * n, 0.0)}, w) == 0.0);
    CHECK(error_norm({std::vector<double>(n * n * n, -0.2), std::vector<double>(n * n * n, 0.1)}, w) ==
          doctest::Approx(0.2).epsilon(1e-14));
    CHECK(error_norm({}, w) == 0.0);
    const std::vector<double> a{1.0, -2.0, 3.0}, b{1.5, -2.0, 2.0};
    CHECK(l1_difference(a, b, 0.5) == doctest::Approx(0.75));
    CHECK_THROWS_AS(l1_difference(a, std::vector<double>{1.0}, 1.0), ConfigError);
}

TEST_CASE("convergence order")
{
    const std::vector<double> h{0.1, 0.05};
    CHECK(convergence_order(std::vector<double>{4e-3, 1e-3}, h)[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(convergence_order(std::vector<double>{1e-3, 1e-3}, h)[0] == 0.0);
    // published rows at N = 40 and 50 for w1
    const std::vector<double> e{1.96e-2, 1.23e-2}, hh{1.0 / 40, 1.0 / 50};
    CHECK(convergence_order(e, hh)[0] == doctest::Approx(2.08).epsilon(5e-3));
    CHECK_THROWS_AS(convergence_order(std::vector<double>{1.0}, std::vector<double>{1.0}), ConfigError);
    const std::vector<double> x{1.0, 10.0, 100.0}, y{3.0, 0.3, 0.03};
    CHECK(loglog_slope(x, y) == doctest::Approx(-1.0).epsilon(1e-13));
}

TEST_CASE("slice extraction and probe interpolation are exact for linear fields")
{
    const ParticleGrid g(8);
    std::vector<double> f(3 * g.size());
    auto lin = [](const Vec3& x) { return Vec3{1.0 + 2.0 * x.x - x.y, 0.5 * x.z, x.x + x.y + x.z}; };
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 v = lin(g.positions()[i]);
        f[3 * i] = v.x;
        f[3 * i + 1] = v.y;
        f[3 * i + 2] = v.z;
    }
    for (const Vec3& p : {Vec3{0.3, 0.41, 0.77}, Vec3{0.0625, 0.5, 0.9375}, Vec3{0.5, 0.5, 0.5}}) {
        const Vec3 v = interpolate(g, f, p), e = lin(p);
        for (int c = 0; c < 3; ++c)
            CHECK(v[c] == doctest::Approx(e[c]).epsilon(1e-13));
    }
    for (int axis : {1, 2, 3})
        for (double coord : {0.51, 0.0625, 0.2}) {
            const Slice s = extract_slice(g, f, 0, axis, coord);
            REQUIRE(s.value.size() == 64);
            for (std::size_t i = 0; i < s.value.size(); ++i) {
                Vec3 x;
                const int a = axis - 1;
                int fb = (a + 1) % 3, fc = (a + 2) % 3;
                if (fb > fc)
                    std::swap(fb, fc);
                x[a] = coord;
                x[fb] = s.a[i];
                x[fc] = s.b[i];
                CHECK(s.value[i] == doctest::Approx(lin(x).x).epsilon(1e-13));
            }
        }
    CHECK_THROWS_AS(extract_slice(g, f, 0, 4, 0.5), ConfigError);
    CHECK_THROWS_AS(extract_slice(g, f, 0, 1, 0.01), DomainError);
}

TEST_CASE("table checks")
{
    RunConfig cfg;
    const ReferenceTable ref = reference_table(cfg);
    REQUIRE(ref.rows.size() == 3);
    CHECK(ref.rows[0].w == 3.06e-2);
    RunConfig other = cfg;
    other.cfl = 3.0;
    CHECK(reference_table(other).rows.empty());

    ConvergenceTable t;
    t.quantities = {"w1", "E1", "B1"};
    for (const ReferenceRow& r : ref.rows)
        t.rows.push_back({r.N, 1.0 / r.N, 3.2 / r.N, {{"w1", r.w}, {"E1", r.E}, {"B1", r.B}}, 12, 0.0});
    auto checks = check_table(cfg, t);
    CHECK(checks.size() == 9 + 3 + 1);
    for (const Check& c : checks)
        CHECK_MESSAGE(c.pass, c.name << ": " << c.detail);

    t.rows[2].errors[1].error *= 1.6; // outside the band and the order drops
    t.rows[0].max_iterations = 31;
    int failed = 0;
    for (const Check& c : check_table(cfg, t))
        failed += !c.pass;
    CHECK(failed == 3);
}

TEST_CASE("ap check trivial cases")
{
    ApConfig ac;
    ac.N = 6;
    const auto a = ap_step(ac, 1e-3, false), b = ap_step(ac, 1e-3, false);
    CHECK(l1_difference(a, b, 1.0) == 0.0);

    ac.zero_data = true;
    const ApReport z = ap_check(ac);
    for (double d : z.discrepancies)
        CHECK(d == 0.0);
}

TEST_CASE("ap slope on a small grid")
{
    ApConfig ac;
    ac.N = 8;
    const ApReport r = ap_check(ac);
    REQUIRE(r.discrepancies.size() == 3);
    CHECK(r.discrepancies[0] > r.discrepancies[1]);
    CHECK(r.discrepancies[1] > r.discrepancies[2]);
    CHECK(r.slope >= 0.9);
}

TEST_CASE("treecode bench small")
{
    BenchConfig bc;
    bc.sizes = {500, 2000};
    bc.accuracy_size = 400;
    const BenchReport r = treecode_bench(bc);
    REQUIRE(r.seconds.size() == 2);
    CHECK(std::isfinite(r.exponent));
    CHECK(r.sum_error < 1e-4);
    CHECK(r.gradient_error < 1e-3);
    const ParticleCloud c1 = random_cloud(50, 3), c2 = random_cloud(50, 3);
    CHECK(c1.positions[17].y == c2.positions[17].y);
    CHECK(c1.charges[9] == c2.charges[9]);
}

TEST_CASE("run outputs, metadata and determinism")
{
    RunConfig cfg;
    cfg.N = 8;
    cfg.t_final = 0.8;
    cfg.slice_field = "E1";
    cfg.slice_coord = 0.51;
    cfg.slice_times = {0.4, 0.8};
    const auto d1 = scratch("a"), d2 = scratch("b");
    cfg.output = d1.string();
    const RunResult r = run(cfg);
    CHECK(r.steps == 2);
    CHECK(r.probe.size() == 3);
    CHECK(r.slices.size() == 2);
    REQUIRE(r.errors.size() == 3);
    CHECK(r.errors[0].name == "w1");
    CHECK(r.errors[2].name == "B1");
    for (const QuantityError& q : r.errors)
        CHECK(std::isfinite(q.error));
    CHECK(std::fabs(r.divergence_B) < 1e-12);
    CHECK(r.max_iterations > 0);

    for (const char* f : {"errors.csv", "probe_timeseries.csv", "run_meta.json"})
        CHECK(std::filesystem::exists(d1 / f));
    const std::string errs = slurp(d1 / "errors.csv");
    CHECK(errs.rfind("quantity,N,h,dt,error,order\n", 0) == 0);
    int slices = 0;
    for (const auto& e : std::filesystem::directory_iterator(d1))
        if (e.path().filename().string().rfind("slice_E1_x1_0.51_t", 0) == 0) {
            ++slices;
            CHECK(slurp(e.path()).rfind("x2,x3,E1@x1=0.51000000000000001\n", 0) == 0);
        }
    CHECK(slices == 2);

    // run_meta carries the configuration text, which reproduces the run
    const std::string meta = slurp(d1 / "run_meta.json");
    CHECK(meta.find("\"config_text\"") != std::string::npos);
    CHECK(meta.find("\"iterations\"") != std::string::npos);

    cfg.output = d2.string();
    run(cfg);
    for (const auto& e : std::filesystem::directory_iterator(d1)) {
        const std::string name = e.path().filename().string();
        if (name.size() > 4 && name.substr(name.size() - 4) == ".csv")
            CHECK_MESSAGE(slurp(e.path()) == slurp(d2 / name), name);
    }
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST_CASE("convergence sweep")
{
    RunConfig cfg;
    cfg.t_final = 0.6;
    cfg.output = scratch("conv").string();
    const std::vector<int> Ns{6, 8};
    const ConvergenceTable t = convergence(cfg, Ns, true);
    REQUIRE(t.rows.size() == 2);
    REQUIRE(t.orders.size() == 3);
    CHECK(t.orders[0].size() == 1);
    const double expect = std::log(t.rows[0].errors[0].error / t.rows[1].errors[0].error) / std::log(8.0 / 6.0);
    CHECK(t.orders[0][0] == doctest::Approx(expect).epsilon(1e-14));
    const std::string csv = slurp(std::filesystem::path(cfg.output) / "errors.csv");
    CHECK(csv.find("w1,8,0.125,") != std::string::npos);
    CHECK(std::filesystem::exists(std::filesystem::path(cfg.output) / "N6" / "run_meta.json"));
    std::filesystem::remove_all(cfg.output);

    RunConfig p3 = cfg;
    p3.problem = ProblemId::P3;
    p3.formulation = Formulation::SilverMuller;
    CHECK_THROWS_AS(convergence(p3, Ns, false), FormulationError);
    CHECK_THROWS_AS(convergence(cfg, std::vector<int>{8}, false), ConfigError);
}
