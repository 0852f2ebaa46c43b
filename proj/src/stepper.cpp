#include "molt/stepper.hpp"

#include "molt/errors.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace molt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec3 load3(std::span<const double> v, std::size_t i) { return {v[3 * i], v[3 * i + 1], v[3 * i + 2]}; }

void store3(std::span<double> v, std::size_t i, const Vec3& a)
{
    v[3 * i] = a.x;
    v[3 * i + 1] = a.y;
    v[3 * i + 2] = a.z;
}

Vec3 eval_or_zero(const std::function<Vec3(const Vec3&)>& f, const Vec3& x) { return f ? f(x) : Vec3{}; }

// Fourth-order central differences of a closure, step 1e-3.
template <class F>
Vec3 fd_partial(const F& f, const Vec3& x, int axis)
{
    const double h = 1e-3;
    auto at = [&](double s) {
        Vec3 y = x;
        y[axis] += s;
        return f(y);
    };
    return (at(-2 * h) - at(2 * h) + (at(h) - at(-h)) * 8.0) * (1.0 / (12.0 * h));
}

template <class F>
Vec3 fd_curl(const F& f, const Vec3& x)
{
    const Vec3 d0 = fd_partial(f, x, 0), d1 = fd_partial(f, x, 1), d2 = fd_partial(f, x, 2);
    return {d1.z - d2.y, d2.x - d0.z, d0.y - d1.x};
}

template <class F>
double fd_div(const F& f, const Vec3& x)
{
    return fd_partial(f, x, 0).x + fd_partial(f, x, 1).y + fd_partial(f, x, 2).z;
}

void check_len(std::size_t got, std::size_t want, const char* what)
{
    if (got != want)
        throw ConfigError(std::string("set_history: ") + what + " has the wrong size");
}

} // namespace

std::string to_string(Variant v) { return v == Variant::Dissipative ? "dissipative" : "dispersive"; }

std::string to_string(Formulation f)
{
    switch (f) {
    case Formulation::Direct:
        return "direct";
    case Formulation::IndirectV1:
        return "indirect_v1";
    case Formulation::IndirectV2:
        return "indirect_v2";
    case Formulation::SilverMuller:
        return "silver_muller";
    }
    return "?";
}

Variant parse_variant(const std::string& s)
{
    if (s == "dissipative")
        return Variant::Dissipative;
    if (s == "dispersive")
        return Variant::Dispersive;
    throw ConfigError("unknown variant '" + s + "'");
}

Formulation parse_formulation(const std::string& s)
{
    for (Formulation f :
         {Formulation::Direct, Formulation::IndirectV1, Formulation::IndirectV2, Formulation::SilverMuller})
        if (s == to_string(f))
            return f;
    throw ConfigError("unknown formulation '" + s + "'");
}

KernelParams scheme_kernel(double epsilon, double dt)
{
    if (!(epsilon > 0.0) || !(dt > 0.0))
        throw ConfigError("scheme: epsilon and dt must be positive");
    return {std::sqrt(2.0) * epsilon / dt};
}

std::vector<double> neumann_boundary_data(std::span<const double> d_n, std::span<const double> d_nm1,
                                          std::span<const double> rho_next, double dt)
{
    if (d_nm1.size() != d_n.size() || rho_next.size() != d_n.size())
        throw ConfigError("neumann_boundary_data: size mismatch");
    std::vector<double> out(d_n.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (2.0 / 3.0) * dt * rho_next[i] + (4.0 / 3.0) * d_n[i] - (1.0 / 3.0) * d_nm1[i];
    return out;
}

std::vector<double> reconstruct_E(std::span<const double> w_np1, std::span<const double> w_n,
                                  std::span<const double> w_nm1, double dt)
{
    if (w_n.size() != w_np1.size() || w_nm1.size() != w_np1.size())
        throw ConfigError("reconstruct_E: size mismatch");
    std::vector<double> E(w_np1.size());
    for (std::size_t i = 0; i < E.size(); ++i)
        E[i] = (1.5 * w_np1[i] - 2.0 * w_n[i] + 0.5 * w_nm1[i]) / dt;
    return E;
}

std::vector<double> reconstruct_B(const ParticleGrid& grid, std::span<const double> w, std::span<const double> B0,
                                  double epsilon)
{
    const std::size_t n = 3 * grid.size();
    if (w.size() < n || B0.size() != n)
        throw ConfigError("reconstruct_B: size mismatch");
    std::vector<double> B = grid_curl(grid, w.first(n));
    for (std::size_t i = 0; i < n; ++i)
        B[i] = -B[i] / epsilon + B0[i];
    return B;
}

struct Stepper::Impl {
    Impl(const PanelMesh& mesh, const ParticleGrid& grid, const StepperOptions& opts, const KernelParams& kernel)
        : bi(mesh, kernel, opts.storage),
          eval(mesh, opts.tree, opts.rep_order),
          tree(std::span<const Vec3>(grid.positions()), opts.tree)
    {
    }

    BoundaryInteractions bi;
    LayerPotentialEvaluator eval;
    ClusterTree tree;
    // line current integrals at targets and panel centres
    std::vector<LineIntegral> line_targets, line_centres;
};

Stepper::Stepper(const ProblemSpec& problem, const ParticleGrid& grid, const StepperOptions& opts,
                 std::vector<Vec3> extra_targets)
    : problem_(problem), grid_(grid), opts_(opts)
{
    if (!(problem_.epsilon > 0.0))
        throw ConfigError("stepper: epsilon must be positive");
    if (!(opts_.dt > 0.0) || !std::isfinite(opts_.dt))
        throw ConfigError("stepper: dt must be positive");
    if (opts_.rep_order < 1)
        throw ConfigError("stepper: rep_order must be positive");
    opts_.tree.validate();

    bool has_sm = false;
    for (FaceBc b : problem_.tags)
        has_sm = has_sm || b == FaceBc::SilverMuller;
    if (has_sm && opts_.formulation != Formulation::SilverMuller)
        throw FormulationError("stepper: Silver-Mueller faces need the silver_muller formulation");
    if (!has_sm && opts_.formulation == Formulation::SilverMuller)
        throw FormulationError("stepper: silver_muller formulation without Silver-Mueller faces");
    if (has_sm && opts_.variant == Variant::Dispersive)
        throw FormulationError("stepper: the dispersive scheme supports PEC boundaries only");
    if (has_sm && opts_.formal_limit)
        throw FormulationError("stepper: the formal limit is defined for PEC boundaries only");
    if (problem_.line_current && grid_.n() % 2 != 0)
        throw ConfigError("stepper: the line-current problem needs an even number of particles per direction");

    kernel_ = opts_.formal_limit ? KernelParams{0.0} : scheme_kernel(problem_.epsilon, opts_.dt);
    const int per_face = opts_.panels_per_face > 0 ? opts_.panels_per_face : grid_.n();
    mesh_ = panelize_box(grid_.box(), per_face, problem_.tags);

    const Box& box = grid_.box();
    for (const Vec3& x : extra_targets)
        for (int a = 0; a < 3; ++a)
            if (!(x[a] > box.lo[a] && x[a] < box.hi[a]))
                throw DomainError("stepper: extra targets must lie strictly inside the domain");
    targets_ = grid_.positions();
    targets_.insert(targets_.end(), extra_targets.begin(), extra_targets.end());
    for (const Panel& p : mesh_.panels)
        centres_.push_back(p.center);

    impl_ = std::make_unique<Impl>(mesh_, grid_, opts_, kernel_);
    if (problem_.line_current && !opts_.formal_limit) {
        for (const Vec3& x : targets_)
            impl_->line_targets.push_back(line_integral(x, kernel_));
        for (const Vec3& x : centres_)
            impl_->line_centres.push_back(line_integral(x, kernel_));
    }
    hist_ = startup_history();
}

Stepper::~Stepper() = default;

std::vector<double> Stepper::volume_source(std::span<const double> S, double t) const
{
    const std::size_t P = grid_.size();
    if (S.size() != P)
        throw ConfigError("volume_source: S has the wrong size");
    std::vector<double> T = grid_gradient(grid_, S);
    for (double& v : T)
        v = -v;
    if (opts_.formal_limit)
        return T;
    const double eps = problem_.epsilon;
    if (problem_.B0) {
        std::vector<double> b0(3 * P);
        for (std::size_t i = 0; i < P; ++i)
            store3(b0, i, problem_.B0(grid_.positions()[i]));
        const std::vector<double> c = grid_curl(grid_, b0);
        for (std::size_t i = 0; i < 3 * P; ++i)
            T[i] += eps * c[i];
    }
    if (problem_.J)
        for (std::size_t i = 0; i < P; ++i) {
            const Vec3 j = problem_.J(t, grid_.positions()[i]);
            for (int k = 0; k < 3; ++k)
                T[3 * i + k] -= eps * j[k];
        }
    return T;
}

FieldHistory Stepper::startup_history() const
{
    const std::size_t P = grid_.size(), NT = targets_.size(), M = mesh_.size();
    const double dt = opts_.dt, eps = problem_.epsilon;
    FieldHistory h;
    h.S.assign(P, 0.0);
    h.rho.assign(P, 0.0);
    std::vector<double> rho_prev(P, 0.0);
    if (problem_.rho)
        for (std::size_t i = 0; i < P; ++i) {
            h.rho[i] = problem_.rho(0.0, grid_.positions()[i]);
            rho_prev[i] = problem_.rho(-dt, grid_.positions()[i]);
        }
    h.B0.resize(3 * P);
    for (std::size_t i = 0; i < P; ++i)
        store3(h.B0, i, eval_or_zero(problem_.B0, grid_.positions()[i]));
    h.B = h.B0;

    h.T[0] = volume_source(h.S, 0.0);
    std::vector<double> S_prev(P);
    for (std::size_t i = 0; i < P; ++i)
        S_prev[i] = -0.5 * dt * (h.rho[i] + rho_prev[i]);
    h.T[1] = volume_source(S_prev, -dt);

    // T(0) away from the particles, from the closures (S(0) = 0).
    auto source0 = [&](const Vec3& x) {
        Vec3 T;
        if (opts_.formal_limit)
            return T;
        if (problem_.B0)
            T += fd_curl(problem_.B0, x) * eps;
        if (problem_.J)
            T -= problem_.J(0.0, x) * eps;
        return T;
    };

    for (auto& level : h.w)
        level.assign(3 * NT, 0.0);
    h.E.assign(3 * NT, 0.0);
    for (std::size_t i = 0; i < NT; ++i) {
        const Vec3 e0 = eval_or_zero(problem_.E0, targets_[i]);
        const Vec3 T0 = i < P ? load3(h.T[0], i) : source0(targets_[i]);
        store3(h.E, i, e0);
        for (int m = 1; m <= 2; ++m) {
            const double s = m * dt;
            store3(h.w[m], i, e0 * (-s) + T0 * (0.5 * s * s / (eps * eps)));
        }
    }

    h.trace[0].assign(3 * M, 0.0);
    h.trace[1].assign(3 * M, 0.0);
    h.div[0].assign(M, 0.0);
    h.div[1].assign(M, 0.0);
    for (std::size_t j = 0; j < M; ++j) {
        const Vec3& c = centres_[j];
        const Vec3 e0 = eval_or_zero(problem_.E0, c);
        store3(h.trace[1], j, e0 * (-dt) + source0(c) * (0.5 * dt * dt / (eps * eps)));
        // div w(-dt) = -dt div E0 + dt^2 / (2 eps^2) div T(0), div T(0) = -eps div J(0)
        double d = problem_.E0 ? -dt * fd_div(problem_.E0, c) : 0.0;
        if (problem_.J && !opts_.formal_limit)
            d -= 0.5 * dt * dt / eps * fd_div([&](const Vec3& y) { return problem_.J(0.0, y); }, c);
        h.div[1][j] = d;
    }
    return h;
}

void Stepper::set_history(FieldHistory h)
{
    const std::size_t P = grid_.size(), NT = targets_.size(), M = mesh_.size();
    for (const auto& level : h.w)
        check_len(level.size(), 3 * NT, "w");
    check_len(h.E.size(), 3 * NT, "E");
    check_len(h.B.size(), 3 * P, "B");
    check_len(h.B0.size(), 3 * P, "B0");
    check_len(h.S.size(), P, "S");
    check_len(h.rho.size(), P, "rho");
    for (const auto& T : h.T)
        check_len(T.size(), 3 * P, "T");
    for (const auto& tr : h.trace)
        check_len(tr.size(), 3 * M, "trace");
    for (const auto& d : h.div)
        check_len(d.size(), M, "div");
    hist_ = std::move(h);
}

StepStats Stepper::step()
{
    const auto start = std::chrono::steady_clock::now();
    const std::size_t P = grid_.size(), NT = targets_.size(), M = mesh_.size();
    const double dt = opts_.dt, eps = problem_.epsilon;
    const bool dispersive = opts_.variant == Variant::Dispersive;
    const bool limit = opts_.formal_limit;
    FieldHistory& h = hist_;
    const double t1 = h.t + dt;
    StepStats stats;
    stats.t = t1;

    // charge integral and volume source at t^{n+1}
    std::vector<double> rho1(P, 0.0), S1 = h.S;
    if (problem_.rho)
        for (std::size_t i = 0; i < P; ++i) {
            rho1[i] = problem_.rho(t1, grid_.positions()[i]);
            S1[i] += 0.5 * dt * (h.rho[i] + rho1[i]);
        }
    std::vector<double> T1 = volume_source(S1, t1);

    // per-particle density f; charges q = h^3 f
    std::vector<double> f(3 * P);
    const double c2 = eps * eps / (dt * dt);
    for (std::size_t i = 0; i < 3 * P; ++i) {
        if (limit)
            f[i] = T1[i];
        else if (dispersive)
            f[i] = 4.0 * c2 * h.w[0][i] + h.T[1][i] + T1[i];
        else
            f[i] = c2 * (5.0 * h.w[0][i] - 4.0 * h.w[1][i] + h.w[2][i]) + T1[i];
    }
    std::vector<double> q(f);
    const double wgt = grid_.weight();
    for (double& v : q)
        v *= wgt;
    impl_->tree.set_sources(q, {}, 3);

    const bool need_grad = opts_.formulation != Formulation::Direct;
    std::vector<double> Phi = evaluate(impl_->tree, targets_, kernel_, true, false).potential;
    TreecodeResult at_c = evaluate(impl_->tree, centres_, kernel_, true, need_grad);
    std::vector<double>& Phi_c = at_c.potential;
    std::vector<double>& grad_c = at_c.gradient;
    const double self = self_term(wgt, kernel_);
    for (std::size_t i = 0; i < 3 * P; ++i)
        Phi[i] += self * f[i];

    if (!impl_->line_targets.empty()) {
        // the bar carries J_3 = cos(2 pi t); its source is -eps J
        double a = std::cos(kTwoPi * t1);
        if (dispersive)
            a += std::cos(kTwoPi * (h.t - dt));
        a *= -eps;
        for (std::size_t i = 0; i < NT; ++i)
            Phi[3 * i + 2] += a * impl_->line_targets[i].value;
        for (std::size_t j = 0; j < M; ++j) {
            Phi_c[3 * j + 2] += a * impl_->line_centres[j].value;
            if (need_grad)
                for (int m = 0; m < 3; ++m)
                    grad_c[(3 * j + 2) * 3 + m] += a * impl_->line_centres[j].gradient[m];
        }
    }

    auto lap = [clock = std::chrono::steady_clock::now()]() mutable {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - clock).count();
        clock = now;
        return s;
    };
    stats.seconds_volume = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    // divergence data on the boundary
    std::vector<double> rho_c(M, 0.0);
    if (problem_.rho)
        for (std::size_t j = 0; j < M; ++j)
            rho_c[j] = problem_.rho(t1, centres_[j]);
    std::vector<double> div1 = neumann_boundary_data(h.div[0], h.div[1], rho_c, dt);
    std::vector<double> div_data = div1;
    if (dispersive)
        for (std::size_t j = 0; j < M; ++j)
            div_data[j] += h.div[1][j];

    auto solve = [&](const BoundarySystem& sys) {
        GmresResult r = gmres_solve(sys.op, sys.rhs, opts_.gmres);
        stats.solves.push_back({r.iterations, r.residual});
        return std::move(r.x);
    };
    auto grad = [&](std::size_t j, int comp, int m) { return grad_c[(3 * j + comp) * 3 + m]; };

    LayerDensities dens;
    std::vector<double> phi_k(M), extra_k(M);
    switch (opts_.formulation) {
    case Formulation::Direct:
    case Formulation::IndirectV1: {
        std::vector<double> sol(3 * M), neumann(3 * M);
        for (int k = 0; k < 3; ++k) {
            for (std::size_t j = 0; j < M; ++j) {
                const Vec3& n = mesh_[j].normal;
                phi_k[j] = Phi_c[3 * j + k];
                // on a flat PEC face with normal e_k, div w = n_k dw_k/dn
                neumann[k * M + j] = n[k] * div_data[j];
                if (opts_.formulation == Formulation::IndirectV1)
                    extra_k[j] = n.x * grad(j, k, 0) + n.y * grad(j, k, 1) + n.z * grad(j, k, 2);
            }
            const std::span<const double> nk(&neumann[k * M], M);
            const BoundarySystem sys = opts_.formulation == Formulation::Direct
                                           ? assemble_direct(impl_->bi, k, phi_k, nk)
                                           : assemble_indirect_v1(impl_->bi, k, phi_k, extra_k, nk);
            const std::vector<double> x = solve(sys);
            std::copy(x.begin(), x.end(), sol.begin() + k * M);
        }
        dens = opts_.formulation == Formulation::Direct ? densities_direct(mesh_, sol, neumann)
                                                        : densities_from_components(sol, M);
        break;
    }
    case Formulation::IndirectV2:
    case Formulation::SilverMuller: {
        std::vector<double> div_rhs(M);
        for (std::size_t j = 0; j < M; ++j)
            div_rhs[j] = grad(j, 0, 0) + grad(j, 1, 1) + grad(j, 2, 2) + div_data[j];
        if (opts_.formulation == Formulation::IndirectV2) {
            dens.single = solve(assemble_indirect_v2(impl_->bi, Phi_c, div_rhs));
            break;
        }
        std::vector<double> curl(3 * M), R(3 * M, 0.0);
        for (std::size_t j = 0; j < M; ++j) {
            store3(curl, j,
                   {grad(j, 2, 1) - grad(j, 1, 2), grad(j, 0, 2) - grad(j, 2, 0), grad(j, 1, 0) - grad(j, 0, 1)});
            const Panel& p = mesh_[j];
            if (p.bc != FaceBc::SilverMuller)
                continue;
            Vec3 r = cross(eval_or_zero(problem_.B0, p.center), p.normal) * dt;
            if (problem_.g)
                r += boundary_data_g(problem_, t1, p.center) * dt;
            r += load3(h.trace[0], j) * 2.0 - load3(h.trace[1], j) * 0.5;
            store3(R, j, r);
        }
        dens.single = solve(assemble_silver_muller(impl_->bi, {dt, eps}, Phi_c, curl, div_rhs, R));
        break;
    }
    }

    stats.seconds_solve = lap();
    std::vector<double> w1 = evaluate_representation(impl_->eval, dens, Phi, targets_, kernel_);
    if (dispersive)
        for (std::size_t i = 0; i < 3 * NT; ++i)
            w1[i] -= h.w[1][i];
    if (opts_.formulation == Formulation::SilverMuller) {
        h.trace[1] = std::move(h.trace[0]);
        h.trace[0] = boundary_trace(impl_->bi, dens, Phi_c);
    }

    stats.seconds_layers = lap();
    h.E = reconstruct_E(w1, h.w[0], h.w[1], dt);
    h.B = reconstruct_B(grid_, w1, h.B0, eps);
    h.w[2] = std::move(h.w[1]);
    h.w[1] = std::move(h.w[0]);
    h.w[0] = std::move(w1);
    h.T[1] = std::move(h.T[0]);
    h.T[0] = std::move(T1);
    h.div[1] = std::move(h.div[0]);
    h.div[0] = std::move(div1);
    h.S = std::move(S1);
    h.rho = std::move(rho1);
    h.t = t1;
    ++h.step;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return stats;
}

} // namespace molt
