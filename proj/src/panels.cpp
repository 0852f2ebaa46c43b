#include "molt/panels.hpp"

#include "molt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace molt {

namespace {

constexpr double kInvFourPi = 0.25 / std::numbers::pi;

// G and grad_x G at displacement dx = x - y, both accumulated with weight w.
inline void accumulate(const Vec3& dx, double w, double lambda, LayerIntegrals& acc)
{
    const double r2 = dot(dx, dx);
    const double r = std::sqrt(r2);
    const double lr = lambda * r;
    if (lr > kUnderflowArgument)
        return;
    const double e = lambda == 0.0 ? 1.0 : std::exp(-lr);
    const double g = -e * kInvFourPi / r;
    const double dg = e * (1.0 + lr) * kInvFourPi / (r2 * r); // g'(r) / r
    acc.single += w * g;
    acc.gradient += dx * (w * dg);
}

struct Rect {
    Vec3 origin, u, v;
};

double distance_to_rect(const Vec3& x, const Rect& r)
{
    const Vec3 d = x - r.origin;
    const double s = std::clamp(dot(d, r.u) / dot(r.u, r.u), 0.0, 1.0);
    const double t = std::clamp(dot(d, r.v) / dot(r.v, r.v), 0.0, 1.0);
    return norm(d - r.u * s - r.v * t);
}

void gauss_rect(const Vec3& x, const Rect& r, double lambda, int order, LayerIntegrals& acc)
{
    const GaussRule& g = gauss_legendre(order);
    const double area = norm(cross(r.u, r.v));
    for (int i = 0; i < order; ++i) {
        const Vec3 yu = r.origin + r.u * g.nodes[i];
        for (int j = 0; j < order; ++j)
            accumulate(x - (yu + r.v * g.nodes[j]), area * g.weights[i] * g.weights[j], lambda, acc);
    }
}

void adaptive_rect(const Vec3& x, const Rect& r, double lambda, const QuadratureOptions& opts,
                   int depth, LayerIntegrals& acc)
{
    const double diam = norm(r.u + r.v);
    if (depth >= opts.max_depth || distance_to_rect(x, r) >= opts.near_ratio * diam) {
        gauss_rect(x, r, lambda, opts.order, acc);
        return;
    }
    const Vec3 hu = r.u * 0.5, hv = r.v * 0.5;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            adaptive_rect(x, {r.origin + hu * a + hv * b, hu, hv}, lambda, opts, depth + 1, acc);
}

// Integral of G over the triangle (x, p1, p2) with the singular vertex at x:
// y = x + xi (p1 - x + eta (p2 - p1)), Jacobian xi |(p1 - x) x (p2 - p1)|.
double duffy_triangle(const Vec3& x, const Vec3& p1, const Vec3& p2, double lambda, int order)
{
    const Vec3 a = p1 - x, b = p2 - p1;
    const double jac = norm(cross(a, b));
    if (jac == 0.0)
        return 0.0;
    const GaussRule& g = gauss_legendre(order);
    double sum = 0.0;
    for (int j = 0; j < order; ++j) {
        const double rho = norm(a + b * g.nodes[j]);
        double inner = 0.0;
        if (lambda == 0.0) {
            inner = 1.0;
        } else {
            for (int i = 0; i < order; ++i) {
                const double lr = lambda * g.nodes[i] * rho;
                if (lr <= kUnderflowArgument)
                    inner += g.weights[i] * std::exp(-lr);
            }
        }
        // G * xi = -exp(-lambda xi rho) / (4 pi rho)
        sum += g.weights[j] * inner / rho;
    }
    return -kInvFourPi * jac * sum;
}

// The singular point x lies in the panel plane at parameters (s, t) in [0,1]^2.
LayerIntegrals in_plane(const Vec3& x, const Panel& p, double s, double t, const KernelParams& kernel,
                        const QuadratureOptions& opts)
{
    LayerIntegrals out;
    const double su[2] = {-s, 1.0 - s}, tv[2] = {-t, 1.0 - t};
    for (double a : su)
        for (double b : tv) {
            const Vec3 A = p.edge_u * a, B = p.edge_v * b;
            out.single += duffy_triangle(x, x + A, x + A + B, kernel.lambda, opts.self_order);
            out.single += duffy_triangle(x, x + B, x + A + B, kernel.lambda, opts.self_order);
        }

    // Principal value of the gradient: the largest rectangle centred on x contributes nothing
    // (tangential part odd, normal part identically zero). Integrate the rest of the panel.
    const double hs = std::min(s, 1.0 - s), ht = std::min(t, 1.0 - t);
    const double cu[4] = {0.0, s - hs, s + hs, 1.0}, cv[4] = {0.0, t - ht, t + ht, 1.0};
    LayerIntegrals rest;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (i == 1 && j == 1)
                continue;
            const double wu = cu[i + 1] - cu[i], wv = cv[j + 1] - cv[j];
            if (wu <= 0.0 || wv <= 0.0)
                continue;
            const Rect r{p.origin + p.edge_u * cu[i] + p.edge_v * cv[j], p.edge_u * wu, p.edge_v * wv};
            adaptive_rect(x, r, kernel.lambda, opts, 0, rest);
        }
    out.gradient = rest.gradient - p.normal * dot(rest.gradient, p.normal);
    return out;
}

GaussRule make_gauss(int n)
{
    GaussRule g;
    g.nodes.resize(n);
    g.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::fabs(dz) < 1e-16)
                break;
        }
        // map [-1, 1] to [0, 1], ascending
        g.nodes[n - 1 - i] = 0.5 * (1.0 + z);
        g.weights[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    return g;
}

} // namespace

ComponentBc Panel::component_bc(int component) const
{
    return classify_pec_panel(normal, component);
}

double PanelMesh::total_area() const
{
    double a = 0.0;
    for (const Panel& p : panels)
        a += p.area;
    return a;
}

bool PanelMesh::has_silver_muller() const
{
    return std::any_of(panels.begin(), panels.end(), [](const Panel& p) { return p.bc == FaceBc::SilverMuller; });
}

PanelMesh panelize_box(const Box& box, int per_face, const FaceTags& tags)
{
    if (per_face < 1)
        throw ConfigError("panelize_box: need at least one panel per face direction");
    for (int a = 0; a < 3; ++a)
        if (!(box.hi[a] > box.lo[a]))
            throw ConfigError("panelize_box: empty box");
    PanelMesh mesh;
    mesh.box = box;
    mesh.per_face = per_face;
    mesh.panels.reserve(6 * static_cast<std::size_t>(per_face) * per_face);
    for (int face = 0; face < 6; ++face) {
        const int ax = face_axis(face), ua = face_u_axis(face), va = face_v_axis(face);
        const bool high = face % 2 == 1;
        const double lu = (box.hi[ua] - box.lo[ua]) / per_face;
        const double lv = (box.hi[va] - box.lo[va]) / per_face;
        for (int i = 0; i < per_face; ++i)
            for (int j = 0; j < per_face; ++j) {
                Panel p;
                p.origin[ax] = high ? box.hi[ax] : box.lo[ax];
                p.origin[ua] = box.lo[ua] + i * lu;
                p.origin[va] = box.lo[va] + j * lv;
                p.edge_u[ua] = lu;
                p.edge_v[va] = lv;
                p.center = p.origin;
                p.center[ua] = box.lo[ua] + (i + 0.5) * lu;
                p.center[va] = box.lo[va] + (j + 0.5) * lv;
                p.normal[ax] = high ? 1.0 : -1.0;
                p.area = lu * lv;
                p.face = face;
                p.iu = i;
                p.iv = j;
                p.bc = tags[face];
                mesh.panels.push_back(p);
            }
    }
    return mesh;
}

ComponentBc classify_pec_panel(const Vec3& normal, int component)
{
    if (component < 0 || component > 2)
        throw ConfigError("classify_pec_panel: component must be 0, 1 or 2");
    return std::fabs(normal[component]) < 1e-12 ? ComponentBc::Dirichlet : ComponentBc::Neumann;
}

const GaussRule& gauss_legendre(int n)
{
    if (n < 1 || n > 64)
        throw ConfigError("gauss_legendre: order out of range");
    static std::mutex m;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(m);
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache.emplace(n, make_gauss(n)).first;
    return it->second;
}

LayerIntegrals layer_integrals(const Vec3& x, const Panel& panel, const KernelParams& kernel,
                               const QuadratureOptions& opts)
{
    kernel.validate();
    const Vec3 d = x - panel.origin;
    const double s = dot(d, panel.edge_u) / dot(panel.edge_u, panel.edge_u);
    const double t = dot(d, panel.edge_v) / dot(panel.edge_v, panel.edge_v);
    const double h = dot(d, panel.normal);
    const double scale = std::sqrt(panel.area);
    if (std::fabs(h) <= 1e-14 * scale && s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0)
        return in_plane(x - panel.normal * h, panel, s, t, kernel, opts);
    LayerIntegrals out;
    adaptive_rect(x, {panel.origin, panel.edge_u, panel.edge_v}, kernel.lambda, opts, 0, out);
    return out;
}

double single_layer_entry(const Vec3& x, const Panel& panel, const KernelParams& kernel)
{
    return layer_integrals(x, panel, kernel).single;
}

double double_layer_entry(const Vec3& x, const Panel& panel, const KernelParams& kernel)
{
    // grad_y G = -grad_x G
    return -dot(panel.normal, layer_integrals(x, panel, kernel).gradient);
}

double adjoint_double_layer_entry(const Vec3& x, const Vec3& normal_x, const Panel& panel,
                                  const KernelParams& kernel)
{
    return dot(normal_x, layer_integrals(x, panel, kernel).gradient);
}

Vec3 layer_gradient_entry(const Vec3& x, const Panel& panel, const KernelParams& kernel)
{
    return layer_integrals(x, panel, kernel).gradient;
}

std::vector<PanelQuadPoint> panel_quadrature(const PanelMesh& mesh, int order)
{
    const GaussRule& g = gauss_legendre(order);
    std::vector<PanelQuadPoint> pts;
    pts.reserve(mesh.size() * order * order);
    for (std::size_t k = 0; k < mesh.size(); ++k) {
        const Panel& p = mesh[k];
        for (int i = 0; i < order; ++i)
            for (int j = 0; j < order; ++j)
                pts.push_back({p.origin + p.edge_u * g.nodes[i] + p.edge_v * g.nodes[j],
                               p.area * g.weights[i] * g.weights[j], k});
    }
    return pts;
}

} // namespace molt
