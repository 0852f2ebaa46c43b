#include "molt/bie.hpp"

#include "molt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace molt {

namespace {

using Entry = BoundaryInteractions::Entry;

std::vector<Entry>& row_buffer(std::size_t n)
{
    thread_local std::vector<Entry> buf;
    buf.resize(n);
    return buf;
}

void check_size(std::span<const double> v, std::size_t n, const char* what)
{
    if (v.size() != n)
        throw ConfigError(std::string("boundary system: wrong length for ") + what);
}

Vec3 load3(std::span<const double> v, std::size_t i) { return {v[3 * i], v[3 * i + 1], v[3 * i + 2]}; }

// n x (v x n): the condition v x n = 0 with the tangential block keeping the sign of v.
Vec3 tangential_part(const Vec3& v, const Vec3& n) { return cross(n, cross(v, n)); }

// Rows of a panel sit in the slots of the unknowns they mostly act on: tangential rows at their
// axes, the divergence row (signed by n_m) at the normal axis m.
void place_rows(const Vec3& tangential, double divergence, const Vec3& n, double* out)
{
    const auto rows = tangential_rows(n);
    const int m = 3 - rows[0] - rows[1];
    out[rows[0]] = tangential[rows[0]];
    out[rows[1]] = tangential[rows[1]];
    out[m] = std::copysign(1.0, n[m]) * divergence;
}

} // namespace

bool is_box_layout(const PanelMesh& mesh)
{
    if (mesh.per_face < 1 || mesh.size() != 6 * static_cast<std::size_t>(mesh.per_face) * mesh.per_face)
        return false;
    const PanelMesh ref = panelize_box(mesh.box, mesh.per_face);
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        const Panel &a = mesh[i], &b = ref[i];
        if (a.face != b.face || a.iu != b.iu || a.iv != b.iv || norm(a.center - b.center) != 0.0 ||
            norm(a.edge_u - b.edge_u) != 0.0 || norm(a.edge_v - b.edge_v) != 0.0)
            return false;
    }
    return true;
}

BoundaryInteractions::BoundaryInteractions(const PanelMesh& mesh, const KernelParams& kernel, Storage storage,
                                           const QuadratureOptions& quad)
    : mesh_(mesh), kernel_(kernel), quad_(quad), storage_(storage)
{
    kernel_.validate();
    const bool box = is_box_layout(mesh_);
    if (storage_ == Storage::Auto)
        storage_ = box ? Storage::BoxTable : (mesh_.size() <= 4000 ? Storage::Dense : Storage::OnTheFly);
    if (storage_ == Storage::BoxTable && !box)
        throw ConfigError("BoundaryInteractions: table storage needs a uniform box panelization");
    const std::size_t n = mesh_.size();
    if (storage_ == Storage::Dense) {
        data_.resize(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const LayerIntegrals e = layer_integrals(mesh_[i].center, mesh_[j], kernel_, quad_);
                data_[i * n + j] = {e.single, e.gradient};
            }
    } else if (storage_ == Storage::BoxTable) {
        build_table();
    }
    storage_bytes_ = data_.size() * sizeof(Entry) + 4 * table_[0].size() * sizeof(double);
}

// Table layout per (target face f, source face f'):
//   same normal axis: key (c - a + M - 1) (2M - 1) + (d - b + M - 1)
//   adjacent faces:   key (t1 M + s1) (2M - 1) + (ss - ts + M - 1)
// with t1 the target index along the source face's normal axis, s1 the source index along the
// target face's normal axis, and ts/ss the indices along the shared axis.
void BoundaryInteractions::build_table()
{
    const int M = mesh_.per_face;
    const std::size_t W = 2 * static_cast<std::size_t>(M) - 1;
    std::size_t offset = 0;
    for (int f = 0; f < 6; ++f)
        for (int g = 0; g < 6; ++g) {
            table_offset_[f][g] = offset;
            offset += face_axis(f) == face_axis(g) ? W * W : static_cast<std::size_t>(M) * M * W;
        }
    for (auto& t : table_)
        t.resize(offset);
    for (int f = 0; f < 6; ++f)
        for (int g = 0; g < 6; ++g) {
            const std::size_t off = table_offset_[f][g];
            auto fill = [&](std::size_t key, int a, int b, int c, int d) {
                const LayerIntegrals e =
                    layer_integrals(mesh_[mesh_.index(f, a, b)].center, mesh_[mesh_.index(g, c, d)], kernel_, quad_);
                table_[0][off + key] = e.single;
                for (int m = 0; m < 3; ++m)
                    table_[1 + m][off + key] = e.gradient[m];
            };
            if (face_axis(f) == face_axis(g)) {
                for (int dc = -(M - 1); dc <= M - 1; ++dc)
                    for (int dd = -(M - 1); dd <= M - 1; ++dd) {
                        const int a = std::max(0, -dc), b = std::max(0, -dd);
                        fill((dc + M - 1) * W + (dd + M - 1), a, b, a + dc, b + dd);
                    }
                continue;
            }
            const int nf = face_axis(f), ng = face_axis(g);
            const bool target_u_is_ng = face_u_axis(f) == ng; // target iu runs along g's normal
            const bool source_u_is_nf = face_u_axis(g) == nf;
            for (int t1 = 0; t1 < M; ++t1)
                for (int s1 = 0; s1 < M; ++s1)
                    for (int ds = -(M - 1); ds <= M - 1; ++ds) {
                        const int ts = std::max(0, -ds), ss = ts + ds;
                        const int a = target_u_is_ng ? t1 : ts, b = target_u_is_ng ? ts : t1;
                        const int c = source_u_is_nf ? s1 : ss, d = source_u_is_nf ? ss : s1;
                        fill((static_cast<std::size_t>(t1) * M + s1) * W + (ds + M - 1), a, b, c, d);
                    }
        }
}

BoundaryInteractions::Stride BoundaryInteractions::stride(std::size_t i, int g) const
{
    const Panel& t = mesh_[i];
    const int f = t.face;
    const std::size_t M = mesh_.per_face, W = 2 * M - 1;
    const std::size_t off = table_offset_[f][g];
    if (face_axis(f) == face_axis(g))
        return {off + (M - 1 - t.iu) * W + (M - 1 - t.iv), W, 1};
    const int nf = face_axis(f), ng = face_axis(g);
    const bool target_u_is_ng = face_u_axis(f) == ng;
    const std::size_t t1 = target_u_is_ng ? t.iu : t.iv, ts = target_u_is_ng ? t.iv : t.iu;
    const std::size_t base = off + t1 * M * W + (M - 1) - ts;
    if (face_u_axis(g) == nf)
        return {base, W, 1}; // c = s1, d = ss
    return {base, 1, W};
}

std::size_t BoundaryInteractions::table_key(std::size_t i, std::size_t j) const
{
    const Panel& s = mesh_[j];
    const Stride st = stride(i, s.face);
    return st.base + s.iu * st.sc + s.iv * st.sd;
}

BoundaryInteractions::Entry BoundaryInteractions::entry(std::size_t i, std::size_t j) const
{
    switch (storage_) {
    case Storage::Dense:
        return data_[i * mesh_.size() + j];
    case Storage::BoxTable: {
        const std::size_t k = table_key(i, j);
        return {table_[0][k], {table_[1][k], table_[2][k], table_[3][k]}};
    }
    default: {
        const LayerIntegrals e = layer_integrals(mesh_[i].center, mesh_[j], kernel_, quad_);
        return {e.single, e.gradient};
    }
    }
}

void BoundaryInteractions::row(std::size_t i, std::span<Entry> out) const
{
    const std::size_t n = mesh_.size();
    if (out.size() != n)
        throw ConfigError("BoundaryInteractions::row: output size mismatch");
    if (storage_ == Storage::Dense) {
        std::copy_n(data_.begin() + i * n, n, out.begin());
    } else if (storage_ == Storage::BoxTable) {
        const std::size_t M = mesh_.per_face;
        for (int g = 0; g < 6; ++g) {
            const Stride st = stride(i, g);
            Entry* o = out.data() + mesh_.index(g, 0, 0);
            for (std::size_t c = 0; c < M; ++c)
                for (std::size_t d = 0; d < M; ++d) {
                    const std::size_t k = st.base + c * st.sc + d * st.sd;
                    o[c * M + d] = {table_[0][k], {table_[1][k], table_[2][k], table_[3][k]}};
                }
        }
    } else {
        for (std::size_t j = 0; j < n; ++j)
            out[j] = entry(i, j);
    }
}

void BoundaryInteractions::contract(std::span<const double> x, std::span<const Term> terms,
                                    std::span<double> out) const
{
    const std::size_t n = mesh_.size(), nt = terms.size();
    if (n == 0 || x.size() % n != 0)
        throw ConfigError("BoundaryInteractions::contract: input is not a whole number of channels");
    const std::size_t channels = x.size() / n;
    if (out.size() != n * nt)
        throw ConfigError("BoundaryInteractions::contract: output size mismatch");
    for (const Term& t : terms)
        if (t.table < 0 || t.table > 3 || t.channel >= channels)
            throw ConfigError("BoundaryInteractions::contract: bad term");
    std::fill(out.begin(), out.end(), 0.0);

    if (storage_ != Storage::BoxTable) {
        std::vector<Entry>& r = row_buffer(n);
        for (std::size_t i = 0; i < n; ++i) {
            bool any = false;
            for (const Term& t : terms)
                any = any || (t.faces >> mesh_[i].face & 1u);
            if (!any)
                continue;
            row(i, r);
            for (std::size_t k = 0; k < nt; ++k) {
                const Term& t = terms[k];
                if (!(t.faces >> mesh_[i].face & 1u))
                    continue;
                const double* xs = x.data() + t.channel * n;
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    s += (t.table == 0 ? r[j].single : r[j].gradient[t.table - 1]) * xs[j];
                out[i * nt + k] = s;
            }
        }
        return;
    }

    // Inner loops run along contiguous table rows. Where the table is contiguous along the
    // source u index instead, the source block is read transposed.
    const std::size_t M = mesh_.per_face, MM = M * M;
    std::vector<double> xt(x.size());
    std::vector<char> nonzero(channels * 6, 0);
    for (std::size_t ch = 0; ch < channels; ++ch)
        for (int g = 0; g < 6; ++g) {
            const double* src = x.data() + ch * n + g * MM;
            double* dst = xt.data() + ch * n + g * MM;
            for (std::size_t c = 0; c < M; ++c)
                for (std::size_t d = 0; d < M; ++d) {
                    dst[d * M + c] = src[c * M + d];
                    nonzero[ch * 6 + g] |= src[c * M + d] != 0.0;
                }
        }
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned face = mesh_[i].face;
        for (int g = 0; g < 6; ++g) {
            const Stride st = stride(i, g);
            const bool direct = st.sd == 1;
            const std::size_t outer = direct ? st.sc : st.sd;
            for (std::size_t k = 0; k < nt; ++k) {
                const Term& t = terms[k];
                if (!(t.faces >> face & 1u) || !nonzero[t.channel * 6 + g])
                    continue;
                const double* tab = table_[t.table].data() + st.base;
                const double* xs = (direct ? x.data() : xt.data()) + t.channel * n + g * MM;
                double s = 0.0;
                for (std::size_t c = 0; c < M; ++c) {
                    const double* a = tab + c * outer;
                    const double* b = xs + c * M;
                    double part = 0.0;
#pragma omp simd reduction(+ : part)
                    for (std::size_t d = 0; d < M; ++d)
                        part += a[d] * b[d];
                    s += part;
                }
                out[i * nt + k] += s;
            }
        }
    }
}

std::array<int, 2> tangential_rows(const Vec3& n)
{
    int drop = 0;
    for (int m = 1; m < 3; ++m)
        if (std::fabs(n[m]) > std::fabs(n[drop]))
            drop = m;
    return {drop == 0 ? 1 : 0, drop == 2 ? 1 : 2};
}

namespace {

using Term = BoundaryInteractions::Term;

unsigned face_bit(const Panel& p) { return 1u << p.face; }

// Component-major planes of a vector with 3 values per panel.
std::vector<double> planes(std::span<const double> v, std::size_t n)
{
    std::vector<double> out(3 * n);
    for (std::size_t j = 0; j < n; ++j)
        for (int c = 0; c < 3; ++c)
            out[c * n + j] = v[3 * j + c];
    return out;
}

} // namespace

BoundarySystem assemble_direct(const BoundaryInteractions& bi, int component, std::span<const double> phi,
                               std::span<const double> neumann)
{
    const PanelMesh& mesh = bi.mesh();
    const std::size_t n = mesh.size();
    if (mesh.has_silver_muller())
        throw FormulationError("assemble_direct: Silver-Mueller panels need assemble_silver_muller");
    check_size(phi, n, "phi");
    check_size(neumann, n, "Neumann data");
    std::vector<char> is_n(n);
    for (std::size_t j = 0; j < n; ++j)
        is_n[j] = mesh[j].component_bc(component) == ComponentBc::Neumann;

    BoundarySystem sys;
    sys.rhs.assign(phi.begin(), phi.end());
    {
        std::vector<double> g(n, 0.0), out(n);
        for (std::size_t j = 0; j < n; ++j)
            if (is_n[j])
                g[j] = neumann[j];
        const Term t{0, 0};
        bi.contract(g, std::span(&t, 1), out);
        for (std::size_t i = 0; i < n; ++i)
            sys.rhs[i] += out[i];
    }
    const BoundaryInteractions* p = &bi;
    sys.op.dim = n;
    sys.op.apply = [p, is_n](std::span<const double> x, std::span<double> y) {
        const PanelMesh& m = p->mesh();
        const std::size_t n = m.size();
        // channel 0: x on Dirichlet panels; 1 + a: n_a x on Neumann panels
        std::vector<double> ch(4 * n, 0.0), out(4 * n);
        for (std::size_t j = 0; j < n; ++j) {
            if (!is_n[j]) {
                ch[j] = x[j];
                continue;
            }
            for (int a = 0; a < 3; ++a)
                ch[(1 + a) * n + j] = m[j].normal[a] * x[j];
        }
        static const Term terms[4] = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
        p->contract(ch, terms, out);
        // double layer: dG/dn_y = -n_j . grad_x G
        for (std::size_t i = 0; i < n; ++i) {
            double s = -(out[4 * i] + out[4 * i + 1] + out[4 * i + 2] + out[4 * i + 3]);
            if (is_n[i])
                s -= 0.5 * x[i];
            y[i] = s;
        }
    };
    return sys;
}

BoundarySystem assemble_indirect_v1(const BoundaryInteractions& bi, int component, std::span<const double> phi,
                                    std::span<const double> dphi_dn, std::span<const double> neumann)
{
    const PanelMesh& mesh = bi.mesh();
    const std::size_t n = mesh.size();
    if (mesh.has_silver_muller())
        throw FormulationError("assemble_indirect_v1: Silver-Mueller panels need assemble_silver_muller");
    check_size(phi, n, "phi");
    check_size(dphi_dn, n, "dphi/dn");
    check_size(neumann, n, "Neumann data");
    std::vector<char> is_n(n);
    unsigned d_faces = 0, n_faces = 0;
    BoundarySystem sys;
    sys.rhs.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        is_n[j] = mesh[j].component_bc(component) == ComponentBc::Neumann;
        (is_n[j] ? n_faces : d_faces) |= face_bit(mesh[j]);
        sys.rhs[j] = is_n[j] ? neumann[j] + dphi_dn[j] : phi[j];
    }
    const BoundaryInteractions* p = &bi;
    const std::array<Term, 4> terms{Term{0, 0, d_faces}, Term{1, 0, n_faces}, Term{2, 0, n_faces},
                                    Term{3, 0, n_faces}};
    sys.op.dim = n;
    sys.op.apply = [p, is_n, terms](std::span<const double> x, std::span<double> y) {
        const PanelMesh& m = p->mesh();
        const std::size_t n = m.size();
        std::vector<double> out(4 * n);
        p->contract(x, terms, out);
        for (std::size_t i = 0; i < n; ++i) {
            if (is_n[i]) {
                const Vec3& ni = m[i].normal;
                y[i] = ni.x * out[4 * i + 1] + ni.y * out[4 * i + 2] + ni.z * out[4 * i + 3] - 0.5 * x[i];
            } else {
                y[i] = out[4 * i];
            }
        }
    };
    return sys;
}

namespace {

// Shared row builder for the vector-density systems. sm_rows: per panel, whether the tangential
// rows are Silver-Mueller rows; coef = dt / epsilon.
LinearOperator vector_operator(const BoundaryInteractions& bi, std::vector<char> sm_rows, double coef)
{
    const BoundaryInteractions* p = &bi;
    unsigned sm_faces = 0;
    for (std::size_t i = 0; i < sm_rows.size(); ++i)
        if (sm_rows[i])
            sm_faces |= face_bit(bi.mesh()[i]);
    // 0-2: S gamma_c; 3-5: G_c gamma_c; then G_a gamma_b for a != b on Silver-Mueller rows
    std::vector<Term> terms;
    for (std::size_t c = 0; c < 3; ++c)
        terms.push_back({0, c});
    for (int c = 0; c < 3; ++c)
        terms.push_back({1 + c, static_cast<std::size_t>(c)});
    int cross_term[3][3] = {};
    if (sm_faces)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                if (a != b) {
                    cross_term[a][b] = static_cast<int>(terms.size());
                    terms.push_back({1 + a, static_cast<std::size_t>(b), sm_faces});
                }
    LinearOperator op;
    op.dim = 3 * bi.size();
    op.apply = [p, sm_rows, coef, terms, cross_term](std::span<const double> x, std::span<double> y) {
        const PanelMesh& m = p->mesh();
        const std::size_t n = m.size(), nt = terms.size();
        std::vector<double> out(n * nt);
        p->contract(planes(x, n), terms, out);
        for (std::size_t i = 0; i < n; ++i) {
            const double* o = &out[i * nt];
            const Vec3 ni = m[i].normal;
            const Vec3 v{o[0], o[1], o[2]};
            const double d = o[3] + o[4] + o[5];
            const Vec3 gi = load3(x, i);
            Vec3 t = v;
            if (sm_rows[i]) {
                // gamma dG/dn_x - (gamma . n_x) grad_x G, component a: sum_b n_b (G_b gamma_a - G_a gamma_b)
                Vec3 u;
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b)
                        if (a != b)
                            u[a] += ni[b] * (o[cross_term[b][a]] - o[cross_term[a][b]]);
                t = v * 1.5 + (u - gi * 0.5) * coef;
            }
            const Vec3 nt3 = tangential_part(t, ni);
            const auto rows = tangential_rows(ni);
            const int mm = 3 - rows[0] - rows[1];
            y[3 * i + rows[0]] = nt3[rows[0]];
            y[3 * i + rows[1]] = nt3[rows[1]];
            y[3 * i + mm] = std::copysign(1.0, ni[mm]) * (d - 0.5 * dot(gi, ni));
        }
    };
    return op;
}

} // namespace

BoundarySystem assemble_indirect_v2(const BoundaryInteractions& bi, std::span<const double> Phi,
                                    std::span<const double> div_phi)
{
    const PanelMesh& mesh = bi.mesh();
    const std::size_t n = mesh.size();
    if (mesh.has_silver_muller())
        throw FormulationError("assemble_indirect_v2: Silver-Mueller panels need assemble_silver_muller");
    check_size(Phi, 3 * n, "Phi");
    check_size(div_phi, n, "div Phi");
    BoundarySystem sys;
    sys.rhs.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 nt = tangential_part(load3(Phi, i), mesh[i].normal);
        place_rows(nt, div_phi[i], mesh[i].normal, &sys.rhs[3 * i]);
    }
    sys.op = vector_operator(bi, std::vector<char>(n, 0), 0.0);
    return sys;
}

BoundarySystem assemble_silver_muller(const BoundaryInteractions& bi, const SilverMullerParams& sm,
                                      std::span<const double> Phi, std::span<const double> curl_Phi,
                                      std::span<const double> div_phi, std::span<const double> R)
{
    const PanelMesh& mesh = bi.mesh();
    const std::size_t n = mesh.size();
    if (!(sm.dt > 0.0) || !(sm.epsilon > 0.0))
        throw ConfigError("assemble_silver_muller: dt and epsilon must be positive");
    check_size(Phi, 3 * n, "Phi");
    check_size(curl_Phi, 3 * n, "curl Phi");
    check_size(div_phi, n, "div Phi");
    check_size(R, 3 * n, "R");
    const double coef = sm.dt / sm.epsilon;
    std::vector<char> sm_rows(n);
    BoundarySystem sys;
    sys.rhs.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 ni = mesh[i].normal;
        sm_rows[i] = mesh[i].bc == FaceBc::SilverMuller;
        Vec3 t = load3(Phi, i);
        if (sm_rows[i])
            t = load3(R, i) + t * 1.5 + cross(load3(curl_Phi, i), ni) * coef;
        place_rows(tangential_part(t, ni), div_phi[i], ni, &sys.rhs[3 * i]);
    }
    sys.op = vector_operator(bi, std::move(sm_rows), coef);
    return sys;
}

LayerDensities densities_direct(const PanelMesh& mesh, std::span<const double> sol, std::span<const double> neumann)
{
    const std::size_t n = mesh.size();
    check_size(sol, 3 * n, "solution");
    check_size(neumann, 3 * n, "Neumann data");
    LayerDensities d;
    d.single.resize(3 * n);
    d.dbl.resize(3 * n);
    for (int k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < n; ++j) {
            const bool is_n = mesh[j].component_bc(k) == ComponentBc::Neumann;
            d.single[3 * j + k] = is_n ? -neumann[k * n + j] : -sol[k * n + j];
            d.dbl[3 * j + k] = is_n ? sol[k * n + j] : 0.0;
        }
    return d;
}

LayerDensities densities_from_components(std::span<const double> sol, std::size_t n)
{
    check_size(sol, 3 * n, "solution");
    LayerDensities d;
    d.single.resize(3 * n);
    for (int k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < n; ++j)
            d.single[3 * j + k] = sol[k * n + j];
    return d;
}

std::vector<double> boundary_trace(const BoundaryInteractions& bi, const LayerDensities& dens,
                                   std::span<const double> Phi)
{
    const PanelMesh& mesh = bi.mesh();
    const std::size_t n = mesh.size();
    check_size(Phi, 3 * n, "Phi");
    check_size(dens.single, 3 * n, "single-layer density");
    const bool dbl = !dens.dbl.empty();
    if (dbl)
        check_size(dens.dbl, 3 * n, "double-layer density");
    // channels 0-2: single density planes; 3 + 3a + c: n_a times the double density of component c
    std::vector<double> ch(12 * n, 0.0);
    std::vector<Term> terms;
    for (std::size_t c = 0; c < 3; ++c) {
        terms.push_back({0, c});
        for (std::size_t j = 0; j < n; ++j)
            ch[c * n + j] = dens.single[3 * j + c];
    }
    if (dbl)
        for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c) {
                const std::size_t k = 3 + 3 * a + c;
                terms.push_back({1 + a, k});
                for (std::size_t j = 0; j < n; ++j)
                    ch[k * n + j] = mesh[j].normal[a] * dens.dbl[3 * j + c];
            }
    const std::size_t nt = terms.size();
    std::vector<double> out(n * nt);
    bi.contract(ch, terms, out);
    std::vector<double> w(3 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) {
            double s = out[i * nt + c];
            if (dbl) {
                for (int a = 0; a < 3; ++a)
                    s -= out[i * nt + 3 + 3 * a + c];
                s += 0.5 * dens.dbl[3 * i + c];
            }
            w[3 * i + c] = s - Phi[3 * i + c];
        }
    return w;
}

LayerPotentialEvaluator::LayerPotentialEvaluator(const PanelMesh& mesh, const TreecodeParams& params, int order,
                                                 double near_ratio)
    : mesh_(mesh), quad_(panel_quadrature(mesh, order)), params_(params), order_(order), near_ratio_(near_ratio)
{
    std::vector<Vec3> pos(quad_.size());
    for (std::size_t q = 0; q < quad_.size(); ++q)
        pos[q] = quad_[q].position;
    tree_ = std::make_unique<ClusterTree>(pos, params_);
}

void LayerPotentialEvaluator::prepare(std::span<const Vec3> targets, const KernelParams& kernel) const
{
    if (near_lambda_ == kernel.lambda && near_targets_.size() == targets.size() &&
        std::equal(targets.begin(), targets.end(), near_targets_.begin(),
                   [](const Vec3& a, const Vec3& b) { return a.x == b.x && a.y == b.y && a.z == b.z; }))
        return;
    near_.clear();
    double diam = 0.0;
    for (const Panel& p : mesh_.panels)
        diam = std::max(diam, norm(p.edge_u + p.edge_v));
    const double reach = near_ratio_ * diam;
    const Box& b = mesh_.box;
    const std::size_t q0 = static_cast<std::size_t>(order_) * order_;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const Vec3& x = targets[t];
        double wall = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a)
            wall = std::min({wall, x[a] - b.lo[a], b.hi[a] - x[a]});
        if (wall >= reach)
            continue;
        for (std::size_t j = 0; j < mesh_.size(); ++j) {
            const Panel& p = mesh_[j];
            const Vec3 d = x - p.origin;
            const double s = std::clamp(dot(d, p.edge_u) / dot(p.edge_u, p.edge_u), 0.0, 1.0);
            const double r = std::clamp(dot(d, p.edge_v) / dot(p.edge_v, p.edge_v), 0.0, 1.0);
            if (norm(d - p.edge_u * s - p.edge_v * r) >= near_ratio_ * norm(p.edge_u + p.edge_v))
                continue;
            const LayerIntegrals exact = layer_integrals(x, p, kernel);
            double qs = 0.0;
            Vec3 qg;
            for (std::size_t q = j * q0; q < (j + 1) * q0; ++q) {
                qs += quad_[q].weight * green(norm(x - quad_[q].position), kernel);
                qg += green_gradient(x - quad_[q].position, kernel) * quad_[q].weight;
            }
            near_.push_back({t, j, exact.single - qs, -dot(p.normal, exact.gradient - qg)});
        }
    }
    near_targets_.assign(targets.begin(), targets.end());
    near_lambda_ = kernel.lambda;
}

std::vector<double> LayerPotentialEvaluator::evaluate(const LayerDensities& dens, std::span<const Vec3> targets,
                                                      const KernelParams& kernel) const
{
    const std::size_t n = mesh_.size();
    check_size(dens.single, 3 * n, "single-layer density");
    const bool dbl = !dens.dbl.empty();
    if (dbl)
        check_size(dens.dbl, 3 * n, "double-layer density");
    for (const Vec3& x : targets)
        for (int a = 0; a < 3; ++a)
            if (!(x[a] > mesh_.box.lo[a] && x[a] < mesh_.box.hi[a]))
                throw DomainError("evaluate_representation: target not strictly inside the domain");
    std::vector<double> q(3 * quad_.size()), dip;
    if (dbl)
        dip.resize(9 * quad_.size());
    for (std::size_t i = 0; i < quad_.size(); ++i) {
        const std::size_t j = quad_[i].panel;
        const double w = quad_[i].weight;
        for (int k = 0; k < 3; ++k) {
            q[3 * i + k] = dens.single[3 * j + k] * w;
            if (dbl)
                for (int m = 0; m < 3; ++m)
                    dip[9 * i + 3 * k + m] = dens.dbl[3 * j + k] * w * mesh_[j].normal[m];
        }
    }
    tree_->set_sources(q, dip, 3);
    std::vector<double> out = evaluate_sum(*tree_, targets, kernel);
    prepare(targets, kernel);
    for (const NearPair& c : near_)
        for (int k = 0; k < 3; ++k) {
            out[3 * c.target + k] += dens.single[3 * c.panel + k] * c.single;
            if (dbl)
                out[3 * c.target + k] += dens.dbl[3 * c.panel + k] * c.dbl;
        }
    return out;
}

std::vector<double> evaluate_representation(const LayerPotentialEvaluator& eval, const LayerDensities& dens,
                                            std::span<const double> Phi, std::span<const Vec3> targets,
                                            const KernelParams& kernel)
{
    check_size(Phi, 3 * targets.size(), "Phi");
    std::vector<double> w = eval.evaluate(dens, targets, kernel);
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] -= Phi[i];
    return w;
}

} // namespace molt
