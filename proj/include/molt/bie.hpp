#pragma once

#include "molt/gmres.hpp"
#include "molt/kernels.hpp"
#include "molt/panels.hpp"
#include "molt/treecode.hpp"

#include <array>
#include <memory>
#include <span>
#include <vector>

namespace molt {

enum class Formulation { Direct, IndirectV1, IndirectV2, SilverMuller };

// S_ij = int_{P_j} G(c_i|y) ds_y and Gr_ij = int_{P_j} grad_x G(c_i|y) ds_y for collocation
// points c_i (panel centres). On-panel entries use the singular rule and the principal value.
class BoundaryInteractions {
public:
    enum class Storage { Auto, Dense, BoxTable, OnTheFly };

    struct Entry {
        double single;
        Vec3 gradient;
    };

    BoundaryInteractions(const PanelMesh& mesh, const KernelParams& kernel, Storage storage = Storage::Auto,
                         const QuadratureOptions& quad = {});

    std::size_t size() const { return mesh_.size(); }
    const PanelMesh& mesh() const { return mesh_; }
    const KernelParams& kernel() const { return kernel_; }
    Storage storage() const { return storage_; }
    std::size_t bytes() const { return storage_bytes_; }

    Entry entry(std::size_t i, std::size_t j) const;
    // All entries of row i, out.size() == size().
    void row(std::size_t i, std::span<Entry> out) const;

    // Table 0 is the single layer, table 1 + m the gradient component m.
    struct Term {
        int table = 0;
        std::size_t channel = 0;
        unsigned faces = 0x3f; // bit f set: needed on rows of face f
    };
    // out[i * terms.size() + t] = sum_j T(i, j) x[channel * size() + j]; rows outside a term's face
    // mask get zero.
    void contract(std::span<const double> x, std::span<const Term> terms, std::span<double> out) const;

private:
    struct Stride {
        std::size_t base, sc, sd;
    };
    Stride stride(std::size_t i, int source_face) const;
    std::size_t table_key(std::size_t i, std::size_t j) const;
    void build_table();

    PanelMesh mesh_;
    KernelParams kernel_;
    QuadratureOptions quad_;
    Storage storage_;
    std::vector<Entry> data_;        // dense
    std::array<std::vector<double>, 4> table_; // box table, one array per component
    std::size_t table_offset_[6][6] = {};
    std::size_t storage_bytes_ = 0;
};

bool is_box_layout(const PanelMesh& mesh);

// A collocation system A x = rhs; unknowns and rows are described by the assembling function.
struct BoundarySystem {
    LinearOperator op;
    std::vector<double> rhs;
};

// Direct formulation for component k: one unknown per panel (Neumann trace on Dirichlet panels,
// Dirichlet trace on Neumann panels). phi: volume term at centres; g: Neumann data per panel.
BoundarySystem assemble_direct(const BoundaryInteractions& bi, int component, std::span<const double> phi,
                               std::span<const double> neumann);

// Indirect single-layer formulation for component k. dphi_dn: normal derivative of the volume
// term at centres; neumann: prescribed dw/dn per panel.
BoundarySystem assemble_indirect_v1(const BoundaryInteractions& bi, int component, std::span<const double> phi,
                                    std::span<const double> dphi_dn, std::span<const double> neumann);

// Vector density, three unknowns per panel, PEC everywhere. Phi and div_phi at centres
// (Phi laid out as 3 per panel). Panel rows are ordered like the unknowns: the two tangential
// conditions at their axes, the divergence row times sign(n_m) at the normal axis m.
BoundarySystem assemble_indirect_v2(const BoundaryInteractions& bi, std::span<const double> Phi,
                                    std::span<const double> div_phi);

struct SilverMullerParams {
    double dt = 0.0;
    double epsilon = 1.0;
};

// Vector density with Silver-Mueller rows on tagged panels and PEC rows elsewhere; the divergence
// row is appended on every panel. curl_Phi, R: 3 per panel.
BoundarySystem assemble_silver_muller(const BoundaryInteractions& bi, const SilverMullerParams& sm,
                                      std::span<const double> Phi, std::span<const double> curl_Phi,
                                      std::span<const double> div_phi, std::span<const double> R);

// Tangential conditions v x n = 0 are imposed as two components of n x (v x n), dropping the one
// along the largest |n_m|.
std::array<int, 2> tangential_rows(const Vec3& normal);

// w_k(x) = -Phi_k(x) + sum_j single[3j+k] S(x, P_j) + sum_j dbl[3j+k] D(x, P_j); dbl may be empty.
struct LayerDensities {
    std::vector<double> single;
    std::vector<double> dbl;
};

// Direct formulation: solution and Neumann data are component-major (k * panels + j).
LayerDensities densities_direct(const PanelMesh& mesh, std::span<const double> solution_by_component,
                                std::span<const double> neumann_by_component);
// Single-layer densities from a component-major solution (k * panels + j).
LayerDensities densities_from_components(std::span<const double> solution_by_component, std::size_t panels);

// Traces of w at the panel centres (3 per panel): the interior limit of the representation.
std::vector<double> boundary_trace(const BoundaryInteractions& bi, const LayerDensities& dens,
                                   std::span<const double> Phi);

// Boundary layer potentials at interior targets by a treecode over panel quadrature points.
// Panels closer to a target than near_ratio panel diameters are corrected to the adaptive panel
// integral; the corrections are cached for the last target set and kernel.
class LayerPotentialEvaluator {
public:
    LayerPotentialEvaluator(const PanelMesh& mesh, const TreecodeParams& params, int order = 6,
                            double near_ratio = 1.0);

    // 3 values per target: sum_j single S(x, P_j) + dbl D(x, P_j). Targets must be strictly inside.
    std::vector<double> evaluate(const LayerDensities& dens, std::span<const Vec3> targets,
                                 const KernelParams& kernel) const;

    std::size_t near_pairs() const { return near_.size(); }

private:
    struct NearPair {
        std::size_t target, panel;
        double single, dbl; // exact minus quadrature
    };
    void prepare(std::span<const Vec3> targets, const KernelParams& kernel) const;

    PanelMesh mesh_;
    std::vector<PanelQuadPoint> quad_;
    TreecodeParams params_;
    int order_;
    double near_ratio_;
    mutable std::unique_ptr<ClusterTree> tree_;
    mutable std::vector<Vec3> near_targets_;
    mutable double near_lambda_ = -1.0;
    mutable std::vector<NearPair> near_;
};

// Full representation: -Phi + layer terms.
std::vector<double> evaluate_representation(const LayerPotentialEvaluator& eval, const LayerDensities& dens,
                                            std::span<const double> Phi, std::span<const Vec3> targets,
                                            const KernelParams& kernel);

} // namespace molt
