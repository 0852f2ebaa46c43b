#pragma once

#include "molt/kernels.hpp"
#include "molt/vec3.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace molt {

struct Box {
    Vec3 lo{0.0, 0.0, 0.0};
    Vec3 hi{1.0, 1.0, 1.0};
};

enum class FaceBc { Pec, SilverMuller };
enum class ComponentBc { Dirichlet, Neumann };

// Faces are numbered 2*axis + side: 0 is x1 = lo, 1 is x1 = hi, 2 is x2 = lo, ...
using FaceTags = std::array<FaceBc, 6>;
inline constexpr FaceTags kAllPec{FaceBc::Pec, FaceBc::Pec, FaceBc::Pec,
                                  FaceBc::Pec, FaceBc::Pec, FaceBc::Pec};

// Flat rectangle origin + [0,1] edge_u + [0,1] edge_v.
struct Panel {
    Vec3 origin, edge_u, edge_v;
    Vec3 center, normal;
    double area = 0.0;
    int face = 0;
    int iu = 0, iv = 0; // position on the face grid
    FaceBc bc = FaceBc::Pec;

    ComponentBc component_bc(int component) const;
};

struct PanelMesh {
    Box box;
    int per_face = 0;
    std::vector<Panel> panels;

    std::size_t size() const { return panels.size(); }
    const Panel& operator[](std::size_t i) const { return panels[i]; }
    double total_area() const;
    bool has_silver_muller() const;
    std::size_t index(int face, int iu, int iv) const
    {
        return (static_cast<std::size_t>(face) * per_face + iu) * per_face + iv;
    }
};

// Axis of the face normal, and the two in-face axes in increasing order.
constexpr int face_axis(int face) { return face / 2; }
constexpr int face_u_axis(int face) { return face_axis(face) == 0 ? 1 : 0; }
constexpr int face_v_axis(int face) { return face_axis(face) == 2 ? 1 : 2; }

PanelMesh panelize_box(const Box& box, int per_face, const FaceTags& tags = kAllPec);

// Dirichlet when the normal has no component along the axis, Neumann otherwise.
ComponentBc classify_pec_panel(const Vec3& normal, int component);

// Gauss-Legendre rule on [0, 1].
struct GaussRule {
    std::vector<double> nodes, weights;
};
const GaussRule& gauss_legendre(int n);

struct QuadratureOptions {
    int order = 6;           // points per direction; 6 points integrate degree 11 exactly
    int self_order = 12;     // per direction on each triangle of the singular rule
    double near_ratio = 3.0; // subdivide while distance < near_ratio * diameter
    int max_depth = 12;
};

// Integral over the panel of G and of grad_x G. On-panel targets use the singular rule for G and
// the principal value for the gradient (no jump term).
struct LayerIntegrals {
    double single = 0.0;
    Vec3 gradient;
};
LayerIntegrals layer_integrals(const Vec3& x, const Panel& panel, const KernelParams& kernel,
                               const QuadratureOptions& opts = {});

double single_layer_entry(const Vec3& x, const Panel& panel, const KernelParams& kernel);
// integral of dG/dn_y
double double_layer_entry(const Vec3& x, const Panel& panel, const KernelParams& kernel);
// integral of dG/dn_x
double adjoint_double_layer_entry(const Vec3& x, const Vec3& normal_x, const Panel& panel,
                                  const KernelParams& kernel);
Vec3 layer_gradient_entry(const Vec3& x, const Panel& panel, const KernelParams& kernel);

struct PanelQuadPoint {
    Vec3 position;
    double weight = 0.0;
    std::size_t panel = 0;
};
std::vector<PanelQuadPoint> panel_quadrature(const PanelMesh& mesh, int order = 6);

} // namespace molt
