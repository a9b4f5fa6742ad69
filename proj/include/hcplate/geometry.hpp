#ifndef HCPLATE_GEOMETRY_HPP
#define HCPLATE_GEOMETRY_HPP

#include "hcplate/common.hpp"

#include <array>
#include <string>
#include <vector>

namespace hcp {

enum class ShapeKind { disk, square };

struct InclusionShape {
    ShapeKind kind = ShapeKind::disk;
    double cx = 0.5;
    double cy = 0.5;
    double size = 0.3; // radius for a disk, half-side for a square

    bool contains(double x, double y) const;
    // Distance from the closed inclusion to the boundary of the unit cell.
    double boundary_margin() const;
    double analytic_area() const;
    // The disk has a C^{1,1} boundary; the square is only Lipschitz.
    bool smooth_boundary() const { return kind == ShapeKind::disk; }
};

// Structured mesh of the periodic unit cell Y = [0,1)^2, or of the prism
// I x Y with I = (-1/2, 1/2) split into nz uniform layers when dim == 3.
// Element and node indices are lexicographic: element (i,j) has id i + n*j,
// node (i,j[,k]) has id i + (n+1)*(j + (n+1)*k).
class CellMesh {
public:
    int n = 0;
    int dim = 2;
    int nz = 0;
    InclusionShape shape;
    bool validation_no_inclusion = false;
    // Per planar element flag: true for the soft inclusion Y0. The prism
    // reuses the same flag in every layer.
    std::vector<char> soft;

    double h() const { return 1.0 / n; }
    double hz() const { return 1.0 / nz; }
    int num_elements2d() const { return n * n; }
    int num_nodes2d() const { return (n + 1) * (n + 1); }
    int node2d(int i, int j) const { return i + (n + 1) * j; }
    // Periodic master of a planar node.
    int master2d(int i, int j) const { return (i % n) + (n + 1) * (j % n); }
    int soft_count() const;
    double soft_fraction() const;
    double stiff_fraction() const { return 1.0 - soft_fraction(); }
    bool is_soft(int e) const { return soft[e] != 0; }

    // Planar nodes whose incident elements are all soft (free nodes of the
    // zero-trace spaces on Y0).
    std::vector<char> inclusion_interior_nodes() const;
    // Planar nodes of soft elements that also touch a stiff element.
    std::vector<int> inclusion_boundary_nodes() const;
    // Slave node -> master node map for the planar grid.
    std::vector<int> periodic_map() const;
};

CellMesh build_cell_mesh(const InclusionShape& shape, int n, int dim, int nz);

// Mesh with no inclusion at all. Only used by analytic validation tests.
CellMesh build_cell_mesh_no_inclusion(int n, int dim, int nz);

enum class Edge { left, right, bottom, top };

Edge parse_edge(const std::string& s);

// Rectangle [0,L1] x [0,L2] with n1 x n2 elements; nodes are numbered
// i + (n1+1)*j.
class MacroMesh {
public:
    double L1 = 1.0;
    double L2 = 1.0;
    int n1 = 0;
    int n2 = 0;
    std::vector<Edge> gamma_D;
    std::vector<char> dirichlet; // per node

    double hx() const { return L1 / n1; }
    double hy() const { return L2 / n2; }
    int num_nodes() const { return (n1 + 1) * (n2 + 1); }
    int num_elements() const { return n1 * n2; }
    int node(int i, int j) const { return i + (n1 + 1) * j; }
    double x(int i) const { return i * hx(); }
    double y(int j) const { return j * hy(); }
    int dirichlet_count() const;
};

MacroMesh build_macro_mesh(double L1, double L2, int n1, int n2, const std::vector<Edge>& gamma_D);

} // namespace hcp

#endif
