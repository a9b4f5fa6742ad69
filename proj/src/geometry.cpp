#include "hcplate/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hcp {

bool InclusionShape::contains(double x, double y) const
{
    const double dx = x - cx;
    const double dy = y - cy;
    if (kind == ShapeKind::disk) return dx * dx + dy * dy < size * size;
    return std::abs(dx) < size && std::abs(dy) < size;
}

double InclusionShape::boundary_margin() const
{
    return std::min({cx - size, 1.0 - cx - size, cy - size, 1.0 - cy - size});
}

double InclusionShape::analytic_area() const
{
    if (kind == ShapeKind::disk) return std::numbers::pi * size * size;
    return 4.0 * size * size;
}

int CellMesh::soft_count() const
{
    return static_cast<int>(std::count(soft.begin(), soft.end(), 1));
}

double CellMesh::soft_fraction() const
{
    return static_cast<double>(soft_count()) / num_elements2d();
}

std::vector<char> CellMesh::inclusion_interior_nodes() const
{
    std::vector<char> interior(num_nodes2d(), 0);
    for (int j = 1; j < n; ++j) {
        for (int i = 1; i < n; ++i) {
            const bool all_soft = is_soft((i - 1) + n * (j - 1)) && is_soft(i + n * (j - 1)) &&
                                  is_soft((i - 1) + n * j) && is_soft(i + n * j);
            interior[node2d(i, j)] = all_soft ? 1 : 0;
        }
    }
    return interior;
}

std::vector<int> CellMesh::inclusion_boundary_nodes() const
{
    const auto interior = inclusion_interior_nodes();
    std::vector<char> mark(num_nodes2d(), 0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            if (is_soft(i + n * j))
                for (int b = 0; b < 2; ++b)
                    for (int a = 0; a < 2; ++a) mark[node2d(i + a, j + b)] = 1;
    std::vector<int> out;
    for (int k = 0; k < num_nodes2d(); ++k)
        if (mark[k] && !interior[k]) out.push_back(k);
    return out;
}

std::vector<int> CellMesh::periodic_map() const
{
    std::vector<int> map(num_nodes2d());
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) map[node2d(i, j)] = master2d(i, j);
    return map;
}

namespace {

void check_resolution(int n, int dim, int nz)
{
    if (n < 4) throw ConfigError("cell mesh resolution must be at least 4");
    if (dim != 2 && dim != 3) throw ConfigError("cell mesh dimension must be 2 or 3");
    if (dim == 3 && nz < 2) throw ConfigError("prism mesh needs at least 2 layers");
}

} // namespace

CellMesh build_cell_mesh(const InclusionShape& shape, int n, int dim, int nz)
{
    check_resolution(n, dim, nz);
    if (!(shape.size > 0.0 && shape.size < 0.5))
        throw GeometryError("inclusion size must lie in (0, 0.5)");
    // One full element layer of the stiff phase must separate the inclusion
    // from the cell boundary so that the discrete Y1 stays connected.
    if (shape.boundary_margin() < 1.0 / n)
        throw GeometryError("inclusion touches the cell boundary at this resolution (margin " +
                            std::to_string(shape.boundary_margin()) + " < 1/n)");
    CellMesh m;
    m.n = n;
    m.dim = dim;
    m.nz = dim == 3 ? nz : 0;
    m.shape = shape;
    m.soft.assign(static_cast<std::size_t>(n) * n, 0);
    const double h = 1.0 / n;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            m.soft[i + n * j] = shape.contains((i + 0.5) * h, (j + 0.5) * h) ? 1 : 0;
    if (m.soft_count() == 0) throw GeometryError("inclusion contains no element centroid");
    return m;
}

CellMesh build_cell_mesh_no_inclusion(int n, int dim, int nz)
{
    check_resolution(n, dim, nz);
    CellMesh m;
    m.n = n;
    m.dim = dim;
    m.nz = dim == 3 ? nz : 0;
    m.validation_no_inclusion = true;
    m.soft.assign(static_cast<std::size_t>(n) * n, 0);
    return m;
}

Edge parse_edge(const std::string& s)
{
    if (s == "left") return Edge::left;
    if (s == "right") return Edge::right;
    if (s == "bottom") return Edge::bottom;
    if (s == "top") return Edge::top;
    throw ConfigError("unknown boundary edge '" + s + "'");
}

int MacroMesh::dirichlet_count() const
{
    return static_cast<int>(std::count(dirichlet.begin(), dirichlet.end(), 1));
}

MacroMesh build_macro_mesh(double L1, double L2, int n1, int n2, const std::vector<Edge>& gamma_D)
{
    if (!(L1 > 0.0 && L2 > 0.0)) throw ConfigError("macro domain lengths must be positive");
    if (n1 < 2 || n2 < 2) throw ConfigError("macro mesh needs at least 2 elements per side");
    if (gamma_D.empty()) throw ConfigError("Dirichlet boundary gamma_D is empty");
    MacroMesh m;
    m.L1 = L1;
    m.L2 = L2;
    m.n1 = n1;
    m.n2 = n2;
    m.gamma_D = gamma_D;
    m.dirichlet.assign(m.num_nodes(), 0);
    for (int j = 0; j <= n2; ++j) {
        for (int i = 0; i <= n1; ++i) {
            bool d = false;
            for (Edge e : gamma_D) {
                d = d || (e == Edge::left && i == 0) || (e == Edge::right && i == n1) ||
                    (e == Edge::bottom && j == 0) || (e == Edge::top && j == n2);
            }
            m.dirichlet[m.node(i, j)] = d ? 1 : 0;
        }
    }
    return m;
}

} // namespace hcp
