#ifndef HCPLATE_FEM_HPP
#define HCPLATE_FEM_HPP

#include "hcplate/common.hpp"
#include "hcplate/geometry.hpp"

#include <Eigen/SparseCholesky>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hcp {

// ---------------------------------------------------------------------------
// Reference elements on rectangles / boxes. Local node a of a Q1 element is
// ax + 2*ay (+ 4*az), with ax, ay, az in {0,1}. Vector fields use local dof
// ncomp*a + c. BFS elements use local dof 4*a + d with d in
// {w, w_x, w_y, w_xy}.
// ---------------------------------------------------------------------------
namespace fe {

struct Rule1D {
    std::vector<double> x; // points on [0,1]
    std::vector<double> w; // weights summing to 1
};

Rule1D gauss01(int npts);

void q1_2d(double xi, double eta, double hx, double hy, double N[4], double dNx[4], double dNy[4]);
void q1_3d(double xi, double eta, double zeta, double hx, double hy, double hz, double N[8], double dNx[8],
           double dNy[8], double dNz[8]);
void bfs_2d(double xi, double eta, double hx, double hy, double N[16], double Nxx[16], double Nyy[16],
            double Nxy[16]);
void bfs_2d_grad(double xi, double eta, double hx, double hy, double Nx[16], double Ny[16]);

// 3D trilinear elasticity with the scaled gradient (s1 d1, s2 d2, s3 d3):
// integral of C sym(grad~ u) : sym(grad~ v) over the box.
Mat q1_3d_stiffness(const Mat6& C, double hx, double hy, double hz, const Vec3& grad_scale);
// Same form enriched by condensed incompatible bubble modes, which removes
// the parasitic shear stiffness of trilinear bricks in bending.
Mat q1_3d_stiffness_incompatible(const Mat6& C, double hx, double hy, double hz, const Vec3& grad_scale);
Mat q1_3d_mass(double rho, double hx, double hy, double hz, int ncomp);
// Strain-operator rows of the 3D element at a point (6 x 24).
Eigen::Matrix<double, 6, 24> q1_3d_strain(double xi, double eta, double zeta, double hx, double hy, double hz,
                                          const Vec3& grad_scale);

// 2D in-plane elasticity with a 3x3 reduced Voigt tensor (8 x 8).
Mat q1_2d_membrane_stiffness(const Mat3& D, double hx, double hy);
Eigen::Matrix<double, 3, 8> q1_2d_membrane_strain(double xi, double eta, double hx, double hy);
// 2D three-component field with 3D Voigt strain sym iota(grad_y u) (12 x 12).
Mat q1_2d_iota_stiffness(const Mat6& C, double hx, double hy);
Eigen::Matrix<double, 6, 12> q1_2d_iota_strain(double xi, double eta, double hx, double hy);
// Strain contribution of the transverse column i eta u: the complex strain
// of the strip form is B0 + i eta B1 with B1 returned here (6 x 12).
Eigen::Matrix<double, 6, 12> q1_2d_strip_column(double xi, double eta, double hx, double hy);
Mat q1_2d_mass(double rho, double hx, double hy, int ncomp);

Mat bfs_stiffness(const Mat3& D, double hx, double hy);
Mat bfs_mass(double rho, double hx, double hy);
Eigen::Matrix<double, 3, 16> bfs_curvature(double xi, double eta, double hx, double hy);
// Membrane (Q1, 8 dofs) x curvature (BFS, 16 dofs) cross block.
Mat q1_bfs_cross(const Mat3& Dc, double hx, double hy);

} // namespace fe

// ---------------------------------------------------------------------------
// Degrees of freedom and element sets
// ---------------------------------------------------------------------------
struct DofMap {
    int num_nodes = 0;
    int ncomp = 1;
    int ndof = 0;
    std::vector<int> index; // node*ncomp + comp -> dof, -1 when fixed or inactive

    int dof(int node, int comp) const { return index[static_cast<std::size_t>(node) * ncomp + comp]; }
};

// Builds a dof map. master(node) realizes periodic identification, active
// marks nodes touched by assembled elements, fixed(master, comp) marks
// constrained components.
DofMap build_dofmap(int num_nodes, int ncomp, const std::function<int(int)>& master,
                    const std::vector<char>& active, const std::function<bool(int, int)>& fixed);

struct ElementSet {
    int npe = 4;
    std::vector<int> conn; // element e uses conn[e*npe .. e*npe+npe)
    std::vector<int> type; // selects the element matrix / vector
    int size() const { return static_cast<int>(type.size()); }
    std::vector<char> active_nodes(int num_nodes) const;
};

// Element sets of the structured meshes. filter(e2d) selects planar elements;
// type(e2d, layer) assigns the element matrix type.
ElementSet cell2d_elements(const CellMesh& m, const std::function<bool(int)>& filter,
                           const std::function<int(int)>& type);
ElementSet cell3d_elements(const CellMesh& m, const std::function<bool(int)>& filter, int k_begin, int k_end,
                           const std::function<int(int, int)>& type);
ElementSet macro_elements(const MacroMesh& m);

int cell3d_node(const CellMesh& m, int i, int j, int k);

// Periodic master maps of the planar grid and of the prism grid.
std::function<int(int)> cell2d_master(const CellMesh& m);
std::function<int(int)> cell3d_master(const CellMesh& m);
std::function<int(int)> identity_master();

// Orthonormal basis of fields that are constant in each listed component
// (one column per component).
Mat constant_kernel(const DofMap& dm, const std::vector<int>& comps);

SpMat assemble_matrix(const DofMap& dm, const ElementSet& es, const std::vector<Mat>& elmats);
// Rectangular assembly: rows follow (row_map, row dofs), columns follow
// (col_map, col dofs). The element matrix has row_npe*row_ncomp rows.
SpMat assemble_cross(const DofMap& row_map, const DofMap& col_map, const ElementSet& es,
                     const std::vector<Mat>& elmats);
Vec assemble_vector(const DofMap& dm, const ElementSet& es, const std::vector<Vec>& elvecs);
// Per-element vectors (one per element, not per type).
Vec assemble_vector_per_element(const DofMap& dm, const ElementSet& es, const std::vector<Vec>& elvecs);

// Embeds a Hermitian matrix A + iS (A symmetric, S antisymmetric) into the
// real symmetric block matrix [[A, -S], [S, A]].
SpMat hermitian_embed(const SpMat& A, const SpMat& S);
SpMat block_diag2(const SpMat& M);

// ---------------------------------------------------------------------------
// Operators and solvers
// ---------------------------------------------------------------------------
struct SparseOperatorPair {
    SpMat K;
    SpMat M;
    Mat kernel_basis; // orthonormal, columns; empty when K is definite
    std::string description;
};

// Orthonormal basis of vectors v with v^T K v < tol * ||K|| v^T v, found by a
// shift-invert eigensolve of (K, I). At most max_dim vectors are searched.
Mat detect_kernel(const SpMat& K, int max_dim = 6, double tol = 1e-10);

enum class SolveMethod { direct, cg };

// Symmetric positive semidefinite solver. With a kernel basis Z the right
// side is projected onto range(K), a set of pivot dofs selected from Z is
// pinned, and the returned solution is orthogonal to the kernel.
class SpdSolver {
public:
    SpdSolver(const SpMat& K, const Mat& kernel = Mat(), SolveMethod method = SolveMethod::direct,
              double tol = 1e-10, int max_iter = 20000);
    // Safe to call concurrently. The relative residual is written to
    // *residual when requested.
    Vec solve(const Vec& rhs, double* residual = nullptr) const;
    Mat solve(const Mat& rhs, double* residual = nullptr) const;
    int size() const { return static_cast<int>(K_.rows()); }

private:
    Vec solve_direct(const Vec& r) const;
    Vec solve_cg(const Vec& r) const;

    SpMat K_;
    Mat Z_;
    SolveMethod method_;
    double tol_;
    int max_iter_;
    std::vector<int> keep_;
    std::vector<int> full_to_keep_;
    std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt_;
};

Vec solve_spd(const SparseOperatorPair& pair, const Vec& rhs, bool deflate_kernel,
              SolveMethod method = SolveMethod::direct);

enum class EigMethod { automatic, dense, shift_invert };

struct EigWorkspace {
    int N = 10;
    double tol = 1e-12; // normwise backward error of each returned pair
    EigMethod method = EigMethod::automatic;
    int dense_threshold = 4000;
    int block = 6;
    std::uint64_t seed = 12345;
    double sigma = 0.0;      // shift; a negative value is chosen when unset
    bool sigma_set = false;
};

struct EigResult {
    Vec values;  // ascending
    Mat vectors; // M-orthonormal columns, sign-normalized
    std::string method;
    int krylov_dim = 0;
    // Largest ||K v - lambda M v|| / ((||K||_1 + |lambda| ||M||_1) ||v||).
    double max_residual = 0.0;
};

EigResult eigs_smallest(const SpMat& K, const SpMat& M, const EigWorkspace& ws);
EigResult eigs_dense(const SpMat& K, const SpMat& M, int N);

} // namespace hcp

#endif
