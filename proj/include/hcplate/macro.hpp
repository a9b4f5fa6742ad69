#ifndef HCPLATE_MACRO_HPP
#define HCPLATE_MACRO_HPP

#include "hcplate/effective.hpp"

#include <memory>

namespace hcp {

// Finite element spaces on the macroscopic rectangle.
//   memb    Q1 vector field (2 components), zero on gamma_D
//   bend    BFS scalar (w, w_x, w_y, w_xy), clamped on gamma_D
//   bfs_all BFS scalar without constraints
//   nodal   Q1 scalar without constraints (pointwise fields in L2)
struct MacroSpaces {
    MacroMesh mesh;
    ElementSet es;
    DofMap memb;
    DofMap bend;
    DofMap bfs_all;
    DofMap nodal;

    // Unit-density mass matrices of each space.
    SpMat mass_memb() const;
    SpMat mass_bend() const;
    SpMat mass_bfs_all() const;
    SpMat mass_nodal() const;
    // Cross mass rows = nodal space, columns = memb dofs of component c.
    SpMat nodal_memb_mass(int c) const;
    // Cross mass rows = bfs_all, columns = bend (the clamped subspace).
    SpMat bfs_all_bend_mass() const;
    // Component blocks M_cd of the memb mass (c test, d trial).
    std::vector<SpMat> memb_component_blocks() const;
};

MacroSpaces build_macro_spaces(const MacroMesh& mesh);

enum class MacroKind { memb, bend_decoupled, bend_coupled };

std::string to_string(MacroKind k);

struct MacroOperator {
    MacroKind kind = MacroKind::memb;
    EffectiveTensor tensor;
    double rho_mean = 1.0;
    // Stiffness and rho_mean-weighted mass on the kind's space.
    SparseOperatorPair pair;
    // Blocks of the coupled form: membrane stiffness, membrane x bending
    // cross block, and the factorized membrane solver.
    SpMat K_memb;
    SpMat K_cross;
    SpMat K_bend;
    std::shared_ptr<SpdSolver> memb_solver;
};

// memb uses tensor.memb; bend_decoupled uses tensor.bend; bend_coupled forms
// the Schur complement K_bend - K_cross^T K_memb^{-1} K_cross with one
// membrane solve per bending basis function.
MacroOperator macro_operator(MacroKind kind, const MacroSpaces& sp, const EffectiveTensor& tensor, double rho_mean);

// Eigenpairs of the stiffness against the rho_mean-weighted mass.
EigResult macro_eigs(const MacroOperator& op, int N, const EigWorkspace& ws = {});

// Membrane field a^b solving K_memb a = -K_cross b (zero when the coupling
// block vanishes).
Vec membrane_solve_for_bending(const MacroOperator& op, const Vec& b);

// Nodal values (w for BFS, component c for memb) for plotting.
Vec nodal_values(const MacroSpaces& sp, MacroKind kind, const Vec& x, int comp = 0);

} // namespace hcp

#endif
