#include "hcplate/macro.hpp"

namespace hcp {

MacroSpaces build_macro_spaces(const MacroMesh& mesh)
{
    if (mesh.dirichlet_count() == 0) throw ConfigError("gamma_D is empty: the macroscopic operators are singular");
    MacroSpaces sp;
    sp.mesh = mesh;
    sp.es = macro_elements(mesh);
    const int nn = mesh.num_nodes();
    const std::vector<char> all(nn, 1);
    const auto on_gamma = [&](int v, int) { return mesh.dirichlet[v] != 0; };
    const auto none = [](int, int) { return false; };
    sp.memb = build_dofmap(nn, 2, identity_master(), all, on_gamma);
    sp.bend = build_dofmap(nn, 4, identity_master(), all, on_gamma);
    sp.bfs_all = build_dofmap(nn, 4, identity_master(), all, none);
    sp.nodal = build_dofmap(nn, 1, identity_master(), all, none);
    return sp;
}

SpMat MacroSpaces::mass_memb() const
{
    return assemble_matrix(memb, es, {fe::q1_2d_mass(1.0, mesh.hx(), mesh.hy(), 2)});
}

SpMat MacroSpaces::mass_bend() const { return assemble_matrix(bend, es, {fe::bfs_mass(1.0, mesh.hx(), mesh.hy())}); }

SpMat MacroSpaces::mass_bfs_all() const
{
    return assemble_matrix(bfs_all, es, {fe::bfs_mass(1.0, mesh.hx(), mesh.hy())});
}

SpMat MacroSpaces::mass_nodal() const
{
    return assemble_matrix(nodal, es, {fe::q1_2d_mass(1.0, mesh.hx(), mesh.hy(), 1)});
}

SpMat MacroSpaces::nodal_memb_mass(int c) const
{
    const Mat Mq = fe::q1_2d_mass(1.0, mesh.hx(), mesh.hy(), 1);
    Mat E = Mat::Zero(4, 8);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) E(a, 2 * b + c) = Mq(a, b);
    return assemble_cross(nodal, memb, es, {E});
}

SpMat MacroSpaces::bfs_all_bend_mass() const
{
    return assemble_cross(bfs_all, bend, es, {fe::bfs_mass(1.0, mesh.hx(), mesh.hy())});
}

std::vector<SpMat> MacroSpaces::memb_component_blocks() const
{
    const Mat Mq = fe::q1_2d_mass(1.0, mesh.hx(), mesh.hy(), 1);
    std::vector<SpMat> out;
    for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) {
            Mat E = Mat::Zero(8, 8);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) E(2 * a + c, 2 * b + d) = Mq(a, b);
            out.push_back(assemble_cross(memb, memb, es, {E}));
        }
    return out;
}

std::string to_string(MacroKind k)
{
    switch (k) {
    case MacroKind::memb: return "memb";
    case MacroKind::bend_decoupled: return "bend_decoupled";
    case MacroKind::bend_coupled: return "bend_coupled";
    }
    return "unknown";
}

MacroOperator macro_operator(MacroKind kind, const MacroSpaces& sp, const EffectiveTensor& tensor, double rho_mean)
{
    if (!(rho_mean > 0.0)) throw ConfigError("mass weight must be positive");
    const double hx = sp.mesh.hx(), hy = sp.mesh.hy();
    MacroOperator op;
    op.kind = kind;
    op.tensor = tensor;
    op.rho_mean = rho_mean;
    op.pair.description = to_string(kind);
    if (kind == MacroKind::memb) {
        op.K_memb = assemble_matrix(sp.memb, sp.es, {fe::q1_2d_membrane_stiffness(tensor.memb, hx, hy)});
        op.pair.K = op.K_memb;
        op.pair.M = rho_mean * sp.mass_memb();
        return op;
    }
    op.K_bend = assemble_matrix(sp.bend, sp.es, {fe::bfs_stiffness(tensor.bend, hx, hy)});
    op.pair.M = rho_mean * sp.mass_bend();
    op.K_memb = assemble_matrix(sp.memb, sp.es, {fe::q1_2d_membrane_stiffness(tensor.memb, hx, hy)});
    op.K_cross = assemble_cross(sp.memb, sp.bend, sp.es, {fe::q1_bfs_cross(tensor.coupling, hx, hy)});
    op.memb_solver = std::make_shared<SpdSolver>(op.K_memb);
    if (kind == MacroKind::bend_decoupled) {
        op.pair.K = op.K_bend;
        return op;
    }
    // Schur complement over the membrane field, one solve per bending dof.
    const int nb = sp.bend.ndof;
    const Mat cross = Mat(op.K_cross);
    Mat X(cross.rows(), nb);
    parallel_for(static_cast<std::size_t>(nb), [&](std::size_t j) {
        X.col(static_cast<Eigen::Index>(j)) = op.memb_solver->solve(Vec(cross.col(static_cast<Eigen::Index>(j))));
    });
    Mat S = Mat(op.K_bend) - cross.transpose() * X;
    S = 0.5 * (S + S.transpose());
    op.pair.K = S.sparseView(1e-300, 1.0);
    return op;
}

EigResult macro_eigs(const MacroOperator& op, int N, const EigWorkspace& ws_in)
{
    if (N < 1) throw ConfigError("macro_eigs needs N >= 1");
    EigWorkspace ws = ws_in;
    ws.N = std::min<int>(N, static_cast<int>(op.pair.K.rows()));
    if (op.kind == MacroKind::bend_coupled) return eigs_dense(op.pair.K, op.pair.M, ws.N);
    return eigs_smallest(op.pair.K, op.pair.M, ws);
}

Vec membrane_solve_for_bending(const MacroOperator& op, const Vec& b)
{
    if (!op.memb_solver) throw ConfigError("membrane_solve_for_bending needs a bending operator");
    if (op.tensor.coupling.norm() == 0.0) return Vec::Zero(op.K_memb.rows());
    return op.memb_solver->solve(Vec(-(op.K_cross * b)));
}

Vec nodal_values(const MacroSpaces& sp, MacroKind kind, const Vec& x, int comp)
{
    const int nn = sp.mesh.num_nodes();
    Vec out = Vec::Zero(nn);
    for (int v = 0; v < nn; ++v) {
        const int d = kind == MacroKind::memb ? sp.memb.dof(v, comp) : sp.bend.dof(v, 0);
        if (d >= 0) out[v] = x[d];
    }
    return out;
}

} // namespace hcp
