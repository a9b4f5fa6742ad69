#include "hcplate/effective.hpp"

#include <mutex>

namespace hcp {

std::string to_string(DeltaKind k)
{
    switch (k) {
    case DeltaKind::zero:
        return "zero";
    case DeltaKind::finite:
        return "finite";
    case DeltaKind::infinite:
        return "infinite";
    }
    return "unknown";
}

Mat6 EffectiveTensor::full() const
{
    Mat6 F;
    F << memb, coupling, coupling.transpose(), bend;
    return F;
}

double EffectiveTensor::form(const Vec3& a, const Vec3& b) const
{
    return a.dot(memb * a) + 2.0 * a.dot(coupling * b) + b.dot(bend * b);
}

Mat polarize(int dim, const std::function<double(const Vec&)>& quad)
{
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j) pairs.emplace_back(i, j);
    std::vector<double> value(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t p) {
        Vec xi = Vec::Zero(dim);
        xi[pairs[p].first] += 1.0;
        xi[pairs[p].second] += 1.0;
        value[p] = quad(xi);
    });
    Vec diag(dim);
    for (std::size_t p = 0; p < pairs.size(); ++p)
        if (pairs[p].first == pairs[p].second) diag[pairs[p].first] = value[p] / 4.0;
    Mat Q(dim, dim);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs[p];
        Q(i, j) = Q(j, i) = i == j ? diag[i] : 0.5 * (value[p] - diag[i] - diag[j]);
    }
    return Q;
}

namespace {

// Places a 2D Voigt vector into the in-plane rows (11, 22, 12) of a 3D
// Voigt vector.
Eigen::Matrix<double, 6, 3> inplane_embedding()
{
    Eigen::Matrix<double, 6, 3> P = Eigen::Matrix<double, 6, 3>::Zero();
    P(0, 0) = 1.0;
    P(1, 1) = 1.0;
    P(5, 2) = 1.0;
    return P;
}

void check_no_inclusion_mode(const CellMesh& m)
{
    if (m.soft_count() == 0 && !m.validation_no_inclusion)
        throw ConfigError("cell mesh has an empty inclusion outside validation mode");
}

struct ResidualTracker {
    std::mutex mu;
    double worst = 0.0;
    void add(double r)
    {
        std::lock_guard<std::mutex> lock(mu);
        worst = std::max(worst, r);
    }
};

} // namespace

EffectiveTensor effective_delta(const MaterialSpec& mat, const CellMesh& mesh, double delta)
{
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be positive and finite");
    if (mesh.dim != 3) throw ConfigError("effective_delta needs a prism mesh");
    check_no_inclusion_mode(mesh);
    const int nz = mesh.nz;
    const double h = mesh.h(), hz = mesh.hz();
    const Vec3 scale(1.0, 1.0, 1.0 / delta);
    const auto stiff = [&](int e) { return !mesh.is_soft(e); };
    const ElementSet es = cell3d_elements(mesh, stiff, 0, nz, [](int, int k) { return k; });
    const int nn = (mesh.n + 1) * (mesh.n + 1) * (nz + 1);
    const DofMap dm = build_dofmap(nn, 3, cell3d_master(mesh), es.active_nodes(nn), [](int, int) { return false; });

    const Mat Ke = fe::q1_3d_stiffness(mat.C1, h, h, hz, scale);
    std::vector<Mat> kmats(nz, Ke);
    const SpMat K = assemble_matrix(dm, es, kmats);

    // Per-layer load matrices (24 x 6) and zero-corrector Gram (6 x 6).
    const auto g = fe::gauss01(2);
    const auto P = inplane_embedding();
    std::vector<Mat> R(nz, Mat::Zero(24, 6));
    Mat6 E0 = Mat6::Zero();
    const int nstiff = mesh.num_elements2d() - mesh.soft_count();
    for (int k = 0; k < nz; ++k) {
        for (int qz = 0; qz < 2; ++qz)
            for (int qy = 0; qy < 2; ++qy)
                for (int qx = 0; qx < 2; ++qx) {
                    const double w = g.w[qx] * g.w[qy] * g.w[qz] * h * h * hz;
                    const double x3 = -0.5 + (k + g.x[qz]) * hz;
                    Eigen::Matrix<double, 6, 6> S;
                    S << P, -x3 * P;
                    const auto B = fe::q1_3d_strain(g.x[qx], g.x[qy], g.x[qz], h, h, hz, scale);
                    R[k] += w * (B.transpose() * mat.C1 * S);
                    E0 += (w * nstiff) * (S.transpose() * mat.C1 * S);
                }
    }
    Mat Rg = Mat::Zero(dm.ndof, 6);
    for (int c = 0; c < 6; ++c) {
        std::vector<Vec> cols(nz);
        for (int k = 0; k < nz; ++k) cols[k] = R[k].col(c);
        Rg.col(c) = assemble_vector(dm, es, cols);
    }

    const SpdSolver solver(K, constant_kernel(dm, {0, 1, 2}));
    ResidualTracker track;
    const Mat Q = polarize(6, [&](const Vec& xi) {
        const Vec r = Rg * xi;
        double res = 0.0;
        const Vec x = solver.solve(Vec(-r), &res);
        track.add(res);
        return xi.dot(E0 * xi) + r.dot(x);
    });

    EffectiveTensor t;
    t.regime = DeltaKind::finite;
    t.delta = delta;
    t.memb = Q.topLeftCorner(3, 3);
    t.bend = Q.bottomRightCorner(3, 3);
    t.coupling = Q.topRightCorner(3, 3);
    t.zero_corrector = 0.5 * (E0 + E0.transpose());
    t.n = mesh.n;
    t.nz = nz;
    t.ndof = dm.ndof;
    t.max_residual = track.worst;
    return t;
}

EffectiveTensor effective_delta0(const MaterialSpec& mat, const CellMesh& mesh)
{
    check_no_inclusion_mode(mesh);
    const double h = mesh.h();
    const Mat3 Cr = reduced_tensor(mat.C1);
    const Mat3 Db = Cr / 12.0;
    const auto stiff = [&](int e) { return !mesh.is_soft(e); };
    const ElementSet es = cell2d_elements(mesh, stiff, [](int) { return 0; });
    const int nn = mesh.num_nodes2d();
    const double y1 = static_cast<double>(es.size()) * h * h;
    const auto g4 = fe::gauss01(4);
    ResidualTracker track;

    // Membrane block.
    const DofMap dm = build_dofmap(nn, 2, cell2d_master(mesh), es.active_nodes(nn), [](int, int) { return false; });
    const SpMat Km = assemble_matrix(dm, es, {fe::q1_2d_membrane_stiffness(Cr, h, h)});
    Mat Rm_e = Mat::Zero(8, 3);
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i)
            Rm_e += (g4.w[i] * g4.w[j] * h * h) *
                    (fe::q1_2d_membrane_strain(g4.x[i], g4.x[j], h, h).transpose() * Cr);
    Mat Rm(dm.ndof, 3);
    for (int c = 0; c < 3; ++c) Rm.col(c) = assemble_vector(dm, es, {Vec(Rm_e.col(c))});
    const SpdSolver sm(Km, constant_kernel(dm, {0, 1}));
    const Mat Qm = polarize(3, [&](const Vec& a) {
        const Vec r = Rm * a;
        double res = 0.0;
        const Vec x = sm.solve(Vec(-r), &res);
        track.add(res);
        return y1 * a.dot(Cr * a) + r.dot(x);
    });

    // Bending block.
    const DofMap db = build_dofmap(nn, 4, cell2d_master(mesh), es.active_nodes(nn), [](int, int) { return false; });
    const SpMat Kb = assemble_matrix(db, es, {fe::bfs_stiffness(Db, h, h)});
    Mat Rb_e = Mat::Zero(16, 3);
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i)
            Rb_e += (g4.w[i] * g4.w[j] * h * h) * (fe::bfs_curvature(g4.x[i], g4.x[j], h, h).transpose() * Db);
    Mat Rb(db.ndof, 3);
    for (int c = 0; c < 3; ++c) Rb.col(c) = assemble_vector(db, es, {Vec(Rb_e.col(c))});
    const SpdSolver sb(Kb, constant_kernel(db, {0}));
    const Mat Qb = polarize(3, [&](const Vec& b) {
        const Vec r = Rb * b;
        double res = 0.0;
        const Vec x = sb.solve(Vec(-r), &res);
        track.add(res);
        return y1 * b.dot(Db * b) + r.dot(x);
    });

    EffectiveTensor t;
    t.regime = DeltaKind::zero;
    t.memb = Qm;
    t.bend = Qb;
    t.zero_corrector.topLeftCorner<3, 3>() = y1 * Cr;
    t.zero_corrector.bottomRightCorner<3, 3>() = y1 * Db;
    t.n = mesh.n;
    t.ndof = dm.ndof + db.ndof;
    t.max_residual = track.worst;
    return t;
}

EffectiveTensor effective_deltainf(const MaterialSpec& mat, const CellMesh& mesh)
{
    check_no_inclusion_mode(mesh);
    const double h = mesh.h();
    const auto stiff = [&](int e) { return !mesh.is_soft(e); };
    const ElementSet es = cell2d_elements(mesh, stiff, [](int) { return 0; });
    const int nn = mesh.num_nodes2d();
    const double y1 = static_cast<double>(es.size()) * h * h;
    const auto P = inplane_embedding();
    // The transverse column g enters the Voigt strain as (33: g3, 23: g2,
    // 13: g1). Rescaling (w3, g) absorbs the factor two of the engineering
    // shear, so the minimum is unchanged.
    Eigen::Matrix<double, 6, 3> G = Eigen::Matrix<double, 6, 3>::Zero();
    G(4, 0) = 1.0;
    G(3, 1) = 1.0;
    G(2, 2) = 1.0;

    const DofMap dm = build_dofmap(nn, 3, cell2d_master(mesh), es.active_nodes(nn), [](int, int) { return false; });
    const SpMat Kww = assemble_matrix(dm, es, {fe::q1_2d_iota_stiffness(mat.C1, h, h)});
    const auto g2 = fe::gauss01(2);
    Mat Kwg_e = Mat::Zero(12, 3), Rw_e = Mat::Zero(12, 3);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            const auto B = fe::q1_2d_iota_strain(g2.x[i], g2.x[j], h, h);
            const double w = g2.w[i] * g2.w[j] * h * h;
            Kwg_e += w * (B.transpose() * mat.C1 * G);
            Rw_e += w * (B.transpose() * mat.C1 * P);
        }
    Mat Kwg(dm.ndof, 3), Rw(dm.ndof, 3);
    for (int c = 0; c < 3; ++c) {
        Kwg.col(c) = assemble_vector(dm, es, {Vec(Kwg_e.col(c))});
        Rw.col(c) = assemble_vector(dm, es, {Vec(Rw_e.col(c))});
    }
    const Mat3 Kgg = y1 * (G.transpose() * mat.C1 * G);
    const Mat3 Rg = y1 * (G.transpose() * mat.C1 * P);
    const Mat3 E0 = y1 * (P.transpose() * mat.C1 * P);

    const SpdSolver sw(Kww, constant_kernel(dm, {0, 1, 2}));
    double res0 = 0.0;
    const Mat KinvKwg = sw.solve(Kwg, &res0);
    const Mat3 S = Kgg - Kwg.transpose() * KinvKwg;
    const Eigen::LLT<Mat3> sllt(0.5 * (S + S.transpose()));
    if (sllt.info() != Eigen::Success) throw SolverError("bordered transverse block is not positive definite");
    ResidualTracker track;
    track.add(res0);
    const Mat Qm = polarize(3, [&](const Vec& a) {
        const Vec rw = Rw * a;
        const Vec3 rg = Rg * a;
        double res = 0.0;
        const Vec y = sw.solve(Vec(-rw), &res);
        track.add(res);
        // Block elimination of the bordered system [Kww Kwg; Kgw Kgg].
        const Vec3 gv = sllt.solve(Vec3(-rg - Kwg.transpose() * y));
        const Vec x = y - KinvKwg * gv;
        return a.dot(E0 * a) + rw.dot(x) + rg.dot(gv);
    });

    EffectiveTensor t;
    t.regime = DeltaKind::infinite;
    t.memb = Qm;
    t.bend = Qm / 12.0;
    t.zero_corrector.topLeftCorner<3, 3>() = E0;
    t.zero_corrector.bottomRightCorner<3, 3>() = E0 / 12.0;
    t.n = mesh.n;
    t.ndof = dm.ndof + 3;
    t.max_residual = track.worst;
    return t;
}

} // namespace hcp
