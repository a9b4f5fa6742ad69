#include "hcplate/fine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hcp {

std::string to_string(FineParity p)
{
    switch (p) {
    case FineParity::none: return "none";
    case FineParity::membrane: return "membrane";
    case FineParity::bending: return "bending";
    }
    return "unknown";
}

FineParity parse_fine_parity(const std::string& s)
{
    if (s == "none") return FineParity::none;
    if (s == "membrane") return FineParity::membrane;
    if (s == "bending") return FineParity::bending;
    throw ConfigError("unknown parity '" + s + "'");
}

double fine_contrast(MuScaling mu, double epsilon, double h)
{
    switch (mu) {
    case MuScaling::eps: return epsilon;
    case MuScaling::eps_h: return epsilon * h;
    case MuScaling::eps2: return epsilon * epsilon;
    }
    return epsilon;
}

double FineProblem::soft_fraction() const
{
    if (soft.empty()) return 0.0;
    return static_cast<double>(std::count(soft.begin(), soft.end(), 1)) / static_cast<double>(soft.size());
}

namespace {

int cell_count(double L, double eps, const char* name)
{
    const double r = L / eps;
    const int n = static_cast<int>(std::llround(r));
    if (n < 1 || std::abs(r - n) > 1e-9 * std::max(1.0, r))
        throw ConfigError(std::string("omega must hold an integer number of cells along ") + name);
    return n;
}

SpMat parity_basis(const FineProblem& fp, FineParity parity)
{
    std::vector<Triplet> t;
    int col = 0;
    for (int j = 0; j <= fp.n2; ++j)
        for (int i = 0; i <= fp.n1; ++i)
            for (int k = 0; 2 * k <= fp.nz; ++k) {
                const int mirror = fp.nz - k;
                for (int c = 0; c < 3; ++c) {
                    const bool in_plane = c < 2;
                    const double sign = (parity == FineParity::membrane) == in_plane ? 1.0 : -1.0;
                    const int d0 = fp.dm.dof(fp.node(i, j, k), c);
                    if (d0 < 0) continue;
                    if (mirror == k) {
                        if (sign < 0) continue;
                        t.emplace_back(d0, col++, 1.0);
                    } else {
                        t.emplace_back(d0, col, 1.0);
                        t.emplace_back(fp.dm.dof(fp.node(i, j, mirror), c), col, sign);
                        ++col;
                    }
                }
            }
    SpMat P(fp.dm.ndof, col);
    P.setFromTriplets(t.begin(), t.end());
    return P;
}

Mat nodal_field(const FineProblem& fp, const Vec& x)
{
    Mat u = Mat::Zero(fp.num_nodes(), 3);
    for (int v = 0; v < fp.num_nodes(); ++v)
        for (int c = 0; c < 3; ++c) {
            const int d = fp.dm.dof(v, c);
            if (d >= 0) u(v, c) = x[d];
        }
    return u;
}

} // namespace

FineProblem build_fine_problem(const FineSetup& s)
{
    s.mat.validate();
    if (!(s.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (s.cell_n < 1 || s.nz < 1) throw ConfigError("fine mesh resolution must be positive");
    if (s.gamma_D.empty()) throw ConfigError("gamma_D must contain at least one edge");
    if (s.regime.tau != 0 && s.regime.tau != 2) throw ConfigError("tau must be 0 or 2");
    FineProblem fp;
    fp.setup = s;
    fp.cells1 = cell_count(s.L1, s.epsilon, "x1");
    fp.cells2 = cell_count(s.L2, s.epsilon, "x2");
    fp.n1 = fp.cells1 * s.cell_n;
    fp.n2 = fp.cells2 * s.cell_n;
    fp.nz = s.nz;
    fp.hx = s.L1 / fp.n1;
    fp.hy = s.L2 / fp.n2;
    fp.hz = 1.0 / fp.nz;
    if (s.h > 0.0) {
        fp.h = s.h;
    } else {
        if (s.regime.delta != DeltaKind::finite || !(s.regime.delta_value > 0.0))
            throw ConfigError("set h explicitly unless delta is finite");
        fp.h = s.regime.delta_value * s.epsilon;
    }
    fp.tau = s.regime.tau;
    fp.mu_h = s.contrast ? *s.contrast : fine_contrast(s.regime.mu, s.epsilon, fp.h);
    if (!(fp.mu_h >= 0.0)) throw ConfigError("contrast must be nonnegative");

    const long ndof_estimate = 3L * fp.num_nodes();
    if (ndof_estimate > s.max_dofs)
        throw ConfigError("fine problem needs " + std::to_string(ndof_estimate) + " dofs, budget is " +
                          std::to_string(s.max_dofs));

    const CellMesh cell = s.no_inclusion ? build_cell_mesh_no_inclusion(s.cell_n, 2, 0)
                                         : build_cell_mesh(s.shape, s.cell_n, 2, 0);
    fp.soft.resize(static_cast<std::size_t>(fp.n1) * fp.n2);
    for (int j = 0; j < fp.n2; ++j)
        for (int i = 0; i < fp.n1; ++i)
            fp.soft[i + fp.n1 * j] = cell.is_soft((i % s.cell_n) + s.cell_n * (j % s.cell_n)) ? 1 : 0;

    fp.es.npe = 8;
    for (int k = 0; k < fp.nz; ++k)
        for (int j = 0; j < fp.n2; ++j)
            for (int i = 0; i < fp.n1; ++i) {
                for (int az = 0; az < 2; ++az)
                    for (int ay = 0; ay < 2; ++ay)
                        for (int ax = 0; ax < 2; ++ax) fp.es.conn.push_back(fp.node(i + ax, j + ay, k + az));
                fp.es.type.push_back(fp.soft[i + fp.n1 * j]);
            }

    auto on_gamma = [&](int v) {
        const int i = v % (fp.n1 + 1), j = (v / (fp.n1 + 1)) % (fp.n2 + 1);
        for (Edge e : s.gamma_D) {
            if ((e == Edge::left && i == 0) || (e == Edge::right && i == fp.n1) || (e == Edge::bottom && j == 0) ||
                (e == Edge::top && j == fp.n2))
                return true;
        }
        return false;
    };
    fp.dm = build_dofmap(fp.num_nodes(), 3, identity_master(), fp.es.active_nodes(fp.num_nodes()),
                         [&](int v, int) { return on_gamma(v); });

    const Vec3 scale(1.0, 1.0, 1.0 / fp.h);
    auto stiffness = [&](const Mat6& C) {
        return s.incompatible_modes ? fe::q1_3d_stiffness_incompatible(C, fp.hx, fp.hy, fp.hz, scale)
                                    : fe::q1_3d_stiffness(C, fp.hx, fp.hy, fp.hz, scale);
    };
    const double htau = std::pow(fp.h, -fp.tau);
    const Mat K1 = htau * stiffness(s.mat.C1);
    const Mat K0 = htau * stiffness(s.mat.C0 * (fp.mu_h * fp.mu_h));
    fp.full.K = assemble_matrix(fp.dm, fp.es, {K1, K0});
    fp.full.M = assemble_matrix(fp.dm, fp.es,
                                {fe::q1_3d_mass(s.mat.rho1, fp.hx, fp.hy, fp.hz, 3),
                                 fe::q1_3d_mass(s.mat.rho0, fp.hx, fp.hy, fp.hz, 3)});
    fp.full.description = "fine 3D operator, eps " + std::to_string(s.epsilon) + ", h " + std::to_string(fp.h);
    if (s.parity == FineParity::none) {
        fp.pair = fp.full;
    } else {
        fp.P = parity_basis(fp, s.parity);
        const SpMat Pt = fp.P.transpose();
        fp.pair.K = symmetrize(SpMat(Pt * fp.full.K * fp.P));
        fp.pair.M = symmetrize(SpMat(Pt * fp.full.M * fp.P));
        fp.pair.description = fp.full.description + ", " + to_string(s.parity) + " parity";
    }
    return fp;
}

EigResult fine_eigs(const FineProblem& fp, int N, EigWorkspace ws)
{
    const int n = static_cast<int>(fp.pair.K.rows());
    if (N < 1 || N > n) throw ConfigError("fine_eigs: N must lie in [1, number of dofs]");
    ws.N = N;
    EigResult r = eigs_smallest(fp.pair.K, fp.pair.M, ws);
    Mat vectors(3 * fp.num_nodes(), r.vectors.cols());
    for (int k = 0; k < r.vectors.cols(); ++k) {
        const Vec full = fp.P.size() > 0 ? Vec(fp.P * r.vectors.col(k)) : Vec(r.vectors.col(k));
        const Mat u = nodal_field(fp, full);
        Vec flat(3 * fp.num_nodes());
        for (int v = 0; v < fp.num_nodes(); ++v)
            for (int c = 0; c < 3; ++c) flat[3 * v + c] = u(v, c);
        normalize_sign(flat);
        vectors.col(k) = flat;
    }
    r.vectors = vectors;
    return r;
}

FineState fine_resolvent(const FineProblem& fp, double lambda, const LoadSpec& f)
{
    if (!(lambda > 0.0)) throw ConfigError("the resolvent parameter must be positive");
    const auto g = fe::gauss01(2);
    std::vector<Vec> elvecs;
    elvecs.reserve(fp.es.size());
    double N[8], dx[8], dy[8], dz[8];
    for (int k = 0; k < fp.nz; ++k)
        for (int j = 0; j < fp.n2; ++j)
            for (int i = 0; i < fp.n1; ++i) {
                Vec v = Vec::Zero(24);
                const bool soft = fp.soft[i + fp.n1 * j] != 0;
                const double cell = f.cell == CellProfile::uniform ? 1.0
                                    : (f.cell == CellProfile::soft) == soft ? 1.0
                                                                            : 0.0;
                if (cell != 0.0) {
                    for (int qk = 0; qk < 2; ++qk)
                        for (int qj = 0; qj < 2; ++qj)
                            for (int qi = 0; qi < 2; ++qi) {
                                const double x = (i + g.x[qi]) * fp.hx, y = (j + g.x[qj]) * fp.hy;
                                const double x3 = -0.5 + (k + g.x[qk]) * fp.hz;
                                const double trans = f.transverse == TransverseProfile::constant ? 1.0 : x3;
                                const double w = g.w[qi] * g.w[qj] * g.w[qk] * fp.hx * fp.hy * fp.hz * cell * trans *
                                                 f.macro_value(x, y, fp.setup.L1, fp.setup.L2);
                                fe::q1_3d(g.x[qi], g.x[qj], g.x[qk], fp.hx, fp.hy, fp.hz, N, dx, dy, dz);
                                for (int a = 0; a < 8; ++a)
                                    for (int c = 0; c < 3; ++c) v[3 * a + c] += w * f.amplitude[c] * N[a];
                            }
                }
                elvecs.push_back(std::move(v));
            }
    const Vec F = assemble_vector_per_element(fp.dm, fp.es, elvecs);
    Vec x;
    {
        const bool reduced = fp.P.size() > 0;
        const SpMat A = fp.pair.K + lambda * fp.pair.M;
        const Vec rhs = reduced ? Vec(fp.P.transpose() * F) : F;
        double res = 0.0;
        const Vec y = SpdSolver(A).solve(rhs, &res);
        if (!(res < 1e-8)) throw SolverError("fine resolvent solve did not converge");
        x = reduced ? Vec(fp.P * y) : y;
    }

    FineState st;
    st.u = nodal_field(fp, x);
    const int np = (fp.n1 + 1) * (fp.n2 + 1);
    st.transverse_average = Mat::Zero(np, 3);
    for (int k = 0; k <= fp.nz; ++k) {
        const double w = (k == 0 || k == fp.nz) ? 0.5 * fp.hz : fp.hz;
        st.transverse_average += w * st.u.middleRows(static_cast<Eigen::Index>(k) * np, np);
    }
    const int ncell = fp.cells1 * fp.cells2, cn = fp.setup.cell_n;
    st.cell_mean_stiff = Mat::Zero(ncell, 3);
    st.cell_mean_soft = Mat::Zero(ncell, 3);
    Vec vol_stiff = Vec::Zero(ncell), vol_soft = Vec::Zero(ncell);
    for (int k = 0; k < fp.nz; ++k)
        for (int j = 0; j < fp.n2; ++j)
            for (int i = 0; i < fp.n1; ++i) {
                const int c = (i / cn) + fp.cells1 * (j / cn);
                Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
                for (int az = 0; az < 2; ++az)
                    for (int ay = 0; ay < 2; ++ay)
                        for (int ax = 0; ax < 2; ++ax) mean += st.u.row(fp.node(i + ax, j + ay, k + az));
                const double vol = fp.hx * fp.hy * fp.hz;
                if (fp.soft[i + fp.n1 * j]) {
                    st.cell_mean_soft.row(c) += (vol / 8.0) * mean;
                    vol_soft[c] += vol;
                } else {
                    st.cell_mean_stiff.row(c) += (vol / 8.0) * mean;
                    vol_stiff[c] += vol;
                }
            }
    for (int c = 0; c < ncell; ++c) {
        if (vol_stiff[c] > 0.0) st.cell_mean_stiff.row(c) /= vol_stiff[c];
        if (vol_soft[c] > 0.0) st.cell_mean_soft.row(c) /= vol_soft[c];
        st.cell_x.push_back((c % fp.cells1 + 0.5) * fp.setup.epsilon);
        st.cell_y.push_back((c / fp.cells1 + 0.5) * fp.setup.epsilon);
    }
    Mat Ru(st.u.rows(), 3);
    for (int k = 0; k <= fp.nz; ++k) {
        const auto src = st.u.middleRows(static_cast<Eigen::Index>(fp.nz - k) * np, np);
        Ru.middleRows(static_cast<Eigen::Index>(k) * np, np).leftCols(2) = src.leftCols(2);
        Ru.middleRows(static_cast<Eigen::Index>(k) * np, np).col(2) = -src.col(2);
    }
    const double un = st.u.norm();
    st.membrane_parity_defect = un > 0.0 ? (st.u - Ru).norm() / un : 0.0;
    return st;
}

std::vector<double> distance_to_spectrum(const std::vector<double>& values, const LimitSpectrum& s)
{
    std::vector<double> out;
    for (double v : values) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& p : s.points) d = std::min(d, std::abs(v - p.lambda));
        for (double a : s.intervals_from) d = std::min(d, std::max(0.0, a - v));
        out.push_back(d);
    }
    return out;
}

} // namespace hcp
