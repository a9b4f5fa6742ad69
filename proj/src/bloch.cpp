#include "hcplate/bloch.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hcp {

std::string to_string(BlochOperator op)
{
    switch (op) {
    case BlochOperator::full_delta:
        return "full_delta";
    case BlochOperator::memb_delta:
        return "memb_delta";
    case BlochOperator::bend_delta:
        return "bend_delta";
    case BlochOperator::memb_delta0:
        return "memb_delta0";
    case BlochOperator::bend_delta0:
        return "bend_delta0";
    case BlochOperator::memb_deltainf:
        return "memb_deltainf";
    case BlochOperator::full_deltainf:
        return "full_deltainf";
    }
    return "unknown";
}

BlochOperator parse_bloch_operator(const std::string& s)
{
    static const std::map<std::string, BlochOperator> table{
        {"full_delta", BlochOperator::full_delta},       {"memb_delta", BlochOperator::memb_delta},
        {"bend_delta", BlochOperator::bend_delta},       {"memb_delta0", BlochOperator::memb_delta0},
        {"bend_delta0", BlochOperator::bend_delta0},     {"memb_deltainf", BlochOperator::memb_deltainf},
        {"full_deltainf", BlochOperator::full_deltainf}};
    const auto it = table.find(s);
    if (it == table.end()) throw ConfigError("unknown inclusion operator '" + s + "'");
    return it->second;
}

int tracked_components(BlochOperator op)
{
    switch (op) {
    case BlochOperator::full_delta:
    case BlochOperator::full_deltainf:
        return 3;
    case BlochOperator::memb_delta:
    case BlochOperator::memb_delta0:
    case BlochOperator::memb_deltainf:
        return 2;
    case BlochOperator::bend_delta:
    case BlochOperator::bend_delta0:
        return 1;
    }
    return 0;
}

bool needs_prism(BlochOperator op)
{
    return op == BlochOperator::full_delta || op == BlochOperator::memb_delta || op == BlochOperator::bend_delta;
}

namespace {

Mat3 plane_strain_block(const Mat6& C)
{
    const int idx[3] = {0, 1, 5};
    Mat3 D;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) D(a, b) = C(idx[a], idx[b]);
    return D;
}

Mat assemble_means(const DofMap& dm, const ElementSet& es, const std::vector<Vec>& elvec_per_comp)
{
    Mat F(dm.ndof, static_cast<int>(elvec_per_comp.size()));
    for (std::size_t c = 0; c < elvec_per_comp.size(); ++c)
        F.col(static_cast<int>(c)) = assemble_vector(dm, es, {elvec_per_comp[c]});
    return F;
}

void record_dofs(BlochProblem& p, const DofMap& dm)
{
    p.dof_node.assign(dm.ndof, -1);
    p.dof_comp.assign(dm.ndof, -1);
    for (int v = 0; v < dm.num_nodes; ++v)
        for (int c = 0; c < dm.ncomp; ++c) {
            const int d = dm.dof(v, c);
            if (d < 0) continue;
            p.dof_node[d] = v;
            p.dof_comp[d] = c;
        }
}

} // namespace

BlochProblem assemble_bloch(const MaterialSpec& mat, const CellMesh& mesh, BlochOperator op, double delta)
{
    if (needs_prism(op)) {
        if (mesh.dim != 3) throw ConfigError(to_string(op) + " needs a prism mesh");
        if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be positive and finite");
    }
    if (mesh.soft_count() == 0) throw GeometryError("inclusion operator needs a nonempty soft region");
    const auto interior = mesh.inclusion_interior_nodes();
    if (std::none_of(interior.begin(), interior.end(), [](char c) { return c != 0; }))
        throw GeometryError("inclusion has no interior nodes at this resolution");

    const int n = mesh.n;
    const double h = mesh.h();
    const auto soft = [&](int e) { return mesh.is_soft(e); };
    const int plane = (n + 1) * (n + 1);

    BlochProblem p;
    p.op = op;
    p.delta = delta;
    p.n = n;
    p.nz = mesh.dim == 3 ? mesh.nz : 0;
    p.soft_area = mesh.soft_count() * h * h;
    p.rho0_mean = mat.rho0 * p.soft_area;
    const int tracked = tracked_components(op);

    if (needs_prism(op)) {
        const int nz = mesh.nz;
        const double hz = mesh.hz();
        const bool half = op != BlochOperator::full_delta;
        if (half && nz % 2 != 0) throw ConfigError("parity-restricted operators need an even layer count");
        const int k0 = half ? nz / 2 : 0;
        const ElementSet es = cell3d_elements(mesh, soft, k0, nz, [](int, int) { return 0; });
        const int nn = plane * (nz + 1);
        auto fixed = [&](int v, int c) {
            if (!interior[v % plane]) return true;
            if (half && v / plane == k0) {
                if (op == BlochOperator::memb_delta) return c == 2;
                return c != 2;
            }
            return false;
        };
        const DofMap dm = build_dofmap(nn, 3, identity_master(), es.active_nodes(nn), fixed);
        p.pair.K = assemble_matrix(dm, es, {fe::q1_3d_stiffness(mat.C0, h, h, hz, Vec3(1.0, 1.0, 1.0 / delta))});
        p.pair.M = assemble_matrix(dm, es, {fe::q1_3d_mass(mat.rho0, h, h, hz, 3)});
        // Half-prism modes extend by parity to the full prism with norm
        // sqrt(2); the full-domain mean is sqrt(2) times the half integral.
        const double factor = half ? std::sqrt(2.0) : 1.0;
        if (op == BlochOperator::full_delta) p.components = {0, 1, 2};
        if (op == BlochOperator::memb_delta) p.components = {0, 1};
        if (op == BlochOperator::bend_delta) p.components = {2};
        std::vector<Vec> ev;
        for (int c : p.components) {
            Vec v = Vec::Zero(24);
            for (int a = 0; a < 8; ++a) v[3 * a + c] = factor * mat.rho0 * h * h * hz / 8.0;
            ev.push_back(v);
        }
        p.F = assemble_means(dm, es, ev);
        record_dofs(p, dm);
        // x3-weighted integrals, one element vector per layer.
        const ElementSet es_layer = cell3d_elements(mesh, soft, k0, nz, [](int, int k) { return k; });
        std::vector<Vec> evx3;
        // Tracked components of the parity variants are even in x3, so
        // their x3-moments over the full prism vanish.
        for (int c : p.components) {
            if (half) {
                evx3.push_back(Vec::Zero(dm.ndof));
                continue;
            }
            std::vector<Vec> per_layer;
            for (int k = 0; k < nz; ++k) {
                const double z0 = -0.5 + k * hz;
                const double mz[2] = {hz * (0.5 * z0 + hz / 6.0), hz * (0.5 * z0 + hz / 3.0)};
                Vec v = Vec::Zero(24);
                for (int a = 0; a < 8; ++a) v[3 * a + c] = factor * mat.rho0 * h * h / 4.0 * mz[a / 4];
                per_layer.push_back(v);
            }
            evx3.push_back(assemble_vector(dm, es_layer, per_layer));
        }
        p.Fx3 = Mat(dm.ndof, static_cast<int>(evx3.size()));
        for (std::size_t c = 0; c < evx3.size(); ++c) p.Fx3.col(static_cast<int>(c)) = evx3[c];
        p.pair.description = to_string(op) + " on the prism";
        return p;
    }

    const ElementSet es = cell2d_elements(mesh, soft, [](int) { return 0; });
    const int nn = plane;
    auto fixed = [&](int v, int) { return !interior[v]; };
    if (op == BlochOperator::bend_delta0) {
        const DofMap dm = build_dofmap(nn, 4, identity_master(), es.active_nodes(nn), fixed);
        const Mat3 D = reduced_tensor(mat.C0) / 12.0;
        p.pair.K = assemble_matrix(dm, es, {fe::bfs_stiffness(D, h, h)});
        p.pair.M = assemble_matrix(dm, es, {fe::bfs_mass(mat.rho0, h, h)});
        Vec v = Vec::Zero(16);
        const auto g = fe::gauss01(4);
        double N[16], xx[16], yy[16], xy[16];
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) {
                fe::bfs_2d(g.x[i], g.x[j], h, h, N, xx, yy, xy);
                for (int a = 0; a < 16; ++a) v[a] += g.w[i] * g.w[j] * h * h * mat.rho0 * N[a];
            }
        p.components = {0};
        p.F = assemble_means(dm, es, {v});
        record_dofs(p, dm);
        p.pair.description = "bend_delta0 on H2_0(Y0)";
        return p;
    }
    const int ncomp = op == BlochOperator::full_deltainf ? 3 : 2;
    const DofMap dm = build_dofmap(nn, ncomp, identity_master(), es.active_nodes(nn), fixed);
    if (op == BlochOperator::memb_delta0)
        p.pair.K = assemble_matrix(dm, es, {fe::q1_2d_membrane_stiffness(reduced_tensor(mat.C0), h, h)});
    else if (op == BlochOperator::memb_deltainf)
        p.pair.K = assemble_matrix(dm, es, {fe::q1_2d_membrane_stiffness(plane_strain_block(mat.C0), h, h)});
    else
        p.pair.K = assemble_matrix(dm, es, {fe::q1_2d_iota_stiffness(mat.C0, h, h)});
    p.pair.M = assemble_matrix(dm, es, {fe::q1_2d_mass(mat.rho0, h, h, ncomp)});
    std::vector<Vec> ev;
    for (int c = 0; c < tracked; ++c) {
        p.components.push_back(c);
        Vec v = Vec::Zero(4 * ncomp);
        for (int a = 0; a < 4; ++a) v[ncomp * a + c] = mat.rho0 * h * h / 4.0;
        ev.push_back(v);
    }
    p.F = assemble_means(dm, es, ev);
    record_dofs(p, dm);
    p.pair.description = to_string(op) + " on Y0";
    return p;
}

BlochSpectrum bloch_spectrum(const BlochProblem& prob, const EigWorkspace& ws_in, const ClassifyOptions& opt)
{
    EigWorkspace ws = ws_in;
    const int ndof = static_cast<int>(prob.pair.K.rows());
    if (ws.N > ndof) throw ConfigError("requested " + std::to_string(ws.N) + " modes but the inclusion space has " +
                                       std::to_string(ndof) + " degrees of freedom");
    const EigResult r = eigs_smallest(prob.pair.K, prob.pair.M, ws);
    BlochSpectrum s;
    s.op = prob.op;
    s.delta = prob.delta;
    s.values = r.values;
    s.modes = r.vectors;
    s.means = (prob.F.transpose() * r.vectors).transpose();
    if (prob.Fx3.size() > 0) s.means_x3 = (prob.Fx3.transpose() * r.vectors).transpose();
    s.rho0_mean = prob.rho0_mean;
    s.method = r.method;
    s.max_residual = r.max_residual;
    const int N = s.size();
    s.cluster.assign(N, 0);
    s.coupled.assign(N, 0);
    int cid = 0;
    for (int i = 1; i < N; ++i) {
        const double gap = (s.values[i] - s.values[i - 1]) / std::max(std::abs(s.values[i]), 1e-300);
        if (gap >= opt.cluster_gap) ++cid;
        s.cluster[i] = cid;
    }
    const double zero = opt.zero_mean * prob.rho0_mean;
    for (int c = 0; c <= cid; ++c) {
        bool any = false;
        for (int i = 0; i < N; ++i)
            if (s.cluster[i] == c && s.means.row(i).norm() > zero) any = true;
        for (int i = 0; i < N; ++i)
            if (s.cluster[i] == c) s.coupled[i] = any ? 1 : 0;
    }
    return s;
}

std::vector<double> BlochSpectrum::pole_values() const
{
    std::vector<double> out;
    int last = -1;
    for (int i = 0; i < size(); ++i) {
        if (!coupled[i] || cluster[i] == last) continue;
        last = cluster[i];
        double sum = 0.0;
        int cnt = 0;
        for (int j = i; j < size() && cluster[j] == cluster[i]; ++j, ++cnt) sum += values[j];
        out.push_back(sum / cnt);
    }
    return out;
}

std::vector<Mat> BlochSpectrum::pole_residues() const
{
    std::vector<Mat> out;
    int last = -1;
    for (int i = 0; i < size(); ++i) {
        if (!coupled[i] || cluster[i] == last) continue;
        last = cluster[i];
        Mat R = Mat::Zero(means.cols(), means.cols());
        for (int j = i; j < size() && cluster[j] == cluster[i]; ++j)
            R += means.row(j).transpose() * means.row(j);
        out.push_back(0.5 * (R + R.transpose()));
    }
    return out;
}

std::vector<double> BlochSpectrum::uncoupled_values() const
{
    std::vector<double> out;
    int last = -1;
    for (int i = 0; i < size(); ++i) {
        if (coupled[i] || cluster[i] == last) continue;
        last = cluster[i];
        out.push_back(values[i]);
    }
    return out;
}

std::vector<Mat> completeness_partial_sums(const BlochSpectrum& s)
{
    std::vector<Mat> out;
    Mat S = Mat::Zero(s.means.cols(), s.means.cols());
    for (int i = 0; i < s.size(); ++i) {
        S += s.means.row(i).transpose() * s.means.row(i);
        out.push_back(S);
    }
    return out;
}

Mat completeness_limit(const BlochProblem& prob)
{
    SpdSolver solver(prob.pair.M);
    const Mat X = solver.solve(prob.F);
    const Mat L = prob.F.transpose() * X;
    return 0.5 * (L + L.transpose());
}

StripProblem assemble_strip(const MaterialSpec& mat, const CellMesh& mesh)
{
    if (mesh.soft_count() == 0) throw GeometryError("strip operator needs a nonempty soft region");
    const auto interior = mesh.inclusion_interior_nodes();
    const double h = mesh.h();
    const ElementSet es = cell2d_elements(mesh, [&](int e) { return mesh.is_soft(e); }, [](int) { return 0; });
    const int nn = mesh.num_nodes2d();
    const DofMap dm =
        build_dofmap(nn, 3, identity_master(), es.active_nodes(nn), [&](int v, int) { return !interior[v]; });
    if (dm.ndof == 0) throw GeometryError("inclusion has no interior nodes at this resolution");
    const auto g = fe::gauss01(2);
    Mat K00 = Mat::Zero(12, 12), K11 = Mat::Zero(12, 12), K01 = Mat::Zero(12, 12);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            const double w = g.w[i] * g.w[j] * h * h;
            const auto B0 = fe::q1_2d_iota_strain(g.x[i], g.x[j], h, h);
            const auto B1 = fe::q1_2d_strip_column(g.x[i], g.x[j], h, h);
            K00 += w * (B0.transpose() * mat.C0 * B0);
            K11 += w * (B1.transpose() * mat.C0 * B1);
            K01 += w * (B0.transpose() * mat.C0 * B1);
        }
    StripProblem sp;
    sp.K00 = assemble_matrix(dm, es, {K00});
    sp.K11 = assemble_matrix(dm, es, {K11});
    sp.K01 = assemble_cross(dm, dm, es, {K01});
    sp.M = assemble_matrix(dm, es, {fe::q1_2d_mass(mat.rho0, h, h, 3)});
    return sp;
}

double strip_alpha1(const StripProblem& sp, double eta)
{
    const SpMat A = sp.K00 + (eta * eta) * sp.K11;
    const SpMat K01t = sp.K01.transpose();
    const SpMat S = eta * (sp.K01 - K01t);
    const SpMat H = hermitian_embed(A, S);
    const SpMat M2 = block_diag2(sp.M);
    EigWorkspace ws;
    ws.N = 2;
    const EigResult r = eigs_smallest(H, M2, ws);
    return r.values[0];
}

StripCurve strip_bottom_m0(const StripProblem& sp, double eta_max, int npts)
{
    if (npts < 2 || !(eta_max > 0.0)) throw ConfigError("strip eta grid needs at least 2 points and eta_max > 0");
    StripCurve c;
    c.eta.resize(npts);
    c.alpha1.resize(npts);
    parallel_for(static_cast<std::size_t>(npts), [&](std::size_t i) {
        c.eta[i] = eta_max * static_cast<double>(i) / (npts - 1);
        c.alpha1[i] = strip_alpha1(sp, c.eta[i]);
    });
    const int imin = static_cast<int>(std::min_element(c.alpha1.begin(), c.alpha1.end()) - c.alpha1.begin());
    c.m0 = c.alpha1[imin];
    c.eta_min = c.eta[imin];
    // Golden-section refinement on the bracketing grid cells.
    double a = c.eta[std::max(0, imin - 1)], b = c.eta[std::min(npts - 1, imin + 1)];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = strip_alpha1(sp, x1), f2 = strip_alpha1(sp, x2);
    for (int it = 0; it < 80 && (b - a) > 1e-8 * (1.0 + b); ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = strip_alpha1(sp, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = strip_alpha1(sp, x2);
        }
    }
    const double xr = f1 < f2 ? x1 : x2;
    const double fr = std::min(f1, f2);
    if (fr < c.m0) {
        c.m0 = fr;
        c.eta_min = xr;
    }
    return c;
}

} // namespace hcp
