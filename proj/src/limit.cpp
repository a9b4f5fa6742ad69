#include "hcplate/limit.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hcp {

// ---------------------------------------------------------------------------
// Regimes
// ---------------------------------------------------------------------------
std::string to_string(MuScaling m)
{
    switch (m) {
    case MuScaling::eps: return "eps";
    case MuScaling::eps_h: return "eps_h";
    case MuScaling::eps2: return "eps2";
    }
    return "unknown";
}

std::string to_string(KappaKind k)
{
    switch (k) {
    case KappaKind::none: return "none";
    case KappaKind::zero: return "0";
    case KappaKind::finite: return "finite";
    case KappaKind::infinite: return "inf";
    }
    return "unknown";
}

namespace {

template <class T>
T lookup(const std::map<std::string, T>& table, const std::string& s, const std::string& what)
{
    const auto it = table.find(s);
    if (it == table.end()) throw ConfigError("unknown " + what + " '" + s + "'");
    return it->second;
}

} // namespace

MuScaling parse_mu_scaling(const std::string& s)
{
    return lookup<MuScaling>({{"eps", MuScaling::eps}, {"eps_h", MuScaling::eps_h}, {"eps2", MuScaling::eps2}}, s,
                             "contrast scaling");
}

KappaKind parse_kappa(const std::string& s)
{
    return lookup<KappaKind>({{"none", KappaKind::none},
                              {"0", KappaKind::zero},
                              {"finite", KappaKind::finite},
                              {"inf", KappaKind::infinite}},
                             s, "kappa kind");
}

DeltaKind parse_delta_kind(const std::string& s)
{
    return lookup<DeltaKind>({{"0", DeltaKind::zero},
                              {"zero", DeltaKind::zero},
                              {"finite", DeltaKind::finite},
                              {"inf", DeltaKind::infinite},
                              {"infinite", DeltaKind::infinite}},
                             s, "delta kind");
}

int regime_row(const RegimeConfig& r)
{
    if (r.tau != 0 && r.tau != 2) throw ConfigError("tau must be 0 or 2");
    const std::string where = " (delta " + to_string(r.delta) + ", mu " + to_string(r.mu) +
                              ", tau " + std::to_string(r.tau) + ")";
    if (r.delta == DeltaKind::finite && !(r.delta_value > 0.0 && std::isfinite(r.delta_value)))
        throw ConfigError("finite delta must be positive");
    const bool kappa_row = r.delta == DeltaKind::zero && r.mu == MuScaling::eps && r.tau == 0;
    if (!kappa_row && r.kappa != KappaKind::none && r.delta != DeltaKind::zero)
        throw ConfigError("kappa is only meaningful for delta = 0" + where);
    switch (r.delta) {
    case DeltaKind::finite:
        if (r.mu == MuScaling::eps) return r.tau == 2 ? 1 : 2;
        if (r.mu == MuScaling::eps_h && r.tau == 2) return 3;
        break;
    case DeltaKind::zero:
        if (kappa_row) {
            if (r.kappa == KappaKind::infinite) return 4;
            if (r.kappa == KappaKind::finite) {
                if (!(r.kappa_value > 0.0 && std::isfinite(r.kappa_value)))
                    throw ConfigError("finite kappa must be positive");
                return 5;
            }
            if (r.kappa == KappaKind::zero) return 6;
            throw ConfigError("delta = 0, mu = eps, tau = 0 needs kappa in {0, finite, inf}");
        }
        if (r.mu == MuScaling::eps2 && r.tau == 2) return 7;
        break;
    case DeltaKind::infinite:
        if (r.mu == MuScaling::eps && r.tau == 0) return 8;
        if (r.mu == MuScaling::eps_h && r.tau == 2) return 9;
        break;
    }
    throw ConfigError("unsupported regime combination" + where);
}

std::string regime_label(const RegimeConfig& r)
{
    const int row = regime_row(r);
    std::string s = "row " + std::to_string(row) + ": delta " +
                    (r.delta == DeltaKind::finite ? std::to_string(r.delta_value) : to_string(r.delta)) + ", mu " +
                    to_string(r.mu) + ", tau " + std::to_string(r.tau);
    if (row >= 4 && row <= 6)
        s += ", kappa " + (r.kappa == KappaKind::finite ? std::to_string(r.kappa_value) : to_string(r.kappa));
    return s;
}

RegimeConfig regime_for_row(int row)
{
    RegimeConfig r;
    switch (row) {
    case 1: r = {DeltaKind::finite, 1.0, MuScaling::eps, 2, KappaKind::none, 1.0}; break;
    case 2: r = {DeltaKind::finite, 1.0, MuScaling::eps, 0, KappaKind::none, 1.0}; break;
    case 3: r = {DeltaKind::finite, 1.0, MuScaling::eps_h, 2, KappaKind::none, 1.0}; break;
    case 4: r = {DeltaKind::zero, 0.0, MuScaling::eps, 0, KappaKind::infinite, 1.0}; break;
    case 5: r = {DeltaKind::zero, 0.0, MuScaling::eps, 0, KappaKind::finite, 1.0}; break;
    case 6: r = {DeltaKind::zero, 0.0, MuScaling::eps, 0, KappaKind::zero, 1.0}; break;
    case 7: r = {DeltaKind::zero, 0.0, MuScaling::eps2, 2, KappaKind::none, 1.0}; break;
    case 8: r = {DeltaKind::infinite, 0.0, MuScaling::eps, 0, KappaKind::none, 1.0}; break;
    case 9: r = {DeltaKind::infinite, 0.0, MuScaling::eps_h, 2, KappaKind::none, 1.0}; break;
    default: throw ConfigError("regime rows are numbered 1 to 9");
    }
    return r;
}

std::string to_string(EvolveVariant v)
{
    switch (v) {
    case EvolveVariant::long_time_bending: return "long_time_bending";
    case EvolveVariant::real_time: return "real_time";
    case EvolveVariant::strong_hc_bending: return "strong_hc_bending";
    case EvolveVariant::delta0_hc: return "delta0_hc";
    }
    return "unknown";
}

EvolveVariant parse_evolve_variant(const std::string& s)
{
    return lookup<EvolveVariant>({{"long_time_bending", EvolveVariant::long_time_bending},
                                  {"real_time", EvolveVariant::real_time},
                                  {"strong_hc_bending", EvolveVariant::strong_hc_bending},
                                  {"delta0_hc", EvolveVariant::delta0_hc}},
                                 s, "evolution variant");
}

EvolveVariant evolve_variant_for_row(int row)
{
    switch (row) {
    case 1: return EvolveVariant::long_time_bending;
    case 3:
    case 9: return EvolveVariant::strong_hc_bending;
    case 7: return EvolveVariant::delta0_hc;
    case 2:
    case 4:
    case 5:
    case 6:
    case 8: return EvolveVariant::real_time;
    default: throw ConfigError("regime rows are numbered 1 to 9");
    }
}

// ---------------------------------------------------------------------------
// Loads
// ---------------------------------------------------------------------------
double LoadSpec::time_factor(double t) const
{
    switch (time) {
    case TimeProfile::constant: return 1.0;
    case TimeProfile::ramp: return t;
    case TimeProfile::sine: return std::sin(omega * t);
    }
    return 1.0;
}

double LoadSpec::macro_value(double x, double y, double L1, double L2) const
{
    if (macro == MacroProfile::uniform) return 1.0;
    return std::sin(M_PI * x / L1) * std::sin(M_PI * y / L2);
}

double LoadSpec::transverse_moment(int k) const
{
    if (transverse == TransverseProfile::constant) return k == 0 ? 1.0 : 0.0;
    return k == 0 ? 0.0 : 1.0 / 12.0;
}

double LoadSpec::cell_average(double soft_fraction) const
{
    switch (cell) {
    case CellProfile::uniform: return 1.0;
    case CellProfile::soft: return soft_fraction;
    case CellProfile::stiff: return 1.0 - soft_fraction;
    }
    return 1.0;
}

double LoadSpec::soft_value() const { return cell == CellProfile::stiff ? 0.0 : 1.0; }

MacroProfile parse_macro_profile(const std::string& s)
{
    return lookup<MacroProfile>({{"uniform", MacroProfile::uniform}, {"sine", MacroProfile::sine}}, s,
                                "macro load profile");
}

TransverseProfile parse_transverse_profile(const std::string& s)
{
    return lookup<TransverseProfile>({{"constant", TransverseProfile::constant}, {"x3", TransverseProfile::x3}}, s,
                                     "transverse load profile");
}

CellProfile parse_cell_profile(const std::string& s)
{
    return lookup<CellProfile>(
        {{"uniform", CellProfile::uniform}, {"soft", CellProfile::soft}, {"stiff", CellProfile::stiff}}, s,
        "cell load profile");
}

TimeProfile parse_time_profile(const std::string& s)
{
    return lookup<TimeProfile>(
        {{"constant", TimeProfile::constant}, {"ramp", TimeProfile::ramp}, {"sine", TimeProfile::sine}}, s,
        "time load profile");
}

LoadMoments load_moments(const LoadSpec& f, double soft_fraction)
{
    LoadMoments m;
    const double avg = f.cell_average(soft_fraction);
    const double soft = f.soft_value() * soft_fraction;
    m.mean = f.amplitude * f.transverse_moment(0) * avg;
    m.moment = f.amplitude.head<2>() * f.transverse_moment(1) * avg;
    m.soft_mean = f.amplitude * f.transverse_moment(0) * soft;
    m.soft_moment = f.amplitude * f.transverse_moment(1) * soft;
    return m;
}

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------
BlochSpectrum kappa_cell_spectrum(const MaterialSpec& mat, const CellMesh& mesh, double kappa, int N)
{
    if (mesh.dim != 2) throw ConfigError("the periodic stiff-cell operator needs a planar cell mesh");
    if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
    const double h = mesh.h();
    const int nn = mesh.num_nodes2d();
    const ElementSet es = cell2d_elements(mesh, [&](int e) { return !mesh.is_soft(e); }, [](int) { return 0; });
    const DofMap dm = build_dofmap(nn, 4, cell2d_master(mesh), es.active_nodes(nn), [](int, int) { return false; });
    BlochProblem p;
    p.op = BlochOperator::bend_delta0;
    p.pair.K = assemble_matrix(dm, es, {fe::bfs_stiffness(reduced_tensor(mat.C1) * (kappa * kappa / 12.0), h, h)});
    p.pair.M = assemble_matrix(dm, es, {fe::bfs_mass(mat.rho1, h, h)});
    p.pair.description = "periodic stiff-cell plate operator";
    Vec v = Vec::Zero(16);
    const auto g = fe::gauss01(4);
    double Nv[16], xx[16], yy[16], xy[16];
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) {
            fe::bfs_2d(g.x[i], g.x[j], h, h, Nv, xx, yy, xy);
            for (int a = 0; a < 16; ++a) v[a] += g.w[i] * g.w[j] * h * h * mat.rho1 * Nv[a];
        }
    p.F = assemble_vector(dm, es, {v});
    p.components = {0};
    p.rho0_mean = mat.rho1 * mesh.stiff_fraction();
    p.soft_area = mesh.stiff_fraction();
    p.n = mesh.n;
    EigWorkspace ws;
    ws.N = std::min<int>(N, static_cast<int>(p.pair.K.rows()));
    return bloch_spectrum(p, ws);
}

namespace {

EigWorkspace modes_workspace(const LimitSetup& s, const BlochProblem& p)
{
    EigWorkspace ws = s.ws;
    ws.N = std::min<int>(s.modes, static_cast<int>(p.pair.K.rows()));
    if (ws.N < 1) throw ConfigError("at least one micro mode is required");
    return ws;
}

// Physical displacement components read by the mean columns of a spectrum.
std::vector<int> physical_components(BlochOperator op)
{
    switch (op) {
    case BlochOperator::full_delta:
    case BlochOperator::full_deltainf: return {0, 1, 2};
    case BlochOperator::memb_delta:
    case BlochOperator::memb_delta0:
    case BlochOperator::memb_deltainf: return {0, 1};
    case BlochOperator::bend_delta:
    case BlochOperator::bend_delta0: return {2};
    }
    return {};
}

} // namespace

LimitContext make_limit_context(const LimitSetup& setup)
{
    LimitContext ctx;
    ctx.setup = setup;
    ctx.row = regime_row(setup.regime);
    setup.mat.validate();
    if (setup.modes < 1) throw ConfigError("at least one micro mode is required");
    if (ctx.row == 7 && !setup.shape.smooth_boundary())
        throw GeometryError("delta = 0 with mu = eps^2 needs an inclusion with a C^{1,1} boundary");
    ctx.spaces = build_macro_spaces(
        build_macro_mesh(setup.L1, setup.L2, setup.macro_n1, setup.macro_n2, setup.gamma_D));
    const int row = ctx.row;
    const MaterialSpec& mat = setup.mat;
    if (row <= 3) {
        const CellMesh mesh = build_cell_mesh(setup.shape, setup.cell_n, 3, setup.cell_nz);
        const double delta = setup.regime.delta_value;
        ctx.soft_fraction = mesh.soft_fraction();
        ctx.tensor = effective_delta(mat, mesh, delta);
        const BlochProblem p = assemble_bloch(mat, mesh, BlochOperator::full_delta, delta);
        ctx.micro = bloch_spectrum(p, modes_workspace(setup, p));
    } else {
        const CellMesh mesh = build_cell_mesh(setup.shape, setup.cell_n, 2, 0);
        ctx.soft_fraction = mesh.soft_fraction();
        if (row <= 7) {
            ctx.tensor = effective_delta0(mat, mesh);
            const BlochOperator op = row == 7 ? BlochOperator::bend_delta0 : BlochOperator::memb_delta0;
            const BlochProblem p = assemble_bloch(mat, mesh, op);
            ctx.micro = bloch_spectrum(p, modes_workspace(setup, p));
            if (row == 7) {
                const BlochProblem pa = assemble_bloch(mat, mesh, BlochOperator::memb_delta0);
                ctx.micro_aux = bloch_spectrum(pa, modes_workspace(setup, pa));
            }
            if (row == 5) ctx.kappa_cell = kappa_cell_spectrum(mat, mesh, setup.regime.kappa_value, setup.kappa_modes);
        } else {
            ctx.tensor = effective_deltainf(mat, mesh);
            const BlochProblem p = assemble_bloch(mat, mesh, BlochOperator::full_deltainf);
            ctx.micro = bloch_spectrum(p, modes_workspace(setup, p));
        }
    }
    ctx.micro_operator = to_string(ctx.micro.op);
    ctx.rho0_mean = mat.rho0 * ctx.soft_fraction;
    ctx.rho1_mean = mat.rho1 * (1.0 - ctx.soft_fraction);
    ctx.rho_mean = ctx.rho0_mean + ctx.rho1_mean;
    return ctx;
}

// ---------------------------------------------------------------------------
// Block assembly
// ---------------------------------------------------------------------------
const LimitBlock& LimitSystem::block(const std::string& name) const
{
    for (const auto& b : blocks)
        if (b.name == name) return b;
    throw ConfigError("limit system has no block '" + name + "'");
}

bool LimitSystem::has_block(const std::string& name) const
{
    return std::any_of(blocks.begin(), blocks.end(), [&](const LimitBlock& b) { return b.name == name; });
}

Vec LimitSystem::segment(const Vec& x, const std::string& name) const
{
    const LimitBlock& b = block(name);
    return x.segment(b.offset, b.size);
}

std::vector<char> LimitSystem::quasistatic_mask() const
{
    std::vector<char> q(ndof(), 0);
    for (const auto& b : blocks)
        if (b.quasistatic) std::fill(q.begin() + b.offset, q.begin() + b.offset + b.size, 1);
    return q;
}

namespace {

// Integrals of the macro profile against the basis of a space, and the
// gradient term for BFS spaces: (int g N, int g grad N . moment).
struct ProfileVectors {
    Vec value;
    Vec gradient;
};

ProfileVectors profile_vectors(const MacroSpaces& sp, FieldSpace space, const LoadSpec& f, int comp,
                               const Eigen::Vector2d& moment)
{
    const MacroMesh& m = sp.mesh;
    const double hx = m.hx(), hy = m.hy();
    const auto g = fe::gauss01(4);
    std::vector<Vec> val, grad;
    for (int j = 0; j < m.n2; ++j)
        for (int i = 0; i < m.n1; ++i) {
            Vec v, d;
            if (space == FieldSpace::bend || space == FieldSpace::bfs_all) {
                v = Vec::Zero(16);
                d = Vec::Zero(16);
            } else {
                const int nc = space == FieldSpace::memb ? 2 : 1;
                v = Vec::Zero(4 * nc);
                d = Vec::Zero(4 * nc);
            }
            for (int qj = 0; qj < 4; ++qj)
                for (int qi = 0; qi < 4; ++qi) {
                    const double x = m.x(i) + g.x[qi] * hx, y = m.y(j) + g.x[qj] * hy;
                    const double w = g.w[qi] * g.w[qj] * hx * hy * f.macro_value(x, y, m.L1, m.L2);
                    if (space == FieldSpace::bend || space == FieldSpace::bfs_all) {
                        double N[16], xx[16], yy[16], xy[16], Nx[16], Ny[16];
                        fe::bfs_2d(g.x[qi], g.x[qj], hx, hy, N, xx, yy, xy);
                        fe::bfs_2d_grad(g.x[qi], g.x[qj], hx, hy, Nx, Ny);
                        for (int a = 0; a < 16; ++a) {
                            v[a] += w * N[a];
                            d[a] += w * (moment[0] * Nx[a] + moment[1] * Ny[a]);
                        }
                    } else {
                        double N[4], dx[4], dy[4];
                        fe::q1_2d(g.x[qi], g.x[qj], hx, hy, N, dx, dy);
                        const int nc = space == FieldSpace::memb ? 2 : 1;
                        for (int a = 0; a < 4; ++a) v[nc * a + (nc == 2 ? comp : 0)] += w * N[a];
                    }
                }
            val.push_back(v);
            grad.push_back(d);
        }
    const DofMap* dm = nullptr;
    switch (space) {
    case FieldSpace::memb: dm = &sp.memb; break;
    case FieldSpace::bend: dm = &sp.bend; break;
    case FieldSpace::bfs_all: dm = &sp.bfs_all; break;
    case FieldSpace::nodal: dm = &sp.nodal; break;
    }
    ProfileVectors out;
    out.value = assemble_vector_per_element(*dm, sp.es, val);
    out.gradient = assemble_vector_per_element(*dm, sp.es, grad);
    return out;
}

int space_size(const MacroSpaces& sp, FieldSpace s)
{
    switch (s) {
    case FieldSpace::memb: return sp.memb.ndof;
    case FieldSpace::bend: return sp.bend.ndof;
    case FieldSpace::bfs_all: return sp.bfs_all.ndof;
    case FieldSpace::nodal: return sp.nodal.ndof;
    }
    return 0;
}

class Builder {
public:
    explicit Builder(const MacroSpaces& sp) : sp_(sp) {}

    int add(const std::string& name, FieldSpace space, bool quasistatic, bool micro = false, double eta = 0.0)
    {
        LimitBlock b;
        b.name = name;
        b.space = space;
        b.offset = n_;
        b.size = space_size(sp_, space);
        b.quasistatic = quasistatic;
        b.micro = micro;
        b.eta = eta;
        n_ += b.size;
        blocks_.push_back(b);
        loads_.emplace_back(Vec::Zero(b.size));
        return static_cast<int>(blocks_.size()) - 1;
    }

    // A placed at (bi, bj) and its transpose at (bj, bi) when bi != bj.
    void stiff(int bi, int bj, const SpMat& A, double s = 1.0) { place(kt_, bi, bj, A, s); }
    void mass(int bi, int bj, const SpMat& A, double s = 1.0) { place(mt_, bi, bj, A, s); }
    void load(int b, const Vec& v) { loads_[b] += v; }

    LimitSystem finish(int row)
    {
        LimitSystem sys;
        sys.row = row;
        sys.blocks = blocks_;
        sys.K.resize(n_, n_);
        sys.K.setFromTriplets(kt_.begin(), kt_.end());
        sys.M.resize(n_, n_);
        sys.M.setFromTriplets(mt_.begin(), mt_.end());
        sys.K = symmetrize(sys.K);
        sys.M = symmetrize(sys.M);
        sys.load = Vec::Zero(n_);
        for (std::size_t b = 0; b < blocks_.size(); ++b) sys.load.segment(blocks_[b].offset, blocks_[b].size) = loads_[b];
        return sys;
    }

private:
    void place(std::vector<Triplet>& t, int bi, int bj, const SpMat& A, double s)
    {
        const int r0 = blocks_[bi].offset, c0 = blocks_[bj].offset;
        if (A.rows() != blocks_[bi].size || A.cols() != blocks_[bj].size)
            throw std::logic_error("limit block size mismatch");
        for (int k = 0; k < A.outerSize(); ++k)
            for (SpMat::InnerIterator it(A, k); it; ++it) {
                t.emplace_back(r0 + it.row(), c0 + it.col(), s * it.value());
                if (bi != bj) t.emplace_back(c0 + it.col(), r0 + it.row(), s * it.value());
            }
    }

    const MacroSpaces& sp_;
    int n_ = 0;
    std::vector<LimitBlock> blocks_;
    std::vector<Vec> loads_;
    std::vector<Triplet> kt_, mt_;
};

// Load of micro mode k: integral of f against the mode over I x Y0, per
// unit macro profile. Only the listed physical components are used.
double micro_mode_load(const BlochSpectrum& s, int k, const LoadSpec& f, double rho0, bool in_plane_only)
{
    const auto comps = physical_components(s.op);
    double out = 0.0;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        const int pc = comps[c];
        if (in_plane_only && pc == 2) continue;
        double integral = 0.0;
        if (f.transverse == TransverseProfile::constant)
            integral = s.means(k, static_cast<int>(c)) / rho0;
        else if (s.means_x3.size() > 0)
            integral = s.means_x3(k, static_cast<int>(c)) / rho0;
        out += f.amplitude[pc] * f.soft_value() * integral;
    }
    return out;
}

// Mean column of a physical component, or -1 when the spectrum does not
// track it.
int mean_column(const BlochSpectrum& s, int physical)
{
    const auto comps = physical_components(s.op);
    for (std::size_t c = 0; c < comps.size(); ++c)
        if (comps[c] == physical) return static_cast<int>(c);
    return -1;
}

struct MacroMatrices {
    SpMat Km, Kb, Kc;
    SpMat Mm, Mb, Mba, Mq, Yb;
    SpMat X[2];
};

MacroMatrices macro_matrices(const MacroSpaces& sp, const EffectiveTensor& t)
{
    const double hx = sp.mesh.hx(), hy = sp.mesh.hy();
    MacroMatrices m;
    m.Km = assemble_matrix(sp.memb, sp.es, {fe::q1_2d_membrane_stiffness(t.memb, hx, hy)});
    m.Kb = assemble_matrix(sp.bend, sp.es, {fe::bfs_stiffness(t.bend, hx, hy)});
    m.Kc = assemble_cross(sp.memb, sp.bend, sp.es, {fe::q1_bfs_cross(t.coupling, hx, hy)});
    m.Mm = sp.mass_memb();
    m.Mb = sp.mass_bend();
    m.Mba = sp.mass_bfs_all();
    m.Mq = sp.mass_nodal();
    m.Yb = sp.bfs_all_bend_mass();
    m.X[0] = sp.nodal_memb_mass(0);
    m.X[1] = sp.nodal_memb_mass(1);
    return m;
}

} // namespace

LimitSystem assemble_limit_system(const LimitContext& ctx, const LoadSpec& f)
{
    const MacroSpaces& sp = ctx.spaces;
    const int row = ctx.row;
    const MacroMatrices mm = macro_matrices(sp, ctx.tensor);
    const LoadMoments lm = load_moments(f, ctx.soft_fraction);
    const double rho = ctx.rho_mean, rho0 = ctx.setup.mat.rho0;
    const Eigen::Vector2d no_moment = Eigen::Vector2d::Zero();
    const ProfileVectors pn = profile_vectors(sp, FieldSpace::nodal, f, 0, no_moment);
    const ProfileVectors pm0 = profile_vectors(sp, FieldSpace::memb, f, 0, no_moment);
    const ProfileVectors pm1 = profile_vectors(sp, FieldSpace::memb, f, 1, no_moment);
    const ProfileVectors pb = profile_vectors(sp, FieldSpace::bend, f, 0, lm.moment);
    const ProfileVectors pba = profile_vectors(sp, FieldSpace::bfs_all, f, 0, no_moment);
    const Vec memb_load = lm.mean[0] * pm0.value + lm.mean[1] * pm1.value;
    // Third component tested with theta3 and the in-plane moment tested
    // with -x3 grad theta3.
    const Vec bend_load = lm.mean[2] * pb.value - pb.gradient;

    Builder B(sp);
    const BlochSpectrum& s = ctx.micro;
    auto add_membrane = [&](bool quasistatic) {
        const int a = B.add("a", FieldSpace::memb, quasistatic);
        B.stiff(a, a, mm.Km);
        if (!quasistatic) B.mass(a, a, mm.Mm, rho);
        B.load(a, memb_load);
        return a;
    };
    // Nodal micro blocks coupled by mass to the membrane block a and the
    // nodal third-component block b.
    auto add_nodal_micro = [&](const BlochSpectrum& spec, int a, int b, bool quasistatic, bool in_plane_only,
                               const std::string& prefix) {
        for (int k = 0; k < spec.size(); ++k) {
            const double eta = spec.values[k];
            const int c = B.add(prefix + std::to_string(k), FieldSpace::nodal, quasistatic, true, eta);
            B.stiff(c, c, mm.Mq, eta);
            if (!quasistatic) {
                B.mass(c, c, mm.Mq);
                for (int comp = 0; comp < 2 && a >= 0; ++comp) {
                    const int col = mean_column(spec, comp);
                    if (col >= 0 && spec.means(k, col) != 0.0)
                        B.mass(a, c, SpMat(mm.X[comp].transpose()), spec.means(k, col));
                }
                const int col3 = mean_column(spec, 2);
                if (b >= 0 && col3 >= 0 && spec.means(k, col3) != 0.0) B.mass(b, c, mm.Mq, spec.means(k, col3));
            }
            B.load(c, micro_mode_load(spec, k, f, rho0, in_plane_only) * pn.value);
        }
    };
    // BFS micro blocks coupled by mass to the bending block b through the
    // third-component mean.
    auto add_bfs_micro = [&](const BlochSpectrum& spec, int b) {
        const int col3 = mean_column(spec, 2);
        const SpMat YbT = mm.Yb.transpose();
        for (int k = 0; k < spec.size(); ++k) {
            const double eta = spec.values[k];
            const int c = B.add("u" + std::to_string(k), FieldSpace::bfs_all, false, true, eta);
            B.stiff(c, c, mm.Mba, eta);
            B.mass(c, c, mm.Mba);
            if (col3 >= 0 && spec.means(k, col3) != 0.0) B.mass(b, c, YbT, spec.means(k, col3));
            B.load(c, micro_mode_load(spec, k, f, rho0, false) * pba.value);
        }
    };

    std::string desc;
    switch (row) {
    case 1: {
        const int a = add_membrane(true);
        const int b = B.add("b", FieldSpace::bend, false);
        B.stiff(b, b, mm.Kb);
        B.stiff(a, b, mm.Kc);
        B.mass(b, b, mm.Mb, rho);
        B.load(b, bend_load);
        add_nodal_micro(s, -1, -1, true, true, "u");
        desc = "quasistatic membrane, hyperbolic bending, static decoupled micro";
        break;
    }
    case 2:
    case 8: {
        const int a = add_membrane(false);
        const int b = B.add("b", FieldSpace::nodal, false);
        B.mass(b, b, mm.Mq, rho);
        B.load(b, lm.mean[2] * pn.value);
        add_nodal_micro(s, a, b, false, false, "u");
        desc = "membrane with algebraic third component and modal micro dynamics";
        break;
    }
    case 3: {
        const int a = add_membrane(true);
        const int b = B.add("b", FieldSpace::bend, false);
        B.stiff(b, b, mm.Kb);
        B.stiff(a, b, mm.Kc);
        B.mass(b, b, mm.Mb, rho);
        B.load(b, bend_load);
        add_bfs_micro(s, b);
        desc = "coupled bending with quasistatic membrane and modal micro dynamics";
        break;
    }
    case 4:
    case 5:
    case 6: {
        const int a = add_membrane(false);
        add_nodal_micro(s, a, -1, false, false, "u");
        const double r0 = ctx.rho0_mean, r1 = ctx.rho1_mean;
        if (row == 4) {
            const int b = B.add("b", FieldSpace::nodal, false);
            const int w = B.add("w", FieldSpace::nodal, false);
            B.mass(b, b, mm.Mq, rho);
            B.mass(b, w, mm.Mq, r0);
            B.mass(w, w, mm.Mq, r0);
            B.load(b, lm.mean[2] * pn.value);
            B.load(w, lm.soft_mean[2] * pn.value);
        } else if (row == 6) {
            const int b = B.add("b", FieldSpace::nodal, false);
            const int w = B.add("w", FieldSpace::nodal, false);
            B.mass(b, b, mm.Mq, r1);
            B.mass(w, w, mm.Mq, r0);
            B.load(b, (lm.mean[2] - lm.soft_mean[2]) * pn.value);
            B.load(w, lm.soft_mean[2] * pn.value);
        } else {
            const BlochSpectrum& kc = ctx.kappa_cell;
            const double stiff_value = f.cell == CellProfile::soft ? 0.0 : 1.0;
            for (int j = 0; j < kc.size(); ++j) {
                const double nu = std::max(kc.values[j], 0.0);
                const int d = B.add("b" + std::to_string(j), FieldSpace::nodal, false, true, nu);
                B.stiff(d, d, mm.Mq, nu);
                B.mass(d, d, mm.Mq);
                B.load(d, f.amplitude[2] * f.transverse_moment(0) * stiff_value * kc.means(j, 0) /
                              ctx.setup.mat.rho1 * pn.value);
            }
            const int w = B.add("w", FieldSpace::nodal, false);
            B.mass(w, w, mm.Mq, r0);
            B.load(w, lm.soft_mean[2] * pn.value);
        }
        desc = "membrane with modal micro dynamics; third component per kappa branch";
        break;
    }
    case 7: {
        const int b = B.add("b", FieldSpace::bend, false);
        B.stiff(b, b, mm.Kb);
        B.mass(b, b, mm.Mb, rho);
        B.load(b, bend_load);
        add_bfs_micro(s, b);
        add_nodal_micro(ctx.micro_aux, -1, -1, true, true, "v");
        desc = "bending with modal plate micro dynamics and static in-plane micro";
        break;
    }
    case 9: {
        const int b = B.add("b", FieldSpace::bend, false);
        B.stiff(b, b, mm.Kb);
        B.mass(b, b, mm.Mb, rho);
        B.load(b, bend_load);
        add_bfs_micro(s, b);
        desc = "bending with modal micro dynamics";
        break;
    }
    default: throw ConfigError("unsupported regime row");
    }
    LimitSystem sys = B.finish(row);
    sys.spec = f;
    sys.description = desc;
    return sys;
}

LoadFunctional compute_load_functional(const LimitContext& ctx, const LoadSpec& load)
{
    LoadFunctional out;
    out.moments = load_moments(load, ctx.soft_fraction);
    const LimitSystem sys = assemble_limit_system(ctx, load);
    out.rhs = sys.load;
    double macro = 0.0, micro = 0.0;
    for (const auto& b : sys.blocks) {
        const double n2 = sys.load.segment(b.offset, b.size).squaredNorm();
        (b.micro ? micro : macro) += n2;
    }
    out.macro_norm = std::sqrt(macro);
    out.micro_norm = std::sqrt(micro);
    if (sys.has_block("a")) {
        const LimitBlock& a = sys.block("a");
        const SpMat Ka = sys.K.block(a.offset, a.offset, a.size, a.size);
        out.membrane_response = SpdSolver(Ka).solve(Vec(sys.load.segment(a.offset, a.size)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Solves
// ---------------------------------------------------------------------------
namespace {

SpMat select(const SpMat& A, const std::vector<int>& rows, const std::vector<int>& cols)
{
    std::vector<int> rmap(A.rows(), -1), cmap(A.cols(), -1);
    for (std::size_t i = 0; i < rows.size(); ++i) rmap[rows[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < cols.size(); ++i) cmap[cols[i]] = static_cast<int>(i);
    std::vector<Triplet> t;
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
            const int r = rmap[it.row()], c = cmap[it.col()];
            if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
        }
    SpMat S(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
    S.setFromTriplets(t.begin(), t.end());
    return S;
}

Vec gather(const Vec& x, const std::vector<int>& idx)
{
    Vec out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<int>(i)] = x[idx[i]];
    return out;
}

void scatter(Vec& x, const std::vector<int>& idx, const Vec& v)
{
    for (std::size_t i = 0; i < idx.size(); ++i) x[idx[i]] = v[static_cast<int>(i)];
}

struct Partition {
    std::vector<int> h, q;
};

Partition partition(const LimitSystem& sys)
{
    Partition p;
    const auto mask = sys.quasistatic_mask();
    for (int i = 0; i < sys.ndof(); ++i) (mask[i] ? p.q : p.h).push_back(i);
    return p;
}

// Re-solves the quasistatic dofs of x for the load f.
class QuasistaticSolver {
public:
    QuasistaticSolver(const LimitSystem& sys, const Partition& p) : p_(p)
    {
        if (p.q.empty()) return;
        Kqh_ = select(sys.K, p.q, p.h);
        solver_ = std::make_unique<SpdSolver>(select(sys.K, p.q, p.q));
    }
    void apply(Vec& x, const Vec& f) const
    {
        if (p_.q.empty()) return;
        const Vec r = gather(f, p_.q) - Kqh_ * gather(x, p_.h);
        scatter(x, p_.q, solver_->solve(r));
    }

private:
    const Partition& p_;
    SpMat Kqh_;
    std::unique_ptr<SpdSolver> solver_;
};

} // namespace

Vec solve_limit_resolvent(const LimitSystem& sys, double lambda, const Vec& rhs)
{
    if (!(lambda > 0.0)) throw ConfigError("the resolvent parameter must be positive");
    if (rhs.size() != sys.ndof()) throw ConfigError("right-hand side size does not match the limit system");
    const SpMat A = sys.K + lambda * sys.M;
    SpdSolver solver(A);
    double res = 0.0;
    Vec x = solver.solve(rhs, &res);
    if (!(res < 1e-8)) throw SolverError("limit resolvent solve did not converge (residual " + std::to_string(res) + ")");
    return x;
}

Vec solve_limit_resolvent(const LimitSystem& sys, double lambda) { return solve_limit_resolvent(sys, lambda, sys.load); }

EigResult limit_system_eigs(const LimitSystem& sys, int N)
{
    const Partition p = partition(sys);
    const int nh = static_cast<int>(p.h.size());
    if (N < 1 || N > nh) throw ConfigError("limit_system_eigs: N must lie in [1, number of dynamic dofs]");
    Mat Ks = Mat(select(sys.K, p.h, p.h));
    Mat X;
    if (!p.q.empty()) {
        const SpdSolver sq(select(sys.K, p.q, p.q));
        const Mat Kqh = Mat(select(sys.K, p.q, p.h));
        X = sq.solve(Kqh);
        Ks -= Kqh.transpose() * X;
    }
    Ks = 0.5 * (Ks + Ks.transpose());
    const Mat Mh = Mat(select(sys.M, p.h, p.h));
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Ks, Mh);
    if (es.info() != Eigen::Success) throw SolverError("limit_system_eigs: dense eigensolver failed");
    EigResult r;
    r.method = "dense_schur";
    r.values = es.eigenvalues().head(N);
    r.vectors = Mat::Zero(sys.ndof(), N);
    for (int k = 0; k < N; ++k) {
        Vec x = Vec::Zero(sys.ndof());
        const Vec xh = es.eigenvectors().col(k);
        scatter(x, p.h, xh);
        if (!p.q.empty()) scatter(x, p.q, -(X * xh));
        normalize_sign(x);
        r.vectors.col(k) = x;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Evolution
// ---------------------------------------------------------------------------
std::vector<double> Trajectory::total() const
{
    std::vector<double> e(kinetic.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = kinetic[i] + elastic[i];
    return e;
}

namespace {

int step_count(const EvolveOptions& opt, double& dt)
{
    if (!(opt.T > 0.0)) throw ConfigError("final time T must be positive");
    if (opt.dt < 0.0) throw ConfigError("time step must be positive");
    if (opt.record_every < 1) throw ConfigError("record_every must be at least 1");
    const double requested = opt.dt > 0.0 ? opt.dt : opt.T / 1000.0;
    // The step is adjusted so that an integer number of steps ends at T.
    const int steps = std::max(1, static_cast<int>(std::llround(opt.T / requested)));
    dt = opt.T / steps;
    return steps;
}

} // namespace

Trajectory evolve(const LimitSystem& sys, const Vec& x0, const Vec& v0, const EvolveOptions& opt)
{
    double dt = 0.0;
    const int steps = step_count(opt, dt);
    const int n = sys.ndof();
    if (x0.size() != n || v0.size() != n) throw ConfigError("initial data size does not match the limit system");
    const Partition p = partition(sys);
    const QuasistaticSolver qs(sys, p);
    const SpMat A = sys.M + (0.25 * dt * dt) * sys.K;
    const SpdSolver solver(A);

    Trajectory tr;
    tr.dt = dt;
    tr.steps = steps;
    Vec x = x0, v = v0;
    for (int i : p.q) v[i] = 0.0;
    qs.apply(x, sys.load_at(0.0));
    auto record = [&](double t) {
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.kinetic.push_back(0.5 * v.dot(sys.M * v));
        tr.elastic.push_back(0.5 * x.dot(sys.K * x));
    };
    record(0.0);
    for (int k = 0; k < steps; ++k) {
        const double t0 = k * dt, t1 = (k + 1) * dt;
        const Vec fbar = 0.5 * (sys.load_at(t0) + sys.load_at(t1));
        // Solved for the midpoint velocity, which avoids differencing x.
        const Vec rhs = sys.M * v - (0.5 * dt) * (sys.K * x - fbar);
        double res = 0.0;
        const Vec vbar = solver.solve(rhs, &res);
        if (!(res < 1e-8)) throw SolverError("midpoint step solve failed");
        Vec xn = x + dt * vbar;
        Vec vn = 2.0 * vbar - v;
        for (int i : p.q) vn[i] = 0.0;
        qs.apply(xn, sys.load_at(t1));
        x = std::move(xn);
        v = std::move(vn);
        if ((k + 1) % opt.record_every == 0 || k + 1 == steps) record(t1);
    }
    return tr;
}

namespace {

// Power series coefficients of num(z) / den(z) up to degree n - 1.
std::vector<double> series_div(const std::vector<double>& num, const std::vector<double>& den, int n)
{
    std::vector<double> c(n, 0.0);
    for (int k = 0; k < n; ++k) {
        double v = k < static_cast<int>(num.size()) ? num[k] : 0.0;
        for (int j = 1; j < static_cast<int>(den.size()) && j <= k; ++j) v -= den[j] * c[k - j];
        c[k] = v / den[0];
    }
    return c;
}

} // namespace

Trajectory evolve_memory_kernel(const LimitSystem& sys, const EvolveOptions& opt)
{
    double dt = 0.0;
    const int steps = step_count(opt, dt);
    if (sys.spec.time_factor(0.0) != 0.0 && sys.load.norm() > 0.0)
        throw ConfigError("memory-kernel evolution needs a load that vanishes at t = 0");
    // Split into macro unknowns and dynamic micro blocks.
    std::vector<const LimitBlock*> micro;
    std::vector<int> macro_idx;
    for (const auto& b : sys.blocks) {
        if (b.micro && !b.quasistatic) {
            micro.push_back(&b);
        } else {
            for (int i = 0; i < b.size; ++i) macro_idx.push_back(b.offset + i);
        }
    }
    if (micro.empty()) throw ConfigError("memory-kernel evolution needs dynamic micro blocks");
    const int m = static_cast<int>(macro_idx.size());
    const Mat KMM = Mat(select(sys.K, macro_idx, macro_idx));
    const Mat MMM = Mat(select(sys.M, macro_idx, macro_idx));
    const Vec fM = gather(sys.load, macro_idx);

    struct MicroData {
        std::vector<int> idx;
        double eta = 0.0;
        Eigen::LDLT<Mat> S;
        Mat X;      // macro x micro mass block
        Mat H;      // X S^{-1} X^T
        Vec g;      // static micro load
        Vec XSg;    // X S^{-1} g
        std::vector<double> e, r, kser; // series of 1/(s^2+eta), s^2/(s^2+eta), s^4/(s^2+eta)
    };
    const double c = 4.0 / (dt * dt);
    // s(z)^2 = c (1 - z)^2 / (1 + z)^2
    const std::vector<double> a = [&] {
        std::vector<double> v = series_div({1.0, -2.0, 1.0}, {1.0, 2.0, 1.0}, steps + 1);
        for (double& x : v) x *= c;
        return v;
    }();
    std::vector<MicroData> md(micro.size());
    for (std::size_t n = 0; n < micro.size(); ++n) {
        MicroData& d = md[n];
        for (int i = 0; i < micro[n]->size; ++i) d.idx.push_back(micro[n]->offset + i);
        d.eta = micro[n]->eta;
        const Mat S = Mat(select(sys.M, d.idx, d.idx));
        const Mat Kn = Mat(select(sys.K, d.idx, d.idx));
        if ((Kn - d.eta * S).norm() > 1e-10 * std::max(1.0, Kn.norm()))
            throw ConfigError("micro block stiffness is not eta times its mass");
        if (Mat(select(sys.K, macro_idx, d.idx)).norm() != 0.0)
            throw ConfigError("micro blocks must couple to the macro unknowns through the mass only");
        d.S.compute(S);
        d.X = Mat(select(sys.M, macro_idx, d.idx));
        d.H = d.X * d.S.solve(d.X.transpose());
        d.g = gather(sys.load, d.idx);
        d.XSg = d.X * d.S.solve(d.g);
        // 1 / (s^2 + eta) = (1 + z)^2 / (c (1 - z)^2 + eta (1 + z)^2)
        d.e = series_div({1.0, 2.0, 1.0}, {c + d.eta, -2.0 * c + 2.0 * d.eta, c + d.eta}, steps + 1);
        d.r.resize(steps + 1);
        d.kser.resize(steps + 1);
        for (int j = 0; j <= steps; ++j) {
            d.r[j] = (j == 0 ? 1.0 : 0.0) - d.eta * d.e[j];
            d.kser[j] = a[j] - (j == 0 ? d.eta : 0.0) + d.eta * d.eta * d.e[j];
        }
    }
    for (std::size_t n1 = 0; n1 < md.size(); ++n1)
        for (std::size_t n2 = n1 + 1; n2 < md.size(); ++n2)
            if (Mat(select(sys.M, md[n1].idx, md[n2].idx)).norm() != 0.0)
                throw ConfigError("micro blocks must be mutually mass-orthogonal");

    Mat W0 = a[0] * MMM + KMM;
    for (const auto& d : md) W0 -= d.kser[0] * d.H;
    W0 = 0.5 * (W0 + W0.transpose());
    const Eigen::PartialPivLU<Mat> lu(W0);

    std::vector<double> phi(steps + 1);
    for (int k = 0; k <= steps; ++k) phi[k] = sys.spec.time_factor(k * dt);
    std::vector<Vec> xs(steps + 1, Vec::Zero(m)), Mx(steps + 1, Vec::Zero(m));
    std::vector<std::vector<Vec>> Hx(md.size(), std::vector<Vec>(steps + 1, Vec::Zero(m)));
    for (int k = 1; k <= steps; ++k) {
        Vec rhs = phi[k] * fM;
        for (std::size_t n = 0; n < md.size(); ++n) {
            double conv = 0.0;
            for (int j = 0; j <= k; ++j) conv += md[n].r[j] * phi[k - j];
            rhs -= conv * md[n].XSg;
        }
        for (int j = 1; j <= k; ++j) {
            rhs -= a[j] * Mx[k - j];
            for (std::size_t n = 0; n < md.size(); ++n) rhs += md[n].kser[j] * Hx[n][k - j];
        }
        xs[k] = lu.solve(rhs);
        Mx[k] = MMM * xs[k];
        for (std::size_t n = 0; n < md.size(); ++n) Hx[n][k] = md[n].H * xs[k];
    }

    Trajectory tr;
    tr.dt = dt;
    tr.steps = steps;
    for (int k = 0; k <= steps; ++k) {
        if (k % opt.record_every != 0 && k != steps) continue;
        Vec x = Vec::Zero(sys.ndof());
        scatter(x, macro_idx, xs[k]);
        for (const auto& d : md) {
            // S c_k = sum_j e_j g phi_{k-j} - sum_j r_j X^T x_{k-j}
            double ge = 0.0;
            Vec rx = Vec::Zero(d.X.cols());
            for (int j = 0; j <= k; ++j) {
                ge += d.e[j] * phi[k - j];
                if (k - j > 0) rx += d.r[j] * (d.X.transpose() * xs[k - j]);
            }
            scatter(x, d.idx, d.S.solve(ge * d.g - rx));
        }
        tr.t.push_back(k * dt);
        tr.x.push_back(x);
        tr.elastic.push_back(0.5 * x.dot(sys.K * x));
        tr.kinetic.push_back(0.0);
    }
    return tr;
}

std::vector<LaplaceCheck> laplace_check(const LimitSystem& sys_in, const Vec& x0, const Vec& v0,
                                        const std::vector<double>& s_values, double T, double dt)
{
    LimitSystem sys = sys_in;
    sys.load.setZero();
    EvolveOptions opt;
    opt.T = T;
    opt.dt = dt;
    const Trajectory tr = evolve(sys, x0, v0, opt);
    const Vec x0c = tr.x.front();
    Vec v0c = v0;
    for (int i : partition(sys).q) v0c[i] = 0.0;
    std::vector<LaplaceCheck> out;
    for (double s : s_values) {
        if (!(s > 0.0)) throw ConfigError("Laplace variable must be positive");
        Vec L = Vec::Zero(sys.ndof());
        const std::size_t last = tr.x.size() - 1;
        for (std::size_t k = 0; k <= last; ++k) {
            const double w = (k == 0 || k == last) ? 0.5 : 1.0;
            L += (w * tr.dt * std::exp(-s * tr.t[k])) * tr.x[k];
        }
        const Vec u = solve_limit_resolvent(sys, s * s, sys.M * (s * x0c + v0c));
        out.push_back({s, (L - u).norm() / u.norm()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectrum per regime
// ---------------------------------------------------------------------------
RegimeSpectrum regime_spectrum(const LimitContext& ctx, const RegimeSpectrumOptions& opt)
{
    RegimeSpectrum out;
    const LimitSetup& su = ctx.setup;
    const int row = ctx.row;
    const MacroSpaces& sp = ctx.spaces;
    auto macro_values = [&](MacroKind kind, double rho, Mat* vectors) {
        const MacroOperator op = macro_operator(kind, sp, ctx.tensor, rho);
        const int N = std::min<int>(opt.macro_modes, static_cast<int>(op.pair.K.rows()));
        const EigResult r = macro_eigs(op, N, su.ws);
        if (vectors) *vectors = r.vectors;
        return r.values;
    };
    if (row == 1) {
        const Vec mu = macro_values(MacroKind::bend_coupled, ctx.rho_mean, nullptr);
        out.macro_eigenvalues.assign(mu.data(), mu.data() + mu.size());
        for (double v : out.macro_eigenvalues) out.spectrum.points.push_back({v, "macro", -1, -1});
        out.spectrum.lambda_max = out.macro_eigenvalues.back();
        out.spectrum.regime = regime_label(su.regime);
        out.spectrum.note = "uncoupled regime: eigenvalues of the coupled bending operator";
        fill_gaps(out.spectrum, {});
        out.spectrum.gaps.clear();
        return out;
    }
    BlochSpectrum micro;
    std::vector<int> comps;
    MacroKind kind = MacroKind::memb;
    std::string note;
    if (row == 2 || row == 4 || row == 5 || row == 6 || row == 8) {
        BlochProblem p;
        if (row == 2) {
            const CellMesh mesh = build_cell_mesh(su.shape, su.cell_n, 3, su.cell_nz);
            p = assemble_bloch(su.mat, mesh, BlochOperator::memb_delta, su.regime.delta_value);
        } else {
            const CellMesh mesh = build_cell_mesh(su.shape, su.cell_n, 2, 0);
            p = assemble_bloch(su.mat, mesh,
                               row == 8 ? BlochOperator::memb_deltainf : BlochOperator::memb_delta0);
        }
        micro = bloch_spectrum(p, modes_workspace(su, p));
        note = "membrane part";
    } else {
        micro = ctx.micro;
        kind = row == 3 ? MacroKind::bend_coupled : MacroKind::bend_decoupled;
        if (row != 7) comps = {2};
        note = "third-component Zhikov function";
    }
    out.micro_operator = to_string(micro.op);
    const ZhikovFunction zf(micro, ctx.rho_mean, ctx.rho1_mean, 0, comps);
    out.modes_used = zf.modes_used();
    Mat vecs;
    const Vec mu = macro_values(kind, 1.0, &vecs);
    out.macro_eigenvalues.assign(mu.data(), mu.data() + mu.size());
    LimitSpectrumOptions zo = opt.zhikov;
    if ((row == 8 || row == 9) && opt.strip) {
        const CellMesh mesh = build_cell_mesh(su.shape, su.cell_n, 2, 0);
        out.strip = strip_bottom_m0(assemble_strip(su.mat, mesh), opt.strip_eta_max, opt.strip_points);
        zo.strip_m0 = out.strip->m0;
        note += "; strip interval [m0, inf), discrete half-strip spectrum not evaluated";
    }
    try {
        out.spectrum = limit_spectrum_scalar(zf, out.macro_eigenvalues, zo);
    } catch (const ConfigError&) {
        std::vector<Mat> G;
        for (const auto& Mcd : sp.memb_component_blocks()) G.push_back(vecs.transpose() * Mcd * vecs);
        out.spectrum = limit_spectrum_matrix(zf, mu, G, zo);
        note += "; matrix path";
    }
    out.spectrum.regime = regime_label(su.regime);
    out.spectrum.note = note;
    out.zhikov = zf;
    return out;
}

} // namespace hcp
