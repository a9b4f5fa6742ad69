#ifndef HCPLATE_LIMIT_HPP
#define HCPLATE_LIMIT_HPP

#include "hcplate/bloch.hpp"
#include "hcplate/effective.hpp"
#include "hcplate/macro.hpp"
#include "hcplate/zhikov.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hcp {

// ---------------------------------------------------------------------------
// Regimes
// ---------------------------------------------------------------------------
enum class MuScaling { eps, eps_h, eps2 };
enum class KappaKind { none, zero, finite, infinite };

std::string to_string(MuScaling m);
std::string to_string(KappaKind k);
MuScaling parse_mu_scaling(const std::string& s);
KappaKind parse_kappa(const std::string& s);
DeltaKind parse_delta_kind(const std::string& s);

struct RegimeConfig {
    DeltaKind delta = DeltaKind::finite;
    double delta_value = 1.0; // used when delta is finite
    MuScaling mu = MuScaling::eps;
    int tau = 2;
    KappaKind kappa = KappaKind::none; // only for delta = 0, mu = eps, tau = 0
    double kappa_value = 1.0;          // used when kappa is finite
};

// Supported rows (everything else is rejected with ConfigError):
//   1  delta finite  mu = eps    tau = 2
//   2  delta finite  mu = eps    tau = 0
//   3  delta finite  mu = eps h  tau = 2
//   4  delta 0       mu = eps    tau = 0  kappa infinite
//   5  delta 0       mu = eps    tau = 0  kappa finite
//   6  delta 0       mu = eps    tau = 0  kappa 0
//   7  delta 0       mu = eps^2  tau = 2
//   8  delta inf     mu = eps    tau = 0
//   9  delta inf     mu = eps h  tau = 2
int regime_row(const RegimeConfig& r);
std::string regime_label(const RegimeConfig& r);
// Configuration of a table row with default parameters.
RegimeConfig regime_for_row(int row);

enum class EvolveVariant { long_time_bending, real_time, strong_hc_bending, delta0_hc };

std::string to_string(EvolveVariant v);
EvolveVariant parse_evolve_variant(const std::string& s);
EvolveVariant evolve_variant_for_row(int row);

// ---------------------------------------------------------------------------
// Loads: amplitude x macro profile x transverse profile x cell profile,
// times a scalar time profile for evolution.
// ---------------------------------------------------------------------------
enum class MacroProfile { uniform, sine };
enum class TransverseProfile { constant, x3 };
enum class CellProfile { uniform, soft, stiff };
enum class TimeProfile { constant, ramp, sine };

struct LoadSpec {
    Vec3 amplitude = Vec3::Zero();
    MacroProfile macro = MacroProfile::uniform;
    TransverseProfile transverse = TransverseProfile::constant;
    CellProfile cell = CellProfile::uniform;
    TimeProfile time = TimeProfile::constant;
    double omega = 1.0;

    double time_factor(double t) const;
    // Macro profile at (x, y) on [0, L1] x [0, L2]; sine is
    // sin(pi x / L1) sin(pi y / L2).
    double macro_value(double x, double y, double L1, double L2) const;
    // Integral over I of x3^k times the transverse profile (k = 0, 1).
    double transverse_moment(int k) const;
    // Cell average of the cell profile and its restriction to Y0.
    double cell_average(double soft_fraction) const;
    double soft_value() const;
};

MacroProfile parse_macro_profile(const std::string& s);
TransverseProfile parse_transverse_profile(const std::string& s);
CellProfile parse_cell_profile(const std::string& s);
TimeProfile parse_time_profile(const std::string& s);

// Closed-form moments of a separable load (per unit macro profile).
struct LoadMoments {
    Vec3 mean = Vec3::Zero();           // <f bar>: cell and x3 average
    Eigen::Vector2d moment = Eigen::Vector2d::Zero(); // <x3 f bar_*>
    Vec3 soft_mean = Vec3::Zero();      // integral over I x Y0
    Vec3 soft_moment = Vec3::Zero();    // integral of x3 f over I x Y0
};

LoadMoments load_moments(const LoadSpec& f, double soft_fraction);

// ---------------------------------------------------------------------------
// Context: every ingredient of the limit systems for one regime.
// ---------------------------------------------------------------------------
struct LimitSetup {
    RegimeConfig regime;
    MaterialSpec mat;
    InclusionShape shape;
    int cell_n = 8;
    int cell_nz = 4;
    double L1 = 1.0;
    double L2 = 1.0;
    int macro_n1 = 4;
    int macro_n2 = 4;
    std::vector<Edge> gamma_D{Edge::left};
    int modes = 12;       // micro modes per inclusion spectrum
    int kappa_modes = 6;  // modes of the periodic stiff-cell operator (row 5)
    EigWorkspace ws;
};

struct LimitContext {
    LimitSetup setup;
    int row = 0;
    MacroSpaces spaces;
    EffectiveTensor tensor;
    BlochSpectrum micro;      // coupled micro spectrum of the row
    BlochSpectrum micro_aux;  // row 7: static in-plane micro spectrum
    BlochSpectrum kappa_cell; // row 5: periodic (kappa^2 / 12) C1^r grad^2 on Y1
    double rho_mean = 0.0;
    double rho0_mean = 0.0;
    double rho1_mean = 0.0;
    double soft_fraction = 0.0;
    std::string micro_operator;
};

LimitContext make_limit_context(const LimitSetup& setup);

// Modal operator of the periodic BFS form (kappa^2 / 12) C1^r grad^2 on the
// stiff part Y1 with rho1 mass. means holds the Y1 integrals of the
// (rho1-normalized) modes, rho0_mean the value rho1 |Y1|.
BlochSpectrum kappa_cell_spectrum(const MaterialSpec& mat, const CellMesh& mesh2d, double kappa, int N);

// ---------------------------------------------------------------------------
// Block systems K x'' + ... : stiffness K and mass M over all unknowns.
// Quasistatic blocks carry no mass; micro blocks hold one modal coefficient
// field with stiffness eta * S and mass S, coupled to the macro blocks
// through the mass only.
// ---------------------------------------------------------------------------
enum class FieldSpace { memb, bend, bfs_all, nodal };

struct LimitBlock {
    std::string name;
    FieldSpace space = FieldSpace::nodal;
    int offset = 0;
    int size = 0;
    bool quasistatic = false;
    bool micro = false;
    double eta = 0.0;
};

struct LimitSystem {
    int row = 0;
    std::vector<LimitBlock> blocks;
    SpMat K;
    SpMat M;
    Vec load; // static load vector; the time profile multiplies it
    LoadSpec spec;
    std::string description;

    int ndof() const { return static_cast<int>(K.rows()); }
    const LimitBlock& block(const std::string& name) const;
    bool has_block(const std::string& name) const;
    Vec segment(const Vec& x, const std::string& name) const;
    Vec load_at(double t) const { return spec.time_factor(t) * load; }
    // Mask of quasistatic dofs.
    std::vector<char> quasistatic_mask() const;
};

LimitSystem assemble_limit_system(const LimitContext& ctx, const LoadSpec& load);

// Macro and micro parts of the right-hand side, reported separately.
struct LoadFunctional {
    LoadMoments moments;
    Vec rhs;
    double macro_norm = 0.0;
    double micro_norm = 0.0;
    Vec membrane_response; // a^f: membrane field of the in-plane load (empty without a membrane block)
};

LoadFunctional compute_load_functional(const LimitContext& ctx, const LoadSpec& load);

// Solves (K + lambda M) x = rhs for lambda > 0.
Vec solve_limit_resolvent(const LimitSystem& sys, double lambda, const Vec& rhs);
Vec solve_limit_resolvent(const LimitSystem& sys, double lambda);

// Generalized eigenvalues of the system after eliminating the quasistatic
// blocks (dense; small systems only). Vectors are full-length with the
// quasistatic part reconstructed.
EigResult limit_system_eigs(const LimitSystem& sys, int N);

// ---------------------------------------------------------------------------
// Evolution
// ---------------------------------------------------------------------------
struct EvolveOptions {
    double T = 1.0;
    double dt = 0.0; // <= 0: T / 1000
    int record_every = 1;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Vec> x;
    std::vector<double> kinetic;
    std::vector<double> elastic;
    std::vector<double> total() const;
    double dt = 0.0;
    int steps = 0;
};

// Implicit midpoint for M x'' + K x = f(t) with the quasistatic blocks
// re-solved after every step. x0 is projected onto the quasistatic
// constraint at t = 0.
Trajectory evolve(const LimitSystem& sys, const Vec& x0, const Vec& v0, const EvolveOptions& opt);

// Same trajectory with the micro blocks eliminated: the macro unknowns
// solve a convolution equation whose kernels s^4 / (s^2 + eta_n) and
// s^2 / (s^2 + eta_n) are discretized by trapezoidal convolution
// quadrature; the micro coefficients are reconstructed afterwards. Zero
// initial data and a load vanishing at t = 0 are required.
Trajectory evolve_memory_kernel(const LimitSystem& sys, const EvolveOptions& opt);

// Trapezoidal Laplace transform at s of a recorded trajectory (every step
// recorded) compared with the resolvent (K + s^2 M)^{-1} M (s x0 + v0).
struct LaplaceCheck {
    double s = 0.0;
    double rel_error = 0.0;
};

std::vector<LaplaceCheck> laplace_check(const LimitSystem& sys, const Vec& x0, const Vec& v0,
                                        const std::vector<double>& s_values, double T, double dt);

// Limit spectrum of the row: macro eigenvalues for row 1; Zhikov roots
// otherwise (membrane rows use the membrane-parity inclusion operator;
// rows 3, 7, 9 the scalar third-component function); rows 8 and 9 add the
// strip interval [m0, inf).
struct RegimeSpectrumOptions {
    int macro_modes = 8;
    LimitSpectrumOptions zhikov;
    bool strip = true;
    int strip_points = 81;
    double strip_eta_max = 20.0;
};

struct RegimeSpectrum {
    LimitSpectrum spectrum;
    std::vector<double> macro_eigenvalues;
    std::optional<StripCurve> strip;
    std::string micro_operator;
    int modes_used = 0;
    std::optional<ZhikovFunction> zhikov; // empty for row 1
};

RegimeSpectrum regime_spectrum(const LimitContext& ctx, const RegimeSpectrumOptions& opt = {});

} // namespace hcp

#endif
