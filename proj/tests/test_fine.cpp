#include "hcplate/fine.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hcp;

namespace {

MaterialSpec demo_material()
{
    MaterialSpec m;
    m.C0 = isotropic_tensor(1.0, 1.0);
    m.C1 = isotropic_tensor(2.0, 1.5);
    m.rho0 = 1.0;
    m.rho1 = 1.0;
    m.nu = 0.1;
    return m;
}

const InclusionShape kDisk{ShapeKind::disk, 0.5, 0.5, 0.2625};

FineSetup small_setup()
{
    FineSetup s;
    s.mat = demo_material();
    s.shape = kDisk;
    s.regime = regime_for_row(2);
    s.epsilon = 0.5;
    s.cell_n = 8;
    s.nz = 2;
    return s;
}

double rel_diff(const SpMat& A, const SpMat& B) { return SpMat(A - B).norm() / B.norm(); }

} // namespace

TEST(FineElements, IncompatibleModesPassThePatchTest)
{
    const Mat6 C = isotropic_tensor(2.0, 1.5);
    const double hx = 0.3, hy = 0.2, hz = 0.5;
    const Vec3 s(1.0, 1.0, 4.0);
    const Mat K = fe::q1_3d_stiffness_incompatible(C, hx, hy, hz, s);
    const Mat Kq = fe::q1_3d_stiffness(C, hx, hy, hz, s);
    // Affine field u = G x: exact energy vol * C e : e with scaled strain.
    Mat3 G;
    G << 0.3, -0.2, 0.1, 0.4, 0.5, -0.6, 0.7, 0.2, -0.3;
    Vec u(24);
    for (int a = 0; a < 8; ++a) {
        const Vec3 x((a & 1) * hx, ((a >> 1) & 1) * hy, ((a >> 2) & 1) * hz);
        u.segment<3>(3 * a) = G * x;
    }
    Mat3 Gs = G;
    for (int d = 0; d < 3; ++d) Gs.col(d) *= s[d];
    const Mat3 e = 0.5 * (Gs + Gs.transpose());
    Vec6 ev;
    ev << e(0, 0), e(1, 1), e(2, 2), 2 * e(1, 2), 2 * e(0, 2), 2 * e(0, 1);
    const double exact = hx * hy * hz * ev.dot(C * ev);
    EXPECT_NEAR(u.dot(K * u), exact, 1e-12 * exact);
    EXPECT_NEAR(u.dot(Kq * u), exact, 1e-12 * exact);
    // Enrichment only softens: Kq - K is positive semidefinite.
    const Eigen::SelfAdjointEigenSolver<Mat> es(Kq - K);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10 * Kq.norm());
}

TEST(FineProblem, HomogeneousMaterialIsIndependentOfEpsilon)
{
    FineSetup s = small_setup();
    s.mat.C0 = s.mat.C1;
    s.contrast = 1.0;
    s.h = 0.3;
    s.cell_n = 16;
    const auto a = fine_eigs(build_fine_problem(s), 5);
    s.epsilon = 0.25;
    s.cell_n = 8;
    const auto b = fine_eigs(build_fine_problem(s), 5);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-8 * a.values[i]);
}

TEST(FineProblem, ParitySpectraAreContainedInTheFullSpectrum)
{
    FineSetup s = small_setup();
    const auto full = fine_eigs(build_fine_problem(s), 16);
    for (FineParity p : {FineParity::membrane, FineParity::bending}) {
        s.parity = p;
        const FineProblem fp = build_fine_problem(s);
        const auto r = fine_eigs(fp, 4);
        for (int i = 0; i < 4; ++i) {
            double d = 1e300;
            for (int j = 0; j < full.values.size(); ++j) d = std::min(d, std::abs(full.values[j] - r.values[i]));
            EXPECT_LT(d, 1e-8 * r.values[i]) << to_string(p) << " " << i;
        }
    }
    // Lowest full eigenvalue is a bending mode for tau = 0.
    s.parity = FineParity::bending;
    EXPECT_NEAR(fine_eigs(build_fine_problem(s), 1).values[0], full.values[0], 1e-8 * full.values[0]);
}

TEST(FineProblem, SoftStiffnessScalesWithContrastSquared)
{
    FineSetup s = small_setup();
    auto K = [&](double mu) {
        s.contrast = mu;
        return build_fine_problem(s).full.K;
    };
    const SpMat K0 = K(0.0), K1 = K(1.0), K2 = K(2.0);
    EXPECT_LT(rel_diff(SpMat(K2 - K0), SpMat(4.0 * (K1 - K0))), 1e-12);
    EXPECT_DOUBLE_EQ(fine_contrast(MuScaling::eps, 0.5, 0.1), 0.5);
    EXPECT_DOUBLE_EQ(fine_contrast(MuScaling::eps_h, 0.5, 0.1), 0.05);
    EXPECT_DOUBLE_EQ(fine_contrast(MuScaling::eps2, 0.5, 0.1), 0.25);
}

TEST(FineProblem, ZeroLoadGivesZeroState)
{
    const FineProblem fp = build_fine_problem(small_setup());
    LoadSpec f;
    const FineState st = fine_resolvent(fp, 1.0, f);
    EXPECT_EQ(st.u.norm(), 0.0);
    EXPECT_EQ(st.membrane_parity_defect, 0.0);
}

TEST(FineProblem, MembraneLoadKeepsMembraneParity)
{
    const FineProblem fp = build_fine_problem(small_setup());
    LoadSpec f;
    f.amplitude = Vec3(1.0, 0.5, 0.0);
    f.macro = MacroProfile::sine;
    const FineState st = fine_resolvent(fp, 1.0, f);
    EXPECT_GT(st.u.norm(), 1e-6);
    EXPECT_LT(st.membrane_parity_defect, 1e-10);
    EXPECT_EQ(st.cell_mean_stiff.rows(), fp.cells1 * fp.cells2);
    // A transverse load breaks the symmetry.
    f.amplitude = Vec3(0.0, 0.0, 1.0);
    EXPECT_GT(fine_resolvent(fp, 1.0, f).membrane_parity_defect, 0.1);
}

TEST(FineProblem, PlateScalingKeepsEigenvaluesOrderOne)
{
    FineSetup s = small_setup();
    s.no_inclusion = true;
    s.regime = regime_for_row(1);
    s.epsilon = 0.25;
    s.cell_n = 4;
    s.h = 0.1;
    const double a = fine_eigs(build_fine_problem(s), 1).values[0];
    s.h = 0.05;
    const double b = fine_eigs(build_fine_problem(s), 1).values[0];
    EXPECT_GT(a, 1.0);
    EXPECT_LT(a, 10.0);
    EXPECT_LT(std::abs(a - b), 0.25 * a);
}

TEST(FineProblem, DistanceToSpectrum)
{
    LimitSpectrum s;
    s.points = {{1.0, "beta_root", 0, 0}, {4.0, "beta_root", 1, 0}};
    s.intervals_from = {10.0};
    const auto d = distance_to_spectrum({0.5, 3.0, 9.0, 12.0}, s);
    EXPECT_DOUBLE_EQ(d[0], 0.5);
    EXPECT_DOUBLE_EQ(d[1], 1.0);
    EXPECT_DOUBLE_EQ(d[2], 1.0);
    EXPECT_DOUBLE_EQ(d[3], 0.0);
}

TEST(FineProblem, Errors)
{
    FineSetup s = small_setup();
    s.epsilon = 0.3;
    EXPECT_THROW(build_fine_problem(s), ConfigError);
    s = small_setup();
    s.max_dofs = 100;
    EXPECT_THROW(build_fine_problem(s), ConfigError);
    s = small_setup();
    s.regime = regime_for_row(8);
    EXPECT_THROW(build_fine_problem(s), ConfigError);
    s.h = 2.0;
    EXPECT_NO_THROW(build_fine_problem(s));
    const FineProblem fp = build_fine_problem(small_setup());
    EXPECT_THROW(fine_resolvent(fp, 0.0, LoadSpec{}), ConfigError);
    EXPECT_THROW(fine_eigs(fp, 0), ConfigError);
}
