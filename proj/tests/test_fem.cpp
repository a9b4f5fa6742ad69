#include "hcplate/fem.hpp"
#include "hcplate/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hcp;

namespace {

Mat3 plane_iso()
{
    Mat3 D;
    D << 3, 1, 0, 1, 3, 0, 0, 0, 1;
    return D;
}

// Periodic scalar-free 2D membrane pair on the full cell.
SparseOperatorPair periodic_membrane(int n)
{
    const CellMesh m = build_cell_mesh_no_inclusion(n, 2, 0);
    const ElementSet es = cell2d_elements(m, [](int) { return true; }, [](int) { return 0; });
    auto master = [&](int v) { return m.master2d(v % (n + 1), v / (n + 1)); };
    const DofMap dm = build_dofmap(m.num_nodes2d(), 2, master, es.active_nodes(m.num_nodes2d()),
                                   [](int, int) { return false; });
    SparseOperatorPair p;
    p.K = assemble_matrix(dm, es, {fe::q1_2d_membrane_stiffness(plane_iso(), m.h(), m.h())});
    p.M = assemble_matrix(dm, es, {fe::q1_2d_mass(1.0, m.h(), m.h(), 2)});
    return p;
}

// Clamped BFS plate on the unit square with the tensor D.
SparseOperatorPair clamped_plate(int n, const Mat3& D)
{
    const MacroMesh mm = build_macro_mesh(1, 1, n, n, {Edge::left, Edge::right, Edge::bottom, Edge::top});
    const ElementSet es = macro_elements(mm);
    const DofMap dm = build_dofmap(
        mm.num_nodes(), 4, [](int v) { return v; }, es.active_nodes(mm.num_nodes()),
        [&](int v, int c) {
            const int i = v % (n + 1), j = v / (n + 1);
            const bool xb = i == 0 || i == n, yb = j == 0 || j == n;
            if (c == 0) return xb || yb;
            if (c == 1) return xb || yb;
            if (c == 2) return xb || yb;
            return xb || yb;
        });
    SparseOperatorPair p;
    p.K = assemble_matrix(dm, es, {fe::bfs_stiffness(D, mm.hx(), mm.hy())});
    p.M = assemble_matrix(dm, es, {fe::bfs_mass(1.0, mm.hx(), mm.hy())});
    return p;
}

Mat frozen(const double (&a)[8][8])
{
    Mat K(8, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) K(i, j) = a[i][j];
    return K;
}

} // namespace

TEST(Q1Element, UnitSquareMatchesHandIntegration)
{
    const double ref[8][8] = {
        {4. / 3, 1. / 2, -5. / 6, 0, 1. / 6, 0, -2. / 3, -1. / 2},
        {1. / 2, 4. / 3, 0, 1. / 6, 0, -5. / 6, -1. / 2, -2. / 3},
        {-5. / 6, 0, 4. / 3, -1. / 2, -2. / 3, 1. / 2, 1. / 6, 0},
        {0, 1. / 6, -1. / 2, 4. / 3, 1. / 2, -2. / 3, 0, -5. / 6},
        {1. / 6, 0, -2. / 3, 1. / 2, 4. / 3, -1. / 2, -5. / 6, 0},
        {0, -5. / 6, 1. / 2, -2. / 3, -1. / 2, 4. / 3, 0, 1. / 6},
        {-2. / 3, -1. / 2, 1. / 6, 0, -5. / 6, 0, 4. / 3, 1. / 2},
        {-1. / 2, -2. / 3, 0, -5. / 6, 0, 1. / 6, 1. / 2, 4. / 3}};
    EXPECT_LT((fe::q1_2d_membrane_stiffness(plane_iso(), 1.0, 1.0) - frozen(ref)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Q1Element, StretchedElementMatchesHandIntegration)
{
    const double ref[8][8] = {
        {49. / 12, 1. / 2, -95. / 24, 0, 23. / 12, 0, -49. / 24, -1. / 2},
        {1. / 2, 19. / 12, 0, -29. / 24, 0, 5. / 12, -1. / 2, -19. / 24},
        {-95. / 24, 0, 49. / 12, -1. / 2, -49. / 24, 1. / 2, 23. / 12, 0},
        {0, -29. / 24, -1. / 2, 19. / 12, 1. / 2, -19. / 24, 0, 5. / 12},
        {23. / 12, 0, -49. / 24, 1. / 2, 49. / 12, -1. / 2, -95. / 24, 0},
        {0, 5. / 12, 1. / 2, -19. / 24, -1. / 2, 19. / 12, 0, -29. / 24},
        {-49. / 24, -1. / 2, 23. / 12, 0, -95. / 24, 0, 49. / 12, 1. / 2},
        {-1. / 2, -19. / 24, 0, 5. / 12, 0, -29. / 24, 1. / 2, 19. / 12}};
    EXPECT_LT((fe::q1_2d_membrane_stiffness(plane_iso(), 0.5, 2.0) - frozen(ref)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Q1Element, PatchTestLinearField3D)
{
    // u = G x with a constant symmetric G: element energy equals C e:e times volume.
    const Mat6 C = isotropic_tensor(1.3, 0.7);
    const double hx = 0.5, hy = 0.25, hz = 0.2;
    const Vec3 s(1.0, 1.0, 1.0);
    Mat3 G;
    G << 0.1, 0.2, -0.3, 0.2, -0.4, 0.5, -0.3, 0.5, 0.6;
    Vec u(24);
    for (int a = 0; a < 8; ++a) {
        const Vec3 x((a & 1) * hx, ((a >> 1) & 1) * hy, ((a >> 2) & 1) * hz);
        u.segment<3>(3 * a) = G * x;
    }
    const Mat K = fe::q1_3d_stiffness(C, hx, hy, hz, s);
    const Vec6 e = voigt3(G);
    EXPECT_NEAR(u.dot(K * u), e.dot(C * e) * hx * hy * hz, 1e-13);
    // Rigid translations lie in the kernel.
    Vec t(24);
    for (int a = 0; a < 8; ++a) t.segment<3>(3 * a) = Vec3(1.0, -2.0, 0.5);
    EXPECT_LT((K * t).norm(), 1e-13);
}

TEST(Q1Element, ScaledGradientMultipliesTransverseDerivative)
{
    const Mat6 C = isotropic_tensor(1.0, 1.0);
    // u3 = x3: with scaling s3 the strain e33 is s3.
    const double hz = 0.25, s3 = 4.0;
    Vec u = Vec::Zero(24);
    for (int a = 0; a < 8; ++a) u[3 * a + 2] = ((a >> 2) & 1) * hz;
    const Mat K = fe::q1_3d_stiffness(C, 1.0, 1.0, hz, Vec3(1.0, 1.0, s3));
    EXPECT_NEAR(u.dot(K * u), C(2, 2) * s3 * s3 * hz, 1e-12);
}

TEST(Assembly, PeriodicConstantsInKernel)
{
    const SparseOperatorPair p = periodic_membrane(6);
    Vec c(p.K.rows());
    for (int i = 0; i < c.size(); ++i) c[i] = i % 2 == 0 ? 1.0 : -0.5;
    EXPECT_LT((p.K * c).norm(), 1e-12);
    EXPECT_LT(relative_asymmetry(p.K), 1e-12);
    EXPECT_LT(relative_asymmetry(p.M), 1e-12);
    const Mat Z = detect_kernel(p.K);
    EXPECT_EQ(Z.cols(), 2);
    EXPECT_LT((p.K * Z).norm(), 1e-8 * max_abs(p.K));
}

TEST(Assembly, AssemblyIndependentOfThreadCount)
{
    set_thread_count(1);
    const SparseOperatorPair a = periodic_membrane(40);
    set_thread_count(3);
    const SparseOperatorPair b = periodic_membrane(40);
    set_thread_count(1);
    EXPECT_EQ(Mat(a.K - b.K).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Bfs, AffineFieldsInKernelAndQuadraticEnergy)
{
    Mat3 D;
    D << 2.0, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 0.7;
    const double hx = 0.5, hy = 0.25;
    const Mat K = fe::bfs_stiffness(D, hx, hy);
    Vec aff(16), quad(16);
    for (int a = 0; a < 4; ++a) {
        const double x = (a & 1) * hx, y = ((a >> 1) & 1) * hy;
        aff.segment<4>(4 * a) << 1.0 + 2.0 * x - 3.0 * y, 2.0, -3.0, 0.0;
        quad.segment<4>(4 * a) << 0.5 * x * x, x, 0.0, 0.0;
    }
    EXPECT_LT((K * aff).norm(), 1e-11);
    EXPECT_NEAR(quad.dot(K * quad), D(0, 0) * hx * hy, 1e-12);
}

TEST(Bfs, ClampedBiharmonicLowestEigenvalue)
{
    // Identity tensor on symmetric matrices: |grad^2 u|^2 in Voigt weighting.
    const Mat3 D = Vec3(1.0, 1.0, 0.5).asDiagonal();
    double prev = 1e300;
    for (int n : {4, 8, 12}) {
        const SparseOperatorPair p = clamped_plate(n, D);
        EigWorkspace ws;
        ws.N = 1;
        const double lam = eigs_smallest(p.K, p.M, ws).values[0];
        EXPECT_LE(lam, prev * (1 + 1e-12));
        prev = lam;
    }
    EXPECT_NEAR(prev, 1294.93, 0.5);
}

TEST(SpdSolve, DenseOracleAndZeroRhs)
{
    const SparseOperatorPair p = clamped_plate(4, Vec3(1.0, 1.0, 0.5).asDiagonal());
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    Vec b(p.M.rows());
    for (int i = 0; i < b.size(); ++i) b[i] = nd(rng);
    SparseOperatorPair mm{p.M, p.M, Mat(), "mass"};
    const Vec x = solve_spd(mm, b, false);
    const Vec xd = Mat(p.M).ldlt().solve(b);
    EXPECT_LT((x - xd).norm() / xd.norm(), 1e-10);
    EXPECT_EQ(solve_spd(mm, Vec::Zero(b.size()), false).norm(), 0.0);
    const Vec xcg = solve_spd(mm, b, false, SolveMethod::cg);
    EXPECT_LT((xcg - xd).norm() / xd.norm(), 1e-8);
}

TEST(SpdSolve, DeflatedKernelComponentRemoved)
{
    SparseOperatorPair p = periodic_membrane(6);
    p.kernel_basis = detect_kernel(p.K);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    Vec b(p.K.rows());
    for (int i = 0; i < b.size(); ++i) b[i] = nd(rng);
    b += 3.0 * p.kernel_basis.col(0);
    for (SolveMethod m : {SolveMethod::direct, SolveMethod::cg}) {
        SpdSolver s(p.K, p.kernel_basis, m);
        const Vec x = s.solve(b);
        EXPECT_LT((p.kernel_basis.transpose() * x).norm(), 1e-10 * x.norm());
        Vec r = b - p.K * x;
        r -= p.kernel_basis * (p.kernel_basis.transpose() * r);
        EXPECT_LE(r.norm() / b.norm(), 1e-10);
    }
}

TEST(Eigs, DiagonalPencil)
{
    SpMat K(10, 10), M(10, 10);
    for (int i = 0; i < 10; ++i) {
        K.insert(i, i) = i + 1.0;
        M.insert(i, i) = 1.0;
    }
    EigWorkspace ws;
    ws.N = 3;
    const EigResult r = eigs_smallest(K, M, ws);
    EXPECT_NEAR(r.values[0], 1.0, 1e-12);
    EXPECT_NEAR(r.values[1], 2.0, 1e-12);
    EXPECT_NEAR(r.values[2], 3.0, 1e-12);
}

TEST(Eigs, DenseAndShiftInvertAgree)
{
    const SparseOperatorPair p = clamped_plate(10, Vec3(1.0, 1.0, 0.5).asDiagonal());
    ASSERT_LE(p.K.rows(), 2000);
    EigWorkspace ws;
    ws.N = 8;
    ws.method = EigMethod::dense;
    const EigResult d = eigs_smallest(p.K, p.M, ws);
    ws.method = EigMethod::shift_invert;
    const EigResult s = eigs_smallest(p.K, p.M, ws);
    EXPECT_EQ(s.method, "shift_invert");
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(s.values[i], d.values[i], 1e-8 * d.values[i]);
    const Mat G = s.vectors.transpose() * (p.M * s.vectors);
    EXPECT_LT((G - Mat::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE(s.max_residual, 1e-12);
}

TEST(Eigs, FullSpectrumTraceIdentity)
{
    const SparseOperatorPair p = clamped_plate(3, Vec3(1.0, 1.0, 0.5).asDiagonal());
    const int n = static_cast<int>(p.K.rows());
    EigWorkspace ws;
    ws.N = n;
    const EigResult r = eigs_smallest(p.K, p.M, ws);
    const double tr = (Mat(p.M).ldlt().solve(Mat(p.K))).trace();
    EXPECT_NEAR(r.values.sum(), tr, 1e-8 * tr);
}

TEST(Eigs, ShiftInvertFindsKernelModes)
{
    const SparseOperatorPair p = periodic_membrane(24);
    EigWorkspace ws;
    ws.N = 5;
    ws.method = EigMethod::shift_invert;
    const EigResult r = eigs_smallest(p.K, p.M, ws);
    EXPECT_LT(std::abs(r.values[0]), 1e-8);
    EXPECT_LT(std::abs(r.values[1]), 1e-8);
    EXPECT_GT(r.values[2], 1.0);
    ws.method = EigMethod::dense;
    const EigResult d = eigs_smallest(p.K, p.M, ws);
    for (int i = 2; i < 5; ++i) EXPECT_NEAR(r.values[i], d.values[i], 1e-8 * d.values[i]);
}
