#include "hcplate/macro.hpp"
#include "hcplate/zhikov.hpp"

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

double min_eig(const Mat& A) { return Eigen::SelfAdjointEigenSolver<Mat>(A).eigenvalues().minCoeff(); }

struct Fixture {
    MaterialSpec mat = demo_material();
    CellMesh mesh = build_cell_mesh(kDisk, 16, 2, 0);
    BlochProblem prob = assemble_bloch(mat, mesh, BlochOperator::memb_delta0);
    BlochSpectrum all;
    double rho_mean = 0.0, rho1_mean = 0.0;

    Fixture()
    {
        EigWorkspace ws;
        ws.N = static_cast<int>(prob.pair.K.rows());
        ws.method = EigMethod::dense;
        all = bloch_spectrum(prob, ws);
        rho1_mean = mat.rho1 * (1.0 - mesh.soft_fraction());
        rho_mean = rho1_mean + prob.rho0_mean;
    }
};

const Fixture& fixture()
{
    static const Fixture f;
    return f;
}

// One scalar mode at eta with weighted mean m, plus optional uncoupled modes.
BlochSpectrum synthetic(const std::vector<double>& eta, const std::vector<double>& mean)
{
    BlochSpectrum s;
    const int n = static_cast<int>(eta.size());
    s.values = Eigen::Map<const Vec>(eta.data(), n);
    s.means = Eigen::Map<const Vec>(mean.data(), n);
    s.rho0_mean = 1.0;
    for (int i = 0; i < n; ++i) {
        s.cluster.push_back(i);
        s.coupled.push_back(std::abs(mean[i]) > 0.0 ? 1 : 0);
    }
    return s;
}

} // namespace

TEST(ZhikovEval, ValueAtZeroSlopeAndSymmetry)
{
    const auto& f = fixture();
    const ZhikovFunction zf(f.all, f.rho_mean, f.rho1_mean, 50);
    EXPECT_EQ(zf.eval(0.0).norm(), 0.0);
    const double lam = 1e-6;
    EXPECT_LT((zf.eval(lam) / lam - f.rho_mean * Mat::Identity(2, 2)).norm(), 1e-4);
    const Mat B = zf.eval(0.5 * zf.poles().front());
    EXPECT_LT((B - B.transpose()).norm(), 1e-12 * B.norm());
}

TEST(ZhikovEval, FullModalSumEqualsOracle)
{
    const auto& f = fixture();
    const ZhikovFunction zf(f.all, f.rho_mean, f.rho1_mean);
    const double eta1 = zf.poles().front();
    for (double t : {0.1, 0.5, 0.9, 1.3, 1.7}) {
        const double lam = t * eta1;
        const Mat o = beta_oracle(f.prob, f.rho_mean, lam);
        EXPECT_LT((zf.eval(lam) - o).norm(), 1e-8 * o.norm()) << "lambda " << lam;
        EXPECT_LT((o - o.transpose()).norm(), 1e-9 * o.norm());
    }
}

TEST(ZhikovEval, TruncatedSumWithinOnePercentAndMonotone)
{
    const auto& f = fixture();
    const ZhikovFunction z50(f.all, f.rho_mean, f.rho1_mean, 50);
    const double eta1 = z50.poles().front();
    const std::vector<double> lams = {0.5 * eta1, 0.25 * eta1, 0.75 * eta1, 0.1 * eta1, 0.9 * eta1};
    for (double lam : lams) {
        const Mat o = beta_oracle(f.prob, f.rho_mean, lam);
        EXPECT_LT((z50.eval(lam) - o).norm(), 1e-2 * o.norm());
        double prev = 1e300;
        for (int N : {5, 10, 20, 40, 80}) {
            const double err = (ZhikovFunction(f.all, f.rho_mean, f.rho1_mean, N).eval(lam) - o).norm();
            EXPECT_LE(err, prev * (1.0 + 1e-12)) << "N " << N;
            prev = err;
        }
    }
}

TEST(ZhikovEval, DerivativeBoundedBelowByStiffDensity)
{
    const auto& f = fixture();
    const ZhikovFunction zf(f.all, f.rho_mean, f.rho1_mean, 50);
    const auto& poles = zf.poles();
    const double I1 = f.rho1_mean;
    for (std::size_t k = 0; k + 1 < std::min<std::size_t>(poles.size(), 6); ++k) {
        for (double t : {0.2, 0.5, 0.8}) {
            const double lam = poles[k] + t * (poles[k + 1] - poles[k]);
            const double dl = 1e-6 * lam;
            const Mat fd = (zf.eval(lam + dl) - zf.eval(lam - dl)) / (2.0 * dl);
            EXPECT_GE(min_eig(fd) - I1, -1e-6 * std::max(1.0, fd.norm()));
            EXPECT_LT((fd - zf.derivative(lam)).norm(), 1e-5 * fd.norm());
            // Monotone between poles.
            const double lam2 = lam + 0.1 * (poles[k + 1] - lam);
            EXPECT_GE(min_eig(zf.eval(lam2) - zf.eval(lam)) - I1 * (lam2 - lam), -1e-8 * zf.eval(lam).norm());
        }
    }
}

TEST(ZhikovEval, NegativeAndDivergingRightOfFirstPole)
{
    const auto& f = fixture();
    const ZhikovFunction zf(f.all, f.rho_mean, f.rho1_mean, 50);
    const double eta1 = zf.poles().front();
    double prev = 0.0;
    for (int k = 2; k <= 5; ++k) {
        const double v = min_eig(zf.eval(eta1 * (1.0 + std::pow(10.0, -k))));
        EXPECT_LT(v, 0.0);
        EXPECT_LT(v, prev);
        prev = v;
    }
    EXPECT_THROW(zf.eval(eta1), SolverError);
}

TEST(ZhikovSpectrum, SinglePoleRootsMatchQuadratic)
{
    // beta(l) = l + l^2 m^2 / (10 - l) with m^2 = 1/2 equals 5 where
    // l^2 - 30 l + 100 = 0.
    const ZhikovFunction zf(synthetic({10.0}, {std::sqrt(0.5)}), 1.0, 0.5);
    LimitSpectrumOptions opt;
    opt.lambda_max = 40.0;
    const LimitSpectrum ls = limit_spectrum_scalar(zf, {5.0}, opt);
    ASSERT_EQ(ls.points.size(), 2u);
    EXPECT_NEAR(ls.points[0].lambda, 15.0 - std::sqrt(125.0), 1e-9);
    EXPECT_NEAR(ls.points[1].lambda, 15.0 + std::sqrt(125.0), 1e-9);
    EXPECT_EQ(ls.points[0].pole_interval, 0);
    EXPECT_EQ(ls.points[1].pole_interval, 1);
    for (const auto& p : ls.points) EXPECT_NEAR(zf.eval(p.lambda)(0, 0), 5.0, 1e-9 * 6.0);
    ASSERT_EQ(ls.gaps.size(), 2u);
    EXPECT_EQ(ls.gaps[0].first, 0.0);
    EXPECT_NEAR(ls.gaps[1].first, 10.0, 1e-15);
    EXPECT_NEAR(ls.gaps[1].second, 15.0 + std::sqrt(125.0), 1e-9);
    // Default range 1.5 eta_N keeps only the first root.
    EXPECT_EQ(limit_spectrum_scalar(zf, {5.0}).points.size(), 1u);
}

TEST(ZhikovSpectrum, NoCouplingGivesClassicalSpectrum)
{
    const ZhikovFunction zf(synthetic({3.0, 7.0}, {0.0, 0.0}), 2.0, 1.0);
    EXPECT_TRUE(zf.poles().empty());
    LimitSpectrumOptions opt;
    opt.lambda_max = 20.0;
    const LimitSpectrum ls = limit_spectrum_scalar(zf, {4.0, 10.0, 30.0}, opt);
    const std::vector<double> expect = {2.0, 3.0, 5.0, 7.0, 15.0};
    ASSERT_EQ(ls.points.size(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(ls.points[i].lambda, expect[i], 1e-9);
}

TEST(ZhikovSpectrum, ScalarAndMatrixPathsAgree)
{
    const auto& f = fixture();
    const ZhikovFunction zf(f.all, f.rho_mean, f.rho1_mean, 50);
    const MacroSpaces sp = build_macro_spaces(build_macro_mesh(1.0, 1.0, 3, 3, {Edge::left}));
    EffectiveTensor t;
    t.memb = reduced_tensor(f.mat.C1);
    const MacroOperator op = macro_operator(MacroKind::memb, sp, t, 1.0);
    const EigResult r = eigs_dense(op.pair.K, op.pair.M, static_cast<int>(op.pair.K.rows()));
    std::vector<double> mu(r.values.data(), r.values.data() + r.values.size());
    std::vector<Mat> G;
    for (const auto& Mcd : sp.memb_component_blocks()) G.push_back(r.vectors.transpose() * Mcd * r.vectors);
    LimitSpectrumOptions opt;
    opt.lambda_max = 1.2 * zf.poles()[2];
    const LimitSpectrum a = limit_spectrum_scalar(zf, mu, opt);
    const LimitSpectrum b = limit_spectrum_matrix(zf, r.values, G, opt);
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i)
        EXPECT_NEAR(a.points[i].lambda, b.points[i].lambda, 1e-8 * (1.0 + a.points[i].lambda));
    EXPECT_FALSE(a.gaps.empty());
}

TEST(ZhikovSpectrum, GapsStartAtPolesAndContainNoPoints)
{
    const auto& f = fixture();
    const ZhikovFunction zf(f.all, f.rho_mean, f.rho1_mean, 50);
    const LimitSpectrum ls = limit_spectrum_scalar(zf, {10.0, 40.0, 90.0, 200.0});
    for (const auto& g : ls.gaps) {
        const bool at_pole = g.first == 0.0 || std::find(zf.poles().begin(), zf.poles().end(), g.first) != zf.poles().end();
        EXPECT_TRUE(at_pole);
        for (double v : ls.values()) EXPECT_FALSE(v > g.first && v < g.second);
    }
    for (std::size_t i = 1; i < ls.points.size(); ++i) EXPECT_LT(ls.points[i - 1].lambda, ls.points[i].lambda);
}

TEST(ZhikovSpectrum, StripIntervalReplacesPointsAbove)
{
    const ZhikovFunction zf(synthetic({10.0}, {std::sqrt(0.5)}), 1.0, 0.5);
    LimitSpectrumOptions opt;
    opt.lambda_max = 40.0;
    opt.strip_m0 = 12.0;
    const LimitSpectrum ls = limit_spectrum_scalar(zf, {5.0}, opt);
    ASSERT_EQ(ls.points.size(), 1u);
    ASSERT_EQ(ls.intervals_from.size(), 1u);
    EXPECT_EQ(ls.intervals_from[0], 12.0);
    ASSERT_EQ(ls.gaps.size(), 2u);
    EXPECT_EQ(ls.gaps[1].second, 12.0);
}

TEST(ZhikovFunctionTest, ComponentSubsetTreatsZeroMeansAsUncoupled)
{
    BlochSpectrum s;
    s.values = Vec::LinSpaced(3, 1.0, 3.0);
    s.means = Mat(3, 3);
    s.means << 0.1, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.1, 0.0;
    s.cluster = {0, 1, 2};
    s.coupled = {1, 1, 1};
    s.rho0_mean = 1.0;
    const ZhikovFunction z3(s, 1.0, 0.5, 0, {2});
    EXPECT_EQ(z3.dim(), 1);
    ASSERT_EQ(z3.poles().size(), 1u);
    EXPECT_EQ(z3.poles()[0], 2.0);
    EXPECT_NEAR(z3.residues()[0](0, 0), 0.04, 1e-15);
    EXPECT_EQ(z3.uncoupled(), (std::vector<double>{1.0, 3.0}));
    EXPECT_THROW(ZhikovFunction(s, 1.0, 0.5, 0, {3}), ConfigError);
}

TEST(ZhikovSpectrum, RejectsAnisotropicScalarPath)
{
    BlochSpectrum s;
    s.values = Vec::Constant(1, 4.0);
    s.means = Mat(1, 2);
    s.means << 0.3, 0.0;
    s.cluster = {0};
    s.coupled = {1};
    s.rho0_mean = 1.0;
    const ZhikovFunction zf(s, 1.0, 0.5);
    EXPECT_THROW(limit_spectrum_scalar(zf, {1.0}), ConfigError);
    EXPECT_THROW(ZhikovFunction(s, 0.0, 0.5), ConfigError);
}
