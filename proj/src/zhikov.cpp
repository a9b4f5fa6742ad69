#include "hcplate/zhikov.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace hcp {

ZhikovFunction::ZhikovFunction(const BlochSpectrum& s, double rho_mean, double rho1_mean, int N,
                               const std::vector<int>& comps)
    : rho_mean_(rho_mean), rho1_mean_(rho1_mean)
{
    if (!(rho_mean > 0.0)) throw ConfigError("mean density must be positive");
    std::vector<int> cols = comps;
    if (cols.empty())
        for (int c = 0; c < s.means.cols(); ++c) cols.push_back(c);
    for (int c : cols)
        if (c < 0 || c >= s.means.cols()) throw ConfigError("Zhikov component index out of range");
    dim_ = static_cast<int>(cols.size());
    Mat means(s.size(), dim_);
    for (int k = 0; k < dim_; ++k) means.col(k) = s.means.col(cols[k]);
    int use = (N <= 0 || N > s.size()) ? s.size() : N;
    // A cluster that continues past the truncation is incomplete; drop it.
    if (use < s.size() && use > 0 && s.cluster[use] == s.cluster[use - 1]) {
        const int cut = s.cluster[use - 1];
        while (use > 0 && s.cluster[use - 1] == cut) --use;
    }
    modes_used_ = use;
    top_ = use > 0 ? s.values[use - 1] : 0.0;
    const double zero = 1e-7 * std::max(s.rho0_mean, 1e-300);
    for (int i = 0; i < use;) {
        int j = i;
        double sum = 0.0;
        bool coupled = false;
        Mat R = Mat::Zero(dim_, dim_);
        while (j < use && s.cluster[j] == s.cluster[i]) {
            sum += s.values[j];
            R += means.row(j).transpose() * means.row(j);
            if (means.row(j).norm() > zero) coupled = true;
            ++j;
        }
        const int size = j - i;
        const double eta = sum / size;
        R = 0.5 * (R + R.transpose());
        int rank = 0;
        if (coupled) {
            Eigen::SelfAdjointEigenSolver<Mat> es(R);
            for (int k = 0; k < dim_; ++k)
                if (es.eigenvalues()[k] > zero * zero) ++rank;
            poles_.push_back(eta);
            residues_.push_back(R);
        }
        // Combinations inside the cluster with zero mean remain eigenvalues.
        if (rank < size) uncoupled_.push_back(eta);
        i = j;
    }
}

Mat ZhikovFunction::eval(double lambda) const
{
    Mat B = lambda * rho_mean_ * Mat::Identity(dim_, dim_);
    for (std::size_t n = 0; n < poles_.size(); ++n) {
        const double d = poles_[n] - lambda;
        if (std::abs(d) <= pole_guard * poles_[n])
            throw SolverError("beta evaluated at a pole (lambda = " + std::to_string(lambda) + ")");
        B += (lambda * lambda / d) * residues_[n];
    }
    return B;
}

Mat ZhikovFunction::derivative(double lambda) const
{
    Mat B = rho_mean_ * Mat::Identity(dim_, dim_);
    for (std::size_t n = 0; n < poles_.size(); ++n) {
        const double d = poles_[n] - lambda;
        if (std::abs(d) <= pole_guard * poles_[n])
            throw SolverError("beta derivative evaluated at a pole");
        B += (lambda * (2.0 * poles_[n] - lambda) / (d * d)) * residues_[n];
    }
    return B;
}

Mat beta_oracle(const BlochProblem& prob, double rho_mean, double lambda)
{
    const SpMat A = prob.pair.K - lambda * prob.pair.M;
    Eigen::SparseLU<SpMat> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
        throw SolverError("beta oracle: K - lambda M is singular at lambda = " + std::to_string(lambda));
    const Mat X = lu.solve(prob.F);
    const int d = static_cast<int>(prob.F.cols());
    Mat B = lambda * rho_mean * Mat::Identity(d, d) + lambda * lambda * (prob.F.transpose() * X);
    return 0.5 * (B + B.transpose());
}

std::vector<double> LimitSpectrum::values() const
{
    std::vector<double> v;
    for (const auto& p : points) v.push_back(p.lambda);
    return v;
}

namespace {

// Pole intervals (a, b) covering (0, lambda_max].
std::vector<std::pair<double, double>> pole_intervals(const std::vector<double>& poles, double lmax)
{
    std::vector<std::pair<double, double>> iv;
    double a = 0.0;
    for (double p : poles) {
        if (p >= lmax) break;
        iv.emplace_back(a, p);
        a = p;
    }
    iv.emplace_back(a, lmax);
    return iv;
}

double resolve_lambda_max(const ZhikovFunction& zf, const LimitSpectrumOptions& opt)
{
    if (opt.lambda_max > 0.0) return opt.lambda_max;
    if (zf.top_eigenvalue() <= 0.0) throw ConfigError("limit spectrum needs at least one Bloch eigenvalue");
    return 1.5 * zf.top_eigenvalue();
}

void add_uncoupled_and_finish(LimitSpectrum& ls, const ZhikovFunction& zf, const LimitSpectrumOptions& opt)
{
    if (opt.include_uncoupled)
        for (double a : zf.uncoupled())
            if (a <= ls.lambda_max) ls.points.push_back({a, "uncoupled", -1, -1});
    if (opt.strip_m0) {
        const double m0 = *opt.strip_m0;
        ls.points.erase(std::remove_if(ls.points.begin(), ls.points.end(),
                                       [&](const SpectrumPoint& p) { return p.lambda >= m0; }),
                        ls.points.end());
        ls.intervals_from.push_back(m0);
    }
    std::sort(ls.points.begin(), ls.points.end(),
              [](const SpectrumPoint& a, const SpectrumPoint& b) { return a.lambda < b.lambda; });
    std::vector<SpectrumPoint> dedup;
    for (const auto& p : ls.points) {
        if (!dedup.empty() && std::abs(p.lambda - dedup.back().lambda) <= opt.cluster_tol * (1.0 + p.lambda)) continue;
        dedup.push_back(p);
    }
    ls.points = std::move(dedup);
    fill_gaps(ls, zf.poles());
}

} // namespace

void fill_gaps(LimitSpectrum& ls, const std::vector<double>& poles)
{
    ls.gaps.clear();
    std::vector<double> v = ls.values();
    std::sort(v.begin(), v.end());
    double top = ls.lambda_max;
    for (double a : ls.intervals_from) top = std::min(top, a);
    if (!v.empty() && v.front() > 0.0) ls.gaps.emplace_back(0.0, v.front());
    for (double p : poles) {
        if (p >= top) break;
        const auto it = std::upper_bound(v.begin(), v.end(), p);
        const double right = it == v.end() ? top : *it;
        if (right > p) ls.gaps.emplace_back(p, right);
    }
}

LimitSpectrum limit_spectrum_scalar(const ZhikovFunction& zf, const std::vector<double>& mu,
                                    const LimitSpectrumOptions& opt)
{
    LimitSpectrum ls;
    ls.lambda_max = resolve_lambda_max(zf, opt);
    const int d = zf.dim();
    // The scalar path is only valid when beta is isotropic.
    for (double t : {0.37, 0.71}) {
        const double lam = t * (zf.poles().empty() ? ls.lambda_max : zf.poles().front());
        const Mat B = zf.eval(lam);
        const double b = B.trace() / d;
        if ((B - b * Mat::Identity(d, d)).norm() > 1e-8 * std::abs(b))
            throw ConfigError("scalar limit-spectrum path needs beta proportional to the identity; use the matrix path");
    }
    auto bfun = [&](double lam) { return zf.eval(lam).trace() / d; };
    const auto iv = pole_intervals(zf.poles(), ls.lambda_max);
    for (std::size_t k = 0; k < iv.size(); ++k) {
        const double a = iv[k].first, b = iv[k].second;
        // Stay outside the pole guard band on both ends.
        const double lo = a * (1.0 + 4.0 * zf.pole_guard);
        const double hi = k + 1 == iv.size() ? b : b * (1.0 - 4.0 * zf.pole_guard);
        const double flo = a == 0.0 ? 0.0 : bfun(lo);
        const double fhi = bfun(hi);
        for (std::size_t m = 0; m < mu.size(); ++m) {
            if (!(mu[m] > flo && mu[m] < fhi)) continue;
            double x0 = lo, x1 = hi;
            while (x1 - x0 > opt.root_tol * (1.0 + x1)) {
                const double xm = 0.5 * (x0 + x1);
                if (bfun(xm) < mu[m]) x0 = xm;
                else x1 = xm;
            }
            ls.points.push_back({0.5 * (x0 + x1), "beta_root", static_cast<int>(m), static_cast<int>(k)});
        }
    }
    add_uncoupled_and_finish(ls, zf, opt);
    return ls;
}

LimitSpectrum limit_spectrum_matrix(const ZhikovFunction& zf, const Vec& D, const std::vector<Mat>& G,
                                    const LimitSpectrumOptions& opt)
{
    const int d = zf.dim();
    const int K = static_cast<int>(D.size());
    if (static_cast<int>(G.size()) != d * d) throw ConfigError("matrix limit-spectrum path needs dim^2 mass blocks");
    for (const auto& g : G)
        if (g.rows() != K || g.cols() != K) throw ConfigError("mass block size does not match the modal subspace");
    if (K == 0 || D.minCoeff() <= 0.0) throw ConfigError("macro stiffness eigenvalues must be positive");
    LimitSpectrum ls;
    ls.lambda_max = resolve_lambda_max(zf, opt);
    const Vec dinv = D.cwiseSqrt().cwiseInverse();
    // Number of eigenvalues of D^{-1/2} B(lambda) D^{-1/2} above 1.
    auto count = [&](double lam) {
        const Mat beta = zf.eval(lam);
        Mat B = Mat::Zero(K, K);
        for (int c = 0; c < d; ++c)
            for (int e = 0; e < d; ++e) B += beta(c, e) * G[c * d + e];
        B = dinv.asDiagonal() * (0.5 * (B + B.transpose())) * dinv.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Mat> es(B, Eigen::EigenvaluesOnly);
        int n = 0;
        for (int i = 0; i < K; ++i)
            if (es.eigenvalues()[i] > 1.0) ++n;
        return n;
    };
    const auto iv = pole_intervals(zf.poles(), ls.lambda_max);
    for (std::size_t k = 0; k < iv.size(); ++k) {
        const double a = iv[k].first, b = iv[k].second;
        // Stay outside the pole guard band on both ends.
        const double lo = a * (1.0 + 4.0 * zf.pole_guard);
        const double hi = k + 1 == iv.size() ? b : b * (1.0 - 4.0 * zf.pole_guard);
        const int clo = a == 0.0 ? 0 : count(lo);
        const int chi = count(hi);
        for (int j = clo + 1; j <= chi; ++j) {
            double x0 = lo, x1 = hi;
            while (x1 - x0 > opt.root_tol * (1.0 + x1)) {
                const double xm = 0.5 * (x0 + x1);
                if (count(xm) >= j) x1 = xm;
                else x0 = xm;
            }
            ls.points.push_back({0.5 * (x0 + x1), "beta_root", j - 1, static_cast<int>(k)});
        }
    }
    add_uncoupled_and_finish(ls, zf, opt);
    return ls;
}

} // namespace hcp
