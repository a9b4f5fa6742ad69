#ifndef HCPLATE_ZHIKOV_HPP
#define HCPLATE_ZHIKOV_HPP

#include "hcplate/bloch.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace hcp {

// beta(lambda) = lambda <rho> I + sum_n lambda^2 / (eta_n - lambda) R_n
// with R_n the summed outer products of the weighted means of the coupled
// cluster at eta_n.
class ZhikovFunction {
public:
    ZhikovFunction() = default;
    // Uses the first N modes of the spectrum (all when N <= 0). Clusters cut
    // by the truncation are dropped as a whole. comps selects tracked mean
    // columns (all when empty); {2} on a 3-component spectrum gives the
    // scalar beta_33 and treats modes with zero third mean as uncoupled.
    ZhikovFunction(const BlochSpectrum& s, double rho_mean, double rho1_mean, int N = 0,
                   const std::vector<int>& comps = {});

    Mat eval(double lambda) const;
    Mat derivative(double lambda) const;
    int dim() const { return dim_; }
    double rho_mean() const { return rho_mean_; }
    double rho1_mean() const { return rho1_mean_; }
    const std::vector<double>& poles() const { return poles_; }
    const std::vector<Mat>& residues() const { return residues_; }
    const std::vector<double>& uncoupled() const { return uncoupled_; }
    // Largest eigenvalue of the modes used: upper end of the trusted range.
    double top_eigenvalue() const { return top_; }
    int modes_used() const { return modes_used_; }
    double pole_guard = 1e-8;

private:
    int dim_ = 0;
    double rho_mean_ = 0.0;
    double rho1_mean_ = 0.0;
    std::vector<double> poles_;
    std::vector<Mat> residues_;
    std::vector<double> uncoupled_;
    double top_ = 0.0;
    int modes_used_ = 0;
};

// Truncation-free evaluation lambda <rho> I + lambda^2 F^T (K - lambda M)^{-1} F.
Mat beta_oracle(const BlochProblem& prob, double rho_mean, double lambda);

struct SpectrumPoint {
    double lambda = 0.0;
    std::string kind;    // "beta_root", "uncoupled"
    int matched_mu = -1; // macro eigenvalue index for beta roots
    int pole_interval = -1;
};

struct LimitSpectrum {
    std::string regime;
    std::vector<SpectrumPoint> points;
    // Half-lines [a, inf) such as the strip interval for delta = infinity.
    std::vector<double> intervals_from;
    std::vector<std::pair<double, double>> gaps;
    double lambda_max = 0.0;
    std::string note;

    std::vector<double> values() const;
};

struct LimitSpectrumOptions {
    double lambda_max = 0.0;   // <= 0: 1.5 times the top Bloch eigenvalue used
    double root_tol = 1e-10;   // |d lambda| <= root_tol (1 + lambda)
    double cluster_tol = 1e-8; // relative dedup tolerance
    bool include_uncoupled = true;
    std::optional<double> strip_m0; // adds [m0, inf) and drops points above it
};

// Scalar path: beta must be a multiple of the identity; roots of
// b(lambda) = mu_k with b = trace(beta) / dim in every pole interval.
LimitSpectrum limit_spectrum_scalar(const ZhikovFunction& zf, const std::vector<double>& mu,
                                    const LimitSpectrumOptions& opt = {});

// Matrix path in a macro modal subspace: stiffness eigenvalues D (modes
// normalized by the unit mass) and component mass blocks G[c*dim + d] =
// Phi^T M_cd Phi. A point is where an eigenvalue of
// D^{-1/2} (sum beta_cd G_cd) D^{-1/2} crosses 1.
LimitSpectrum limit_spectrum_matrix(const ZhikovFunction& zf, const Vec& D, const std::vector<Mat>& G,
                                    const LimitSpectrumOptions& opt = {});

// Computes gaps from the point set: (0, first point) and (eta_n, first
// point above eta_n) for each pole.
void fill_gaps(LimitSpectrum& ls, const std::vector<double>& poles);

} // namespace hcp

#endif
