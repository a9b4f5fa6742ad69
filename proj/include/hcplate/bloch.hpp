#ifndef HCPLATE_BLOCH_HPP
#define HCPLATE_BLOCH_HPP

#include "hcplate/fem.hpp"
#include "hcplate/tensor.hpp"

#include <string>
#include <vector>

namespace hcp {

// Inclusion operators with zero lateral trace on the soft region.
//   full_delta     C0 sym grad~_delta on the prism I x Y0 (3 components)
//   memb_delta     same operator on the membrane parity subspace
//                  (in-plane components even, transverse odd in x3)
//   bend_delta     same operator on the bending parity subspace
//   memb_delta0    C0^r sym grad on Y0 (2 components)
//   bend_delta0    (C0^r / 12) grad^2 on H^2_0(Y0) (BFS, scalar)
//   memb_deltainf  C0 sym iota(grad_y u) with u3 = 0 on Y0
//   full_deltainf  C0 sym iota(grad_y u) on Y0 (3 components)
enum class BlochOperator { full_delta, memb_delta, bend_delta, memb_delta0, bend_delta0, memb_deltainf, full_deltainf };

std::string to_string(BlochOperator op);
BlochOperator parse_bloch_operator(const std::string& s);
// Number of weighted-mean components tracked by the operator (3, 2 or 1).
int tracked_components(BlochOperator op);
bool needs_prism(BlochOperator op);

struct BlochProblem {
    BlochOperator op = BlochOperator::full_delta;
    double delta = 1.0;
    SparseOperatorPair pair;
    // Columns F_i with F_i^T v = full-domain integral of rho0 * (component i
    // of v) for the tracked components, including the parity factor of the
    // half-prism variants. The weighted mean of an M-normalized mode phi is
    // F^T phi.
    Mat F;
    // Same layout as F with the weight rho0 * x3 (prism operators only;
    // empty for planar operators).
    Mat Fx3;
    // Node and component (BFS: derivative slot) of every dof.
    std::vector<int> dof_node;
    std::vector<int> dof_comp;
    // Map from tracked component index to the field component it reads.
    std::vector<int> components;
    double rho0_mean = 0.0; // <rho0> = rho0 |Y0|
    double soft_area = 0.0;
    int n = 0;
    int nz = 0;
};

BlochProblem assemble_bloch(const MaterialSpec& mat, const CellMesh& mesh, BlochOperator op, double delta = 1.0);

struct BlochSpectrum {
    BlochOperator op = BlochOperator::full_delta;
    double delta = 1.0;
    Vec values;            // ascending
    Mat modes;             // M-orthonormal columns
    Mat means;             // N x tracked, row n = weighted mean of mode n
    Mat means_x3;          // same with the weight rho0 * x3 (prism operators)
    std::vector<char> coupled; // per mode: its cluster has a nonzero mean
    std::vector<int> cluster;  // cluster id per mode
    double rho0_mean = 0.0;
    std::string method;
    double max_residual = 0.0;

    int size() const { return static_cast<int>(values.size()); }
    // Coupled eigenvalues (one per coupled cluster) and the summed
    // outer products of their means: the poles eta_n and residue matrices.
    std::vector<double> pole_values() const;
    std::vector<Mat> pole_residues() const;
    // Uncoupled (alpha-type) eigenvalues, one per cluster.
    std::vector<double> uncoupled_values() const;
};

struct ClassifyOptions {
    double cluster_gap = 1e-6;  // relative eigenvalue gap that splits clusters
    double zero_mean = 1e-7;    // |mean| <= zero_mean * <rho0> counts as zero
};

BlochSpectrum bloch_spectrum(const BlochProblem& prob, const EigWorkspace& ws, const ClassifyOptions& opt = {});

// Partial sums S_N = sum_{n < N} m_n m_n^T for N = 1..size.
std::vector<Mat> completeness_partial_sums(const BlochSpectrum& s);
// Full-spectrum value F^T M^{-1} F of the discrete completeness sum.
Mat completeness_limit(const BlochProblem& prob);

// Bottom of the strip spectrum.
struct StripCurve {
    std::vector<double> eta;
    std::vector<double> alpha1;
    double m0 = 0.0;
    double eta_min = 0.0;
};

// The complex strain of the strip form is B0 u + i eta B1 u, so the
// Hermitian matrix at eta is A + iS with A = K00 + eta^2 K11 and
// S = eta (K01 - K01^T).
struct StripProblem {
    SpMat K00, K11, K01;
    SpMat M; // mass of one real copy
};

StripProblem assemble_strip(const MaterialSpec& mat, const CellMesh& mesh);
// Smallest eigenvalue of the Hermitian form at eta.
double strip_alpha1(const StripProblem& sp, double eta);
StripCurve strip_bottom_m0(const StripProblem& sp, double eta_max = 20.0, int npts = 81);

} // namespace hcp

#endif
