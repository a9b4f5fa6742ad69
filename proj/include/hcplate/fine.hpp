#ifndef HCPLATE_FINE_HPP
#define HCPLATE_FINE_HPP

#include "hcplate/fem.hpp"
#include "hcplate/limit.hpp"

#include <optional>
#include <vector>

namespace hcp {

// Direct 3D discretization of the scaled plate problem on omega x I with
// omega = [0,L1] x [0,L2], I = (-1/2, 1/2). The coefficients are
// eps-periodic in the plane and constant in x3: C1 on the stiff part and
// mu_h^2 C0 on the soft inclusions. The gradient is (d1, d2, h^{-1} d3) and
// the stiffness carries the factor h^{-tau}.

enum class FineParity { none, membrane, bending };

std::string to_string(FineParity p);
FineParity parse_fine_parity(const std::string& s);

struct FineSetup {
    MaterialSpec mat;
    InclusionShape shape;
    bool no_inclusion = false; // homogeneous stiff material, validation only
    RegimeConfig regime;       // mu scaling, tau and delta are used
    double epsilon = 0.5;      // omega must hold an integer number of cells
    double h = 0.0;            // <= 0: h = delta * epsilon
    std::optional<double> contrast; // replaces mu_h when set
    double L1 = 1.0;
    double L2 = 1.0;
    std::vector<Edge> gamma_D{Edge::left};
    int cell_n = 8; // elements per cell and direction
    int nz = 4;     // layers across I
    long max_dofs = 200000;
    FineParity parity = FineParity::none;
    bool incompatible_modes = true;
};

struct FineProblem {
    FineSetup setup;
    int cells1 = 0, cells2 = 0;
    int n1 = 0, n2 = 0, nz = 0; // elements per direction
    double hx = 0.0, hy = 0.0, hz = 0.0;
    double h = 0.0;
    double mu_h = 0.0;
    int tau = 0;
    DofMap dm;
    ElementSet es;
    std::vector<char> soft; // per planar element of omega
    // Assembled over the full dof set; K includes h^{-tau}.
    SparseOperatorPair full;
    // Parity basis (full dofs x reduced dofs); empty without a parity.
    SpMat P;
    // Operator actually solved: the full pair or its parity restriction.
    SparseOperatorPair pair;

    int num_nodes() const { return (n1 + 1) * (n2 + 1) * (nz + 1); }
    int node(int i, int j, int k) const { return i + (n1 + 1) * (j + (n2 + 1) * k); }
    double soft_fraction() const;
};

FineProblem build_fine_problem(const FineSetup& setup);

// Contrast mu_h for the scaling of the regime.
double fine_contrast(MuScaling mu, double epsilon, double h);

// Lowest N generalized eigenvalues of h^{-tau} A_eps against the rho mass.
// Vectors are full nodal fields (num_nodes * 3, fixed dofs zero).
EigResult fine_eigs(const FineProblem& fp, int N, EigWorkspace ws = {});

struct FineState {
    Mat u;                    // num_nodes x 3
    Mat transverse_average;   // planar nodes x 3: integral over I
    Mat cell_mean_stiff;      // cells x 3: average over I x (stiff part of the cell)
    Mat cell_mean_soft;       // cells x 3: average over I x (soft part of the cell)
    std::vector<double> cell_x, cell_y; // cell centers
    double membrane_parity_defect = 0.0; // |u - R u| / |u| for the membrane reflection R
};

// Solves (h^{-tau} a_eps + lambda m) u = integral of f.v. The time profile of
// the load is ignored.
FineState fine_resolvent(const FineProblem& fp, double lambda, const LoadSpec& load);

// Distance from each value to the nearest point of a limit spectrum
// (points and half-lines).
std::vector<double> distance_to_spectrum(const std::vector<double>& values, const LimitSpectrum& s);

} // namespace hcp

#endif
