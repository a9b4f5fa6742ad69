#ifndef HCPLATE_TENSOR_HPP
#define HCPLATE_TENSOR_HPP

#include "hcplate/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>

namespace hcp {

// Voigt convention used everywhere in this library:
//   3D strain  (e11, e22, e33, 2 e23, 2 e13, 2 e12)
//   2D strain  (e11, e22, 2 e12)
// Elasticity matrices act on these strain vectors, so that C xi : xi equals
// v^T C v with v the Voigt vector of xi.
using Mat2 = Eigen::Matrix2d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

Vec6 voigt3(const Mat3& e);
Mat3 from_voigt3(const Vec6& v);
Vec3 voigt2(const Mat2& e);
Mat2 from_voigt2(const Vec3& v);

// Full fourth-order component C_ijkl read from the Voigt matrix.
double voigt_component(const Mat6& C, int i, int j, int k, int l);
// C xi : xi by direct index summation (used to validate the Voigt layout).
double contract_direct(const Mat6& C, const Mat3& xi);

Mat6 isotropic_tensor(double lambda, double mu);

Mat3 iota(const Mat2& A);
Mat3 iota(const Mat32& A);
Mat3 iota1(const Vec3& a);

// Reduced tensor C^r on symmetric 2x2 matrices: min over d of
// C[iota(A) + iota1(d)] : [iota(A) + iota1(d)], computed as the Schur
// complement that eliminates the transverse strains (33, 23, 13).
Mat3 reduced_tensor(const Mat6& C);

struct ReducedPair {
    Mat3 memb;
    Mat3 bend;
};

// Pointwise reduced soft tensors: memb = C0^r and bend = C0^r / 12.
ReducedPair c0_red(const Mat6& C0);

struct CoercivityReport {
    double min_eig = 0.0;
    double max_eig = 0.0;
    bool coercive = false; // min_eig >= nu
    bool bounded = false;  // max_eig <= 1/nu
    bool pass = false;     // coercivity (lower bound)
    double margin = 0.0;   // min_eig - nu
};

// Eigenvalues of C as an operator on symmetric 3x3 matrices with the
// Frobenius inner product.
Vec6 tensor_eigenvalues(const Mat6& C);
CoercivityReport check_coercivity(const Mat6& C, double nu);

// True when C does not couple the (i3) shear strains with the remaining
// components, the planar symmetry that makes membrane and bending decouple.
bool planar_symmetric(const Mat6& C, double tol = 1e-12);

// Voigt representation of the 90 degree rotation acting on 2D strains.
Mat3 rotation90_voigt2();

struct MaterialSpec {
    Mat6 C0 = Mat6::Zero();
    Mat6 C1 = Mat6::Zero();
    double rho0 = 1.0;
    double rho1 = 1.0;
    double nu = 0.1;

    bool planar_symmetric() const;
    // Throws ConfigError when the bounds nu|xi|^2 <= C xi:xi <= |xi|^2/nu or
    // the density bounds fail.
    void validate() const;
};

Mat6 parse_tensor_json(const nlohmann::json& j);
MaterialSpec parse_material_json(const nlohmann::json& j);
MaterialSpec load_material_file(const std::string& path);
nlohmann::json material_to_json(const MaterialSpec& m);

} // namespace hcp

#endif
