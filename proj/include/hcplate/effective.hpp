#ifndef HCPLATE_EFFECTIVE_HPP
#define HCPLATE_EFFECTIVE_HPP

#include "hcplate/fem.hpp"
#include "hcplate/tensor.hpp"

#include <string>

namespace hcp {

enum class DeltaKind { zero, finite, infinite };

std::string to_string(DeltaKind k);

// Homogenized quadratic form on pairs (A, B) of symmetric 2x2 matrices in
// 2D Voigt form a = voigt2(A), b = voigt2(B):
//   Q(A, B) = a^T memb a + 2 a^T coupling b + b^T bend b.
struct EffectiveTensor {
    DeltaKind regime = DeltaKind::finite;
    double delta = 0.0;
    Mat3 memb = Mat3::Zero();
    Mat3 bend = Mat3::Zero();
    Mat3 coupling = Mat3::Zero();
    // Energy of the zero corrector on the same 6x6 layout (upper bound).
    Mat6 zero_corrector = Mat6::Zero();
    int n = 0;
    int nz = 0;
    int ndof = 0;
    double max_residual = 0.0;

    Mat6 full() const;
    double form(const Vec3& a, const Vec3& b) const;
};

// Cell problem on the stiff prism I x Y1 with the scaled gradient
// (grad_y | delta^{-1} d/dx3) and periodic correctors. The mesh must be a
// 3D cell mesh.
EffectiveTensor effective_delta(const MaterialSpec& mat, const CellMesh& mesh3d, double delta);

// Planar cell problems on Y1 with the reduced stiff tensor: a Q1 vector
// corrector for the membrane block and a periodic BFS corrector for the
// bending block (integrand carries C1^r / 12).
EffectiveTensor effective_delta0(const MaterialSpec& mat, const CellMesh& mesh2d);

// Planar cell problem on Y1 over (w, g) with w periodic in H1(Y; R^3) and
// g in R^3, strain sym iota(grad_y w) plus g in the transverse column. The
// minimization is pointwise in x3, so bend = memb / 12 and coupling = 0.
EffectiveTensor effective_deltainf(const MaterialSpec& mat, const CellMesh& mesh2d);

// Recovers the symmetric matrix of a quadratic form from scalar minimum
// values by polarization: Q_ij = (Q(e_i + e_j) - Q(e_i) - Q(e_j)) / 2.
Mat polarize(int dim, const std::function<double(const Vec&)>& quad);

} // namespace hcp

#endif
