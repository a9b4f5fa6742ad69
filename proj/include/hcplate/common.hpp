#ifndef HCPLATE_COMMON_HPP
#define HCPLATE_COMMON_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Error taxonomy. The C API and the CLI map these onto exit codes:
// ConfigError and GeometryError -> 2, SolverError -> 3.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GeometryError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Number of worker threads used by parallel_for. Defaults to 1.
void set_thread_count(int n);
int thread_count();

// Runs body(i) for i in [0, n). Work is split in fixed-size chunks so that the
// per-chunk results (and any reduction done in chunk order) do not depend on
// the number of threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Symmetrized copy, used after assembly to remove round-off asymmetry.
SpMat symmetrize(const SpMat& A);

// Relative asymmetry ||A - A^T||_max / ||A||_max.
double relative_asymmetry(const SpMat& A);

// Largest absolute entry.
double max_abs(const SpMat& A);

// Fixes the sign of a vector so that its first entry with magnitude above
// 1e-10 * max|v| is positive.
void normalize_sign(Eigen::Ref<Vec> v);

} // namespace hcp

#endif
