#include "hcplate/fem.hpp"

#include <Eigen/QR>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hcp {

DofMap build_dofmap(int num_nodes, int ncomp, const std::function<int(int)>& master,
                    const std::vector<char>& active, const std::function<bool(int, int)>& fixed)
{
    DofMap dm;
    dm.num_nodes = num_nodes;
    dm.ncomp = ncomp;
    dm.index.assign(static_cast<std::size_t>(num_nodes) * ncomp, -1);
    std::vector<char> master_active(num_nodes, 0);
    for (int v = 0; v < num_nodes; ++v)
        if (active[v]) master_active[master(v)] = 1;
    int next = 0;
    for (int v = 0; v < num_nodes; ++v) {
        if (master(v) != v || !master_active[v]) continue;
        for (int c = 0; c < ncomp; ++c)
            if (!fixed(v, c)) dm.index[static_cast<std::size_t>(v) * ncomp + c] = next++;
    }
    for (int v = 0; v < num_nodes; ++v) {
        const int m = master(v);
        if (m == v || !active[v]) continue;
        for (int c = 0; c < ncomp; ++c)
            dm.index[static_cast<std::size_t>(v) * ncomp + c] = dm.index[static_cast<std::size_t>(m) * ncomp + c];
    }
    dm.ndof = next;
    return dm;
}

std::vector<char> ElementSet::active_nodes(int num_nodes) const
{
    std::vector<char> act(num_nodes, 0);
    for (int v : conn) act[v] = 1;
    return act;
}

ElementSet cell2d_elements(const CellMesh& m, const std::function<bool(int)>& filter,
                           const std::function<int(int)>& type)
{
    ElementSet es;
    es.npe = 4;
    for (int j = 0; j < m.n; ++j)
        for (int i = 0; i < m.n; ++i) {
            const int e = i + m.n * j;
            if (!filter(e)) continue;
            for (int ay = 0; ay < 2; ++ay)
                for (int ax = 0; ax < 2; ++ax) es.conn.push_back(m.node2d(i + ax, j + ay));
            es.type.push_back(type(e));
        }
    return es;
}

int cell3d_node(const CellMesh& m, int i, int j, int k) { return i + (m.n + 1) * (j + (m.n + 1) * k); }

ElementSet cell3d_elements(const CellMesh& m, const std::function<bool(int)>& filter, int k_begin, int k_end,
                           const std::function<int(int, int)>& type)
{
    ElementSet es;
    es.npe = 8;
    for (int k = k_begin; k < k_end; ++k)
        for (int j = 0; j < m.n; ++j)
            for (int i = 0; i < m.n; ++i) {
                const int e = i + m.n * j;
                if (!filter(e)) continue;
                for (int az = 0; az < 2; ++az)
                    for (int ay = 0; ay < 2; ++ay)
                        for (int ax = 0; ax < 2; ++ax) es.conn.push_back(cell3d_node(m, i + ax, j + ay, k + az));
                es.type.push_back(type(e, k));
            }
    return es;
}

std::function<int(int)> cell2d_master(const CellMesh& m)
{
    const int n = m.n;
    return [n](int v) {
        const int i = v % (n + 1), j = v / (n + 1);
        return (i % n) + (n + 1) * (j % n);
    };
}

std::function<int(int)> cell3d_master(const CellMesh& m)
{
    const int n = m.n;
    return [n](int v) {
        const int plane = (n + 1) * (n + 1);
        const int k = v / plane, r = v % plane;
        const int i = r % (n + 1), j = r / (n + 1);
        return (i % n) + (n + 1) * ((j % n) + (n + 1) * k);
    };
}

std::function<int(int)> identity_master()
{
    return [](int v) { return v; };
}

Mat constant_kernel(const DofMap& dm, const std::vector<int>& comps)
{
    Mat Z = Mat::Zero(dm.ndof, static_cast<int>(comps.size()));
    for (std::size_t c = 0; c < comps.size(); ++c) {
        for (int v = 0; v < dm.num_nodes; ++v) {
            const int d = dm.dof(v, comps[c]);
            if (d >= 0) Z(d, static_cast<int>(c)) = 1.0;
        }
        const double nrm = Z.col(static_cast<int>(c)).norm();
        if (nrm > 0.0) Z.col(static_cast<int>(c)) /= nrm;
    }
    return Z;
}

ElementSet macro_elements(const MacroMesh& m)
{
    ElementSet es;
    es.npe = 4;
    for (int j = 0; j < m.n2; ++j)
        for (int i = 0; i < m.n1; ++i) {
            for (int ay = 0; ay < 2; ++ay)
                for (int ax = 0; ax < 2; ++ax) es.conn.push_back(m.node(i + ax, j + ay));
            es.type.push_back(0);
        }
    return es;
}

namespace {

constexpr std::size_t kChunk = 1024;

// Element triplets are produced per chunk in parallel and concatenated in
// chunk order, so the summation order is independent of the thread count.
SpMat assemble_generic(int rows, int cols, const ElementSet& es, const std::vector<Mat>& elmats,
                       const std::function<int(int, int)>& row_dof, const std::function<int(int, int)>& col_dof,
                       bool per_element)
{
    const std::size_t ne = static_cast<std::size_t>(es.size());
    const std::size_t nchunks = (ne + kChunk - 1) / kChunk;
    std::vector<std::vector<Triplet>> parts(nchunks);
    parallel_for(nchunks, [&](std::size_t c) {
        auto& trip = parts[c];
        const std::size_t e1 = std::min(ne, (c + 1) * kChunk);
        for (std::size_t e = c * kChunk; e < e1; ++e) {
            const Mat& Ke = per_element ? elmats[e] : elmats[es.type[e]];
            const int* conn = &es.conn[e * es.npe];
            for (int r = 0; r < Ke.rows(); ++r) {
                const int gr = row_dof(conn[r / (Ke.rows() / es.npe)], r % (Ke.rows() / es.npe));
                if (gr < 0) continue;
                for (int s = 0; s < Ke.cols(); ++s) {
                    const int gc = col_dof(conn[s / (Ke.cols() / es.npe)], s % (Ke.cols() / es.npe));
                    if (gc < 0 || Ke(r, s) == 0.0) continue;
                    trip.emplace_back(gr, gc, Ke(r, s));
                }
            }
        }
    });
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    std::vector<Triplet> all;
    all.reserve(total);
    for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    SpMat A(rows, cols);
    A.setFromTriplets(all.begin(), all.end());
    A.makeCompressed();
    return A;
}

} // namespace

SpMat assemble_matrix(const DofMap& dm, const ElementSet& es, const std::vector<Mat>& elmats)
{
    auto dof = [&](int node, int comp) { return dm.dof(node, comp); };
    return symmetrize(assemble_generic(dm.ndof, dm.ndof, es, elmats, dof, dof, false));
}

SpMat assemble_cross(const DofMap& row_map, const DofMap& col_map, const ElementSet& es,
                     const std::vector<Mat>& elmats)
{
    auto rdof = [&](int node, int comp) { return row_map.dof(node, comp); };
    auto cdof = [&](int node, int comp) { return col_map.dof(node, comp); };
    return assemble_generic(row_map.ndof, col_map.ndof, es, elmats, rdof, cdof, false);
}

namespace {

Vec assemble_vec_impl(const DofMap& dm, const ElementSet& es, const std::vector<Vec>& elvecs, bool per_element)
{
    Vec f = Vec::Zero(dm.ndof);
    for (int e = 0; e < es.size(); ++e) {
        const Vec& fe = per_element ? elvecs[e] : elvecs[es.type[e]];
        const int per_node = static_cast<int>(fe.size()) / es.npe;
        const int* conn = &es.conn[static_cast<std::size_t>(e) * es.npe];
        for (int r = 0; r < fe.size(); ++r) {
            const int g = dm.dof(conn[r / per_node], r % per_node);
            if (g >= 0) f[g] += fe[r];
        }
    }
    return f;
}

} // namespace

Vec assemble_vector(const DofMap& dm, const ElementSet& es, const std::vector<Vec>& elvecs)
{
    return assemble_vec_impl(dm, es, elvecs, false);
}

Vec assemble_vector_per_element(const DofMap& dm, const ElementSet& es, const std::vector<Vec>& elvecs)
{
    return assemble_vec_impl(dm, es, elvecs, true);
}

SpMat hermitian_embed(const SpMat& A, const SpMat& S)
{
    const int n = static_cast<int>(A.rows());
    std::vector<Triplet> t;
    t.reserve(2 * (A.nonZeros() + S.nonZeros()));
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
            t.emplace_back(it.row(), it.col(), it.value());
            t.emplace_back(n + it.row(), n + it.col(), it.value());
        }
    for (int k = 0; k < S.outerSize(); ++k)
        for (SpMat::InnerIterator it(S, k); it; ++it) {
            t.emplace_back(it.row(), n + it.col(), -it.value());
            t.emplace_back(n + it.row(), it.col(), it.value());
        }
    SpMat E(2 * n, 2 * n);
    E.setFromTriplets(t.begin(), t.end());
    return symmetrize(E);
}

SpMat block_diag2(const SpMat& M)
{
    return hermitian_embed(M, SpMat(M.rows(), M.cols()));
}

// ---------------------------------------------------------------------------
// Linear solver
// ---------------------------------------------------------------------------

SpdSolver::SpdSolver(const SpMat& K, const Mat& kernel, SolveMethod method, double tol, int max_iter)
    : K_(K), Z_(kernel), method_(method), tol_(tol), max_iter_(max_iter)
{
    const int n = static_cast<int>(K.rows());
    if (Z_.size() > 0 && Z_.rows() != n) throw std::invalid_argument("SpdSolver: kernel size mismatch");
    if (Z_.cols() > 0) {
        // Orthonormalize the kernel basis.
        Eigen::HouseholderQR<Mat> qr(Z_);
        Z_ = qr.householderQ() * Mat::Identity(n, Z_.cols());
    }
    if (method_ != SolveMethod::direct) return;
    std::vector<char> pinned(n, 0);
    if (Z_.cols() > 0) {
        Eigen::ColPivHouseholderQR<Mat> qr(Z_.transpose());
        for (int c = 0; c < Z_.cols(); ++c) pinned[qr.colsPermutation().indices()[c]] = 1;
    }
    full_to_keep_.assign(n, -1);
    for (int i = 0; i < n; ++i)
        if (!pinned[i]) {
            full_to_keep_[i] = static_cast<int>(keep_.size());
            keep_.push_back(i);
        }
    std::vector<Triplet> t;
    t.reserve(K.nonZeros());
    for (int k = 0; k < K.outerSize(); ++k)
        for (SpMat::InnerIterator it(K, k); it; ++it) {
            const int r = full_to_keep_[it.row()], c = full_to_keep_[it.col()];
            if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
        }
    SpMat Kr(static_cast<int>(keep_.size()), static_cast<int>(keep_.size()));
    Kr.setFromTriplets(t.begin(), t.end());
    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
    ldlt_->compute(Kr);
    if (ldlt_->info() != Eigen::Success) throw SolverError("sparse LDLT factorization failed");
    const Vec d = ldlt_->vectorD();
    if (d.size() > 0 && d.minCoeff() <= 0.0)
        throw SolverError("stiffness is not positive definite on the constrained space");
}

Vec SpdSolver::solve_direct(const Vec& r) const
{
    Vec rr(static_cast<int>(keep_.size()));
    for (std::size_t i = 0; i < keep_.size(); ++i) rr[static_cast<int>(i)] = r[keep_[i]];
    const Vec xr = ldlt_->solve(rr);
    Vec x = Vec::Zero(r.size());
    for (std::size_t i = 0; i < keep_.size(); ++i) x[keep_[i]] = xr[static_cast<int>(i)];
    return x;
}

Vec SpdSolver::solve_cg(const Vec& b) const
{
    const int n = static_cast<int>(b.size());
    Vec dinv(n);
    for (int i = 0; i < n; ++i) {
        const double d = K_.coeff(i, i);
        dinv[i] = d > 0.0 ? 1.0 / d : 1.0;
    }
    auto project = [&](Vec& v) {
        if (Z_.cols() > 0) v -= Z_ * (Z_.transpose() * v);
    };
    Vec x = Vec::Zero(n);
    Vec r = b;
    const double bnorm = b.norm();
    if (bnorm == 0.0) return x;
    Vec z = dinv.cwiseProduct(r);
    project(z);
    Vec p = z;
    double rz = r.dot(z);
    for (int it = 0; it < max_iter_; ++it) {
        const Vec Ap = K_ * p;
        const double pAp = p.dot(Ap);
        if (pAp <= 0.0) throw SolverError("conjugate gradients met a non-positive curvature direction");
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        if (r.norm() <= 0.1 * tol_ * bnorm) break;
        z = dinv.cwiseProduct(r);
        project(z);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    return x;
}

Vec SpdSolver::solve(const Vec& rhs, double* residual) const
{
    if (rhs.size() != K_.rows()) throw std::invalid_argument("SpdSolver: right side size mismatch");
    Vec r = rhs;
    if (Z_.cols() > 0) r -= Z_ * (Z_.transpose() * r);
    const double bnorm = r.norm();
    if (bnorm == 0.0) {
        if (residual) *residual = 0.0;
        return Vec::Zero(rhs.size());
    }
    auto one = [&](const Vec& b) { return method_ == SolveMethod::direct ? solve_direct(b) : solve_cg(b); };
    Vec x = one(r);
    if (Z_.cols() > 0) x -= Z_ * (Z_.transpose() * x);
    Vec res = r - K_ * x;
    if (Z_.cols() > 0) res -= Z_ * (Z_.transpose() * res);
    if (res.norm() > 1e-14 * bnorm) {
        x += one(res);
        if (Z_.cols() > 0) x -= Z_ * (Z_.transpose() * x);
        res = r - K_ * x;
        if (Z_.cols() > 0) res -= Z_ * (Z_.transpose() * res);
    }
    const double rel = res.norm() / bnorm;
    if (residual) *residual = rel;
    if (rel > tol_)
        throw SolverError("linear solve did not reach the residual tolerance (relative residual " +
                          std::to_string(rel) + ")");
    return x;
}

Mat SpdSolver::solve(const Mat& rhs, double* residual) const
{
    Mat X(rhs.rows(), rhs.cols());
    double worst = 0.0;
    for (int c = 0; c < rhs.cols(); ++c) {
        double r = 0.0;
        X.col(c) = solve(Vec(rhs.col(c)), &r);
        worst = std::max(worst, r);
    }
    if (residual) *residual = worst;
    return X;
}

Vec solve_spd(const SparseOperatorPair& pair, const Vec& rhs, bool deflate_kernel, SolveMethod method)
{
    const Mat Z = deflate_kernel ? pair.kernel_basis : Mat();
    SpdSolver s(pair.K, Z, method);
    return s.solve(rhs);
}

// ---------------------------------------------------------------------------
// Eigensolvers
// ---------------------------------------------------------------------------

namespace {

double norm1(const SpMat& A)
{
    Vec colsum = Vec::Zero(A.cols());
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) colsum[it.col()] += std::abs(it.value());
    return colsum.size() > 0 ? colsum.maxCoeff() : 0.0;
}

// Normwise backward error of an eigenpair of the pencil (K, M).
double backward_error(const SpMat& K, const SpMat& M, double knorm, double mnorm, double theta, const Vec& y)
{
    const Vec R = K * y - theta * (M * y);
    const double scale = (knorm + std::abs(theta) * mnorm) * y.norm();
    return scale > 0.0 ? R.norm() / scale : R.norm();
}

void finalize(EigResult& r, const SpMat& K, const SpMat& M)
{
    const double knorm = norm1(K), mnorm = norm1(M);
    double worst = 0.0;
    for (int c = 0; c < r.vectors.cols(); ++c) {
        normalize_sign(r.vectors.col(c));
        worst = std::max(worst, backward_error(K, M, knorm, mnorm, r.values[c], r.vectors.col(c)));
    }
    r.max_residual = worst;
}

} // namespace

EigResult eigs_dense(const SpMat& K, const SpMat& M, int N)
{
    const int n = static_cast<int>(K.rows());
    if (N < 1 || N > n) throw std::invalid_argument("eigs: requested mode count outside [1, ndof]");
    const Mat Kd = Mat(K);
    const Mat Md = Mat(M);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (Kd + Kd.transpose()), 0.5 * (Md + Md.transpose()));
    if (es.info() != Eigen::Success) throw SolverError("dense generalized eigensolver failed");
    EigResult r;
    r.values = es.eigenvalues().head(N);
    r.vectors = es.eigenvectors().leftCols(N);
    r.method = "dense";
    r.krylov_dim = n;
    finalize(r, K, M);
    return r;
}

namespace {

// M-orthonormalizes the columns of V against Q (already M-orthonormal) and
// among themselves by two passes of classical Gram-Schmidt. Columns that
// collapse are replaced by random vectors.
void m_orthonormalize(const SpMat& M, const Mat& Q, Mat& V, std::mt19937_64& rng)
{
    std::normal_distribution<double> nd;
    for (int c = 0; c < V.cols(); ++c) {
        for (int attempt = 0; attempt < 4; ++attempt) {
            Vec v = V.col(c);
            const double n0 = std::sqrt(std::max(0.0, v.dot(M * v)));
            for (int pass = 0; pass < 2; ++pass) {
                if (Q.cols() > 0) v -= Q * (Q.transpose() * (M * v));
                if (c > 0) v -= V.leftCols(c) * (V.leftCols(c).transpose() * (M * v));
            }
            const double nv = std::sqrt(std::max(0.0, v.dot(M * v)));
            if (nv > 1e-10 * n0 && nv > 0.0) {
                V.col(c) = v / nv;
                break;
            }
            for (int i = 0; i < V.rows(); ++i) V(i, c) = nd(rng);
            if (attempt == 3) throw SolverError("eigensolver basis collapsed");
        }
    }
}

EigResult eigs_shift_invert(const SpMat& K, const SpMat& M, const EigWorkspace& ws)
{
    const int n = static_cast<int>(K.rows());
    const int N = ws.N;
    double sigma = ws.sigma;
    if (!ws.sigma_set) {
        const double tk = K.diagonal().sum();
        const double tm = M.diagonal().sum();
        sigma = -1e-6 * (tm > 0.0 ? tk / tm : 1.0);
    }
    const SpMat A = symmetrize(SpMat(K - sigma * M));
    Eigen::SimplicialLDLT<SpMat> ldlt(A);
    bool use_lu = ldlt.info() != Eigen::Success;
    Eigen::SparseLU<SpMat> lu;
    if (use_lu) {
        lu.compute(A);
        if (lu.info() != Eigen::Success) throw SolverError("shift-invert factorization failed");
    }
    auto apply = [&](const Mat& X) -> Mat {
        const Mat MX = M * X;
        return use_lu ? Mat(lu.solve(MX)) : Mat(ldlt.solve(MX));
    };

    const double knorm = norm1(K);
    const double mnorm = norm1(M);
    const int b = std::max(ws.block, std::min(N, 12));
    const int max_basis = std::min(n, std::max(3 * N + 2 * b, N + 4 * b));
    std::mt19937_64 rng(ws.seed);
    std::normal_distribution<double> nd;

    Mat locked(n, 0);
    Mat V(n, 0);
    Mat X(n, b);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < b; ++c) X(i, c) = nd(rng);
    m_orthonormalize(M, V, X, rng);
    V = X;

    EigResult r;
    int total_dim = 0;
    for (int restart = 0; restart < 200; ++restart) {
        // Grow the block Krylov space of the shift-inverted operator.
        while (V.cols() + b <= max_basis) {
            Mat W = apply(V.rightCols(b));
            m_orthonormalize(M, V, W, rng);
            Mat Vn(n, V.cols() + W.cols());
            Vn << V, W;
            V = std::move(Vn);
            total_dim += b;
        }
        // Rayleigh-Ritz with the original pencil (V is M-orthonormal).
        Mat H = V.transpose() * (K * V);
        H = 0.5 * (H + H.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(H);
        // Ritz values closest to sigma from above are the smallest ones.
        const Vec theta = es.eigenvalues();
        const Mat Y = V * es.eigenvectors();
        int converged = 0;
        std::vector<double> res(N);
        for (int c = 0; c < N; ++c) res[c] = backward_error(K, M, knorm, mnorm, theta[c], Y.col(c));
        while (converged < N && res[converged] <= ws.tol) ++converged;
        if (converged == N || V.cols() >= n) {
            r.values = theta.head(N);
            r.vectors = Y.leftCols(N);
            break;
        }
        // Thick restart: keep the best Ritz vectors plus a residual block.
        const int keep = std::min(static_cast<int>(V.cols()) - b, std::max(N + b / 2, converged + b));
        Mat Vk = Y.leftCols(keep);
        const int start = std::max(0, std::min(converged, keep - b));
        Mat Wn = apply(Y.middleCols(start, b));
        m_orthonormalize(M, Vk, Wn, rng);
        V.resize(n, keep + b);
        V << Vk, Wn;
        total_dim += b;
        if (restart == 199) throw SolverError("shift-invert eigensolver did not converge");
    }
    r.method = "shift_invert";
    r.krylov_dim = total_dim;
    finalize(r, K, M);
    return r;
}

} // namespace

EigResult eigs_smallest(const SpMat& K, const SpMat& M, const EigWorkspace& ws)
{
    const int n = static_cast<int>(K.rows());
    if (ws.N < 1 || ws.N > n) throw std::invalid_argument("eigs: requested mode count outside [1, ndof]");
    if (!(ws.tol > 0.0)) throw std::invalid_argument("eigs: tolerance must be positive");
    EigMethod m = ws.method;
    if (m == EigMethod::automatic) {
        const bool small = n <= 800 || 4 * ws.N > n;
        m = (n <= ws.dense_threshold && small) ? EigMethod::dense : EigMethod::shift_invert;
    }
    if (m == EigMethod::shift_invert && 3 * ws.N + 2 * ws.block >= n) m = EigMethod::dense;
    if (m == EigMethod::dense) return eigs_dense(K, M, ws.N);
    return eigs_shift_invert(K, M, ws);
}

Mat detect_kernel(const SpMat& K, int max_dim, double tol)
{
    const int n = static_cast<int>(K.rows());
    SpMat I(n, n);
    I.setIdentity();
    const double knorm = std::max(max_abs(K), 1e-300);
    EigWorkspace ws;
    ws.N = std::min(max_dim + 1, n);
    ws.tol = 1e-8;
    ws.sigma = -1e-6 * knorm;
    ws.sigma_set = true;
    const EigResult r = eigs_smallest(K, I, ws);
    int k = 0;
    while (k < r.values.size() && r.values[k] < tol * knorm) ++k;
    if (k > max_dim) throw SolverError("kernel dimension exceeds the search limit");
    Mat Z = r.vectors.leftCols(k);
    if (k > 0) {
        Eigen::HouseholderQR<Mat> qr(Z);
        Z = qr.householderQ() * Mat::Identity(n, k);
    }
    return Z;
}

} // namespace hcp
