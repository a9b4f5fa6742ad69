#include "hcplate/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace hcp {

namespace {
std::atomic<int> g_threads{1};
} // namespace

void set_thread_count(int n) { g_threads = std::max(1, n); }

int thread_count() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body)
{
    const int nt = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&]() {
            for (std::size_t i = next++; i < n; i = next++) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

SpMat symmetrize(const SpMat& A)
{
    SpMat At = A.transpose();
    SpMat S = 0.5 * (A + At);
    S.prune(0.0);
    S.makeCompressed();
    return S;
}

double max_abs(const SpMat& A)
{
    double m = 0.0;
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

double relative_asymmetry(const SpMat& A)
{
    const double scale = max_abs(A);
    if (scale == 0.0) return 0.0;
    SpMat At = A.transpose();
    SpMat D = A - At;
    return max_abs(D) / scale;
}

void normalize_sign(Eigen::Ref<Vec> v)
{
    const double m = v.cwiseAbs().maxCoeff();
    if (m == 0.0) return;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > 1e-10 * m) {
            if (v[i] < 0) v = -v;
            return;
        }
    }
}

} // namespace hcp
