#include "hcplate/fem.hpp"

#include <cmath>
#include <stdexcept>

namespace hcp::fe {

Rule1D gauss01(int npts)
{
    Rule1D r;
    switch (npts) {
    case 1:
        r.x = {0.0};
        r.w = {2.0};
        break;
    case 2: {
        const double a = 1.0 / std::sqrt(3.0);
        r.x = {-a, a};
        r.w = {1.0, 1.0};
        break;
    }
    case 3: {
        const double a = std::sqrt(0.6);
        r.x = {-a, 0.0, a};
        r.w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
        break;
    }
    case 4: {
        const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
        const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
        const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
        const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
        r.x = {-b, -a, a, b};
        r.w = {wb, wa, wa, wb};
        break;
    }
    default:
        throw std::invalid_argument("gauss01: unsupported number of points");
    }
    for (auto& x : r.x) x = 0.5 * (x + 1.0);
    for (auto& w : r.w) w *= 0.5;
    return r;
}

namespace {

inline double lin(int a, double t) { return a == 0 ? 1.0 - t : t; }
inline double dlin(int a) { return a == 0 ? -1.0 : 1.0; }

// Cubic Hermite functions on [0,1] scaled to an interval of length L:
// value/slope at the end a. Returns f, f', f'' with respect to x.
void hermite(int a, bool slope, double t, double L, double& f, double& d1, double& d2)
{
    if (!slope) {
        if (a == 0) {
            f = 1.0 - 3.0 * t * t + 2.0 * t * t * t;
            d1 = (-6.0 * t + 6.0 * t * t) / L;
            d2 = (-6.0 + 12.0 * t) / (L * L);
        } else {
            f = 3.0 * t * t - 2.0 * t * t * t;
            d1 = (6.0 * t - 6.0 * t * t) / L;
            d2 = (6.0 - 12.0 * t) / (L * L);
        }
    } else {
        if (a == 0) {
            f = L * (t - 2.0 * t * t + t * t * t);
            d1 = 1.0 - 4.0 * t + 3.0 * t * t;
            d2 = (-4.0 + 6.0 * t) / L;
        } else {
            f = L * (-t * t + t * t * t);
            d1 = -2.0 * t + 3.0 * t * t;
            d2 = (-2.0 + 6.0 * t) / L;
        }
    }
}

} // namespace

void q1_2d(double xi, double eta, double hx, double hy, double N[4], double dNx[4], double dNy[4])
{
    for (int ay = 0; ay < 2; ++ay)
        for (int ax = 0; ax < 2; ++ax) {
            const int a = ax + 2 * ay;
            N[a] = lin(ax, xi) * lin(ay, eta);
            dNx[a] = dlin(ax) / hx * lin(ay, eta);
            dNy[a] = lin(ax, xi) * dlin(ay) / hy;
        }
}

void q1_3d(double xi, double eta, double zeta, double hx, double hy, double hz, double N[8], double dNx[8],
           double dNy[8], double dNz[8])
{
    for (int az = 0; az < 2; ++az)
        for (int ay = 0; ay < 2; ++ay)
            for (int ax = 0; ax < 2; ++ax) {
                const int a = ax + 2 * ay + 4 * az;
                const double lx = lin(ax, xi), ly = lin(ay, eta), lz = lin(az, zeta);
                N[a] = lx * ly * lz;
                dNx[a] = dlin(ax) / hx * ly * lz;
                dNy[a] = lx * dlin(ay) / hy * lz;
                dNz[a] = lx * ly * dlin(az) / hz;
            }
}

void bfs_2d(double xi, double eta, double hx, double hy, double N[16], double Nxx[16], double Nyy[16],
            double Nxy[16])
{
    for (int ay = 0; ay < 2; ++ay)
        for (int ax = 0; ax < 2; ++ax) {
            const int a = ax + 2 * ay;
            for (int d = 0; d < 4; ++d) {
                const bool sx = (d == 1 || d == 3);
                const bool sy = (d == 2 || d == 3);
                double fx, fx1, fx2, fy, fy1, fy2;
                hermite(ax, sx, xi, hx, fx, fx1, fx2);
                hermite(ay, sy, eta, hy, fy, fy1, fy2);
                const int i = 4 * a + d;
                N[i] = fx * fy;
                Nxx[i] = fx2 * fy;
                Nyy[i] = fx * fy2;
                Nxy[i] = fx1 * fy1;
            }
        }
}

void bfs_2d_grad(double xi, double eta, double hx, double hy, double Nx[16], double Ny[16])
{
    for (int ay = 0; ay < 2; ++ay)
        for (int ax = 0; ax < 2; ++ax) {
            const int a = ax + 2 * ay;
            for (int d = 0; d < 4; ++d) {
                const bool sx = (d == 1 || d == 3);
                const bool sy = (d == 2 || d == 3);
                double fx, fx1, fx2, fy, fy1, fy2;
                hermite(ax, sx, xi, hx, fx, fx1, fx2);
                hermite(ay, sy, eta, hy, fy, fy1, fy2);
                Nx[4 * a + d] = fx1 * fy;
                Ny[4 * a + d] = fx * fy1;
            }
        }
}

Eigen::Matrix<double, 6, 24> q1_3d_strain(double xi, double eta, double zeta, double hx, double hy, double hz,
                                          const Vec3& s)
{
    double N[8], dx[8], dy[8], dz[8];
    q1_3d(xi, eta, zeta, hx, hy, hz, N, dx, dy, dz);
    Eigen::Matrix<double, 6, 24> B = Eigen::Matrix<double, 6, 24>::Zero();
    for (int a = 0; a < 8; ++a) {
        const double d1 = s[0] * dx[a], d2 = s[1] * dy[a], d3 = s[2] * dz[a];
        B(0, 3 * a + 0) = d1;
        B(1, 3 * a + 1) = d2;
        B(2, 3 * a + 2) = d3;
        B(3, 3 * a + 1) = d3;
        B(3, 3 * a + 2) = d2;
        B(4, 3 * a + 0) = d3;
        B(4, 3 * a + 2) = d1;
        B(5, 3 * a + 0) = d2;
        B(5, 3 * a + 1) = d1;
    }
    return B;
}

Mat q1_3d_stiffness(const Mat6& C, double hx, double hy, double hz, const Vec3& s)
{
    const auto g = gauss01(2);
    const double vol = hx * hy * hz;
    Mat K = Mat::Zero(24, 24);
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) {
                const auto B = q1_3d_strain(g.x[i], g.x[j], g.x[k], hx, hy, hz, s);
                K += (g.w[i] * g.w[j] * g.w[k] * vol) * (B.transpose() * C * B);
            }
    return 0.5 * (K + K.transpose());
}

Mat q1_3d_stiffness_incompatible(const Mat6& C, double hx, double hy, double hz, const Vec3& s)
{
    // Nine bubble modes u_c = p(t_d), p(t) = 4 t (1 - t), condensed out.
    // Their strains integrate to zero over the box, so the patch test holds.
    const auto g = gauss01(2);
    const double vol = hx * hy * hz;
    const double len[3] = {hx, hy, hz};
    const int shear_row[3][3] = {{0, 5, 4}, {5, 1, 3}, {4, 3, 2}};
    Eigen::Matrix<double, 33, 33> K = Eigen::Matrix<double, 33, 33>::Zero();
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) {
                Eigen::Matrix<double, 6, 33> B = Eigen::Matrix<double, 6, 33>::Zero();
                B.leftCols<24>() = q1_3d_strain(g.x[i], g.x[j], g.x[k], hx, hy, hz, s);
                const double t[3] = {g.x[i], g.x[j], g.x[k]};
                for (int c = 0; c < 3; ++c)
                    for (int d = 0; d < 3; ++d)
                        B(shear_row[c][d], 24 + 3 * c + d) += s[d] * 4.0 * (1.0 - 2.0 * t[d]) / len[d];
                K += (g.w[i] * g.w[j] * g.w[k] * vol) * (B.transpose() * C * B);
            }
    const Mat Kuu = K.topLeftCorner<24, 24>();
    const Mat Kua = K.topRightCorner<24, 9>();
    const Mat Kaa = K.bottomRightCorner<9, 9>();
    Mat Kc = Kuu - Kua * Kaa.ldlt().solve(Kua.transpose());
    return 0.5 * (Kc + Kc.transpose());
}

Mat q1_3d_mass(double rho, double hx, double hy, double hz, int ncomp)
{
    const auto g = gauss01(2);
    const double vol = hx * hy * hz;
    Mat M = Mat::Zero(8 * ncomp, 8 * ncomp);
    double N[8], dx[8], dy[8], dz[8];
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) {
                q1_3d(g.x[i], g.x[j], g.x[k], hx, hy, hz, N, dx, dy, dz);
                const double w = g.w[i] * g.w[j] * g.w[k] * vol * rho;
                for (int a = 0; a < 8; ++a)
                    for (int b = 0; b < 8; ++b)
                        for (int c = 0; c < ncomp; ++c) M(ncomp * a + c, ncomp * b + c) += w * N[a] * N[b];
            }
    return M;
}

Eigen::Matrix<double, 3, 8> q1_2d_membrane_strain(double xi, double eta, double hx, double hy)
{
    double N[4], dx[4], dy[4];
    q1_2d(xi, eta, hx, hy, N, dx, dy);
    Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
    for (int a = 0; a < 4; ++a) {
        B(0, 2 * a) = dx[a];
        B(1, 2 * a + 1) = dy[a];
        B(2, 2 * a) = dy[a];
        B(2, 2 * a + 1) = dx[a];
    }
    return B;
}

Mat q1_2d_membrane_stiffness(const Mat3& D, double hx, double hy)
{
    const auto g = gauss01(2);
    Mat K = Mat::Zero(8, 8);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            const auto B = q1_2d_membrane_strain(g.x[i], g.x[j], hx, hy);
            K += (g.w[i] * g.w[j] * hx * hy) * (B.transpose() * D * B);
        }
    return 0.5 * (K + K.transpose());
}

Eigen::Matrix<double, 6, 12> q1_2d_iota_strain(double xi, double eta, double hx, double hy)
{
    double N[4], dx[4], dy[4];
    q1_2d(xi, eta, hx, hy, N, dx, dy);
    Eigen::Matrix<double, 6, 12> B = Eigen::Matrix<double, 6, 12>::Zero();
    for (int a = 0; a < 4; ++a) {
        B(0, 3 * a + 0) = dx[a];
        B(1, 3 * a + 1) = dy[a];
        B(3, 3 * a + 2) = dy[a];
        B(4, 3 * a + 2) = dx[a];
        B(5, 3 * a + 0) = dy[a];
        B(5, 3 * a + 1) = dx[a];
    }
    return B;
}

Eigen::Matrix<double, 6, 12> q1_2d_strip_column(double xi, double eta, double hx, double hy)
{
    double N[4], dx[4], dy[4];
    q1_2d(xi, eta, hx, hy, N, dx, dy);
    Eigen::Matrix<double, 6, 12> B = Eigen::Matrix<double, 6, 12>::Zero();
    for (int a = 0; a < 4; ++a) {
        B(2, 3 * a + 2) = N[a];
        B(3, 3 * a + 1) = N[a];
        B(4, 3 * a + 0) = N[a];
    }
    return B;
}

Mat q1_2d_iota_stiffness(const Mat6& C, double hx, double hy)
{
    const auto g = gauss01(2);
    Mat K = Mat::Zero(12, 12);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            const auto B = q1_2d_iota_strain(g.x[i], g.x[j], hx, hy);
            K += (g.w[i] * g.w[j] * hx * hy) * (B.transpose() * C * B);
        }
    return 0.5 * (K + K.transpose());
}

Mat q1_2d_mass(double rho, double hx, double hy, int ncomp)
{
    const auto g = gauss01(2);
    Mat M = Mat::Zero(4 * ncomp, 4 * ncomp);
    double N[4], dx[4], dy[4];
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            q1_2d(g.x[i], g.x[j], hx, hy, N, dx, dy);
            const double w = g.w[i] * g.w[j] * hx * hy * rho;
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    for (int c = 0; c < ncomp; ++c) M(ncomp * a + c, ncomp * b + c) += w * N[a] * N[b];
        }
    return M;
}

Eigen::Matrix<double, 3, 16> bfs_curvature(double xi, double eta, double hx, double hy)
{
    double N[16], xx[16], yy[16], xy[16];
    bfs_2d(xi, eta, hx, hy, N, xx, yy, xy);
    Eigen::Matrix<double, 3, 16> B;
    for (int i = 0; i < 16; ++i) {
        B(0, i) = xx[i];
        B(1, i) = yy[i];
        B(2, i) = 2.0 * xy[i];
    }
    return B;
}

Mat bfs_stiffness(const Mat3& D, double hx, double hy)
{
    const auto g = gauss01(4);
    Mat K = Mat::Zero(16, 16);
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) {
            const auto B = bfs_curvature(g.x[i], g.x[j], hx, hy);
            K += (g.w[i] * g.w[j] * hx * hy) * (B.transpose() * D * B);
        }
    return 0.5 * (K + K.transpose());
}

Mat bfs_mass(double rho, double hx, double hy)
{
    const auto g = gauss01(4);
    Mat M = Mat::Zero(16, 16);
    double N[16], xx[16], yy[16], xy[16];
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) {
            bfs_2d(g.x[i], g.x[j], hx, hy, N, xx, yy, xy);
            Eigen::Map<Eigen::Matrix<double, 16, 1>> n(N);
            M += (g.w[i] * g.w[j] * hx * hy * rho) * (n * n.transpose());
        }
    return 0.5 * (M + M.transpose());
}

Mat q1_bfs_cross(const Mat3& Dc, double hx, double hy)
{
    const auto g = gauss01(4);
    Mat K = Mat::Zero(8, 16);
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) {
            const auto Bm = q1_2d_membrane_strain(g.x[i], g.x[j], hx, hy);
            const auto Bb = bfs_curvature(g.x[i], g.x[j], hx, hy);
            K += (g.w[i] * g.w[j] * hx * hy) * (Bm.transpose() * Dc * Bb);
        }
    return K;
}

} // namespace hcp::fe
