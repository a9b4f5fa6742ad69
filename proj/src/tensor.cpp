#include "hcplate/tensor.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <fstream>

namespace hcp {

namespace {

// Voigt index of the pair (i,j).
int vidx(int i, int j)
{
    if (i == j) return i;
    const int s = i + j;
    return s == 3 ? 3 : (s == 2 ? 4 : 5);
}

} // namespace

Vec6 voigt3(const Mat3& e)
{
    Vec6 v;
    v << e(0, 0), e(1, 1), e(2, 2), 2.0 * e(1, 2), 2.0 * e(0, 2), 2.0 * e(0, 1);
    return v;
}

Mat3 from_voigt3(const Vec6& v)
{
    Mat3 e;
    e << v[0], 0.5 * v[5], 0.5 * v[4], 0.5 * v[5], v[1], 0.5 * v[3], 0.5 * v[4], 0.5 * v[3], v[2];
    return e;
}

Vec3 voigt2(const Mat2& e) { return Vec3(e(0, 0), e(1, 1), 2.0 * e(0, 1)); }

Mat2 from_voigt2(const Vec3& v)
{
    Mat2 e;
    e << v[0], 0.5 * v[2], 0.5 * v[2], v[1];
    return e;
}

double voigt_component(const Mat6& C, int i, int j, int k, int l) { return C(vidx(i, j), vidx(k, l)); }

double contract_direct(const Mat6& C, const Mat3& xi)
{
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) s += voigt_component(C, i, j, k, l) * xi(i, j) * xi(k, l);
    return s;
}

Mat6 isotropic_tensor(double lambda, double mu)
{
    Mat6 C = Mat6::Zero();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) C(i, j) = lambda;
        C(i, i) += 2.0 * mu;
        C(i + 3, i + 3) = mu;
    }
    return C;
}

Mat3 iota(const Mat2& A)
{
    Mat3 M = Mat3::Zero();
    M.topLeftCorner<2, 2>() = A;
    return M;
}

Mat3 iota(const Mat32& A)
{
    Mat3 M = Mat3::Zero();
    M.leftCols<2>() = A;
    return M;
}

Mat3 iota1(const Vec3& a)
{
    Mat3 M = Mat3::Zero();
    M(0, 2) = M(2, 0) = a[0];
    M(1, 2) = M(2, 1) = a[1];
    M(2, 2) = a[2];
    return M;
}

Mat3 reduced_tensor(const Mat6& C)
{
    const std::array<int, 3> in{0, 1, 5};
    const std::array<int, 3> tr{2, 3, 4};
    Mat3 Cii, Ctt;
    Eigen::Matrix3d Cit;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            Cii(a, b) = C(in[a], in[b]);
            Ctt(a, b) = C(tr[a], tr[b]);
            Cit(a, b) = C(in[a], tr[b]);
        }
    Eigen::LLT<Mat3> llt(Ctt);
    if (llt.info() != Eigen::Success || Ctt.norm() == 0.0)
        throw ConfigError("transverse block of the elasticity tensor is singular");
    Mat3 R = Cii - Cit * llt.solve(Cit.transpose());
    return 0.5 * (R + R.transpose());
}

ReducedPair c0_red(const Mat6& C0)
{
    ReducedPair p;
    p.memb = reduced_tensor(C0);
    p.bend = p.memb / 12.0;
    return p;
}

Vec6 tensor_eigenvalues(const Mat6& C)
{
    Vec6 s;
    s << 1.0, 1.0, 1.0, std::sqrt(2.0), std::sqrt(2.0), std::sqrt(2.0);
    Mat6 W = s.asDiagonal() * C * s.asDiagonal();
    W = 0.5 * (W + W.transpose());
    Eigen::SelfAdjointEigenSolver<Mat6> es(W);
    return es.eigenvalues();
}

CoercivityReport check_coercivity(const Mat6& C, double nu)
{
    CoercivityReport r;
    const Vec6 ev = tensor_eigenvalues(C);
    r.min_eig = ev.minCoeff();
    r.max_eig = ev.maxCoeff();
    r.coercive = nu > 0.0 && r.min_eig >= nu;
    r.bounded = nu > 0.0 && r.max_eig <= 1.0 / nu;
    r.pass = r.coercive;
    r.margin = r.min_eig - nu;
    return r;
}

bool planar_symmetric(const Mat6& C, double tol)
{
    const double scale = std::max(1.0, C.cwiseAbs().maxCoeff());
    const std::array<int, 4> even{0, 1, 2, 5};
    for (int a : even)
        for (int b : {3, 4})
            if (std::abs(C(a, b)) > tol * scale) return false;
    return true;
}

Mat3 rotation90_voigt2()
{
    Mat3 P;
    P << 0, 1, 0, 1, 0, 0, 0, 0, -1;
    return P;
}

bool MaterialSpec::planar_symmetric() const
{
    return hcp::planar_symmetric(C0) && hcp::planar_symmetric(C1);
}

void MaterialSpec::validate() const
{
    if (!(nu > 0.0)) throw ConfigError("coercivity constant nu must be positive");
    for (int a = 0; a < 2; ++a) {
        const Mat6& C = a == 0 ? C0 : C1;
        const auto rep = check_coercivity(C, nu);
        const std::string name = a == 0 ? "C0" : "C1";
        if (!rep.coercive)
            throw ConfigError(name + " violates the lower coercivity bound: smallest eigenvalue " +
                              std::to_string(rep.min_eig) + " < nu");
        if (!rep.bounded)
            throw ConfigError(name + " violates the upper bound: largest eigenvalue " +
                              std::to_string(rep.max_eig) + " > 1/nu");
    }
    if (!(rho0 > 0.0 && rho1 > 0.0)) throw ConfigError("densities must be positive");
}

Mat6 parse_tensor_json(const nlohmann::json& j)
{
    if (j.is_object() && j.contains("isotropic")) {
        const auto& iso = j.at("isotropic");
        return isotropic_tensor(iso.at("lambda").get<double>(), iso.at("mu").get<double>());
    }
    if (j.is_array()) {
        if (j.size() != 21) throw ConfigError("Voigt tensor needs 21 upper-triangle entries");
        Mat6 C;
        int k = 0;
        for (int r = 0; r < 6; ++r)
            for (int c = r; c < 6; ++c) {
                C(r, c) = j[k++].get<double>();
                C(c, r) = C(r, c);
            }
        return C;
    }
    throw ConfigError("elasticity tensor must be a 21-entry array or {\"isotropic\": {...}}");
}

MaterialSpec parse_material_json(const nlohmann::json& j)
{
    try {
        MaterialSpec m;
        m.C0 = parse_tensor_json(j.at("C0"));
        m.C1 = parse_tensor_json(j.at("C1"));
        m.rho0 = j.at("rho0").get<double>();
        m.rho1 = j.at("rho1").get<double>();
        m.nu = j.at("nu").get<double>();
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("material: ") + e.what());
    }
}

MaterialSpec load_material_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open material file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("material file '" + path + "': " + e.what());
    }
    return parse_material_json(j);
}

nlohmann::json material_to_json(const MaterialSpec& m)
{
    auto tensor = [](const Mat6& C) {
        nlohmann::json a = nlohmann::json::array();
        for (int r = 0; r < 6; ++r)
            for (int c = r; c < 6; ++c) a.push_back(C(r, c));
        return a;
    };
    return {{"C0", tensor(m.C0)}, {"C1", tensor(m.C1)}, {"rho0", m.rho0}, {"rho1", m.rho1}, {"nu", m.nu}};
}

} // namespace hcp
