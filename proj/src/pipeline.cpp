#include "hcplate/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace hcp {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string> kCommands = {"tensor", "bloch", "zhikov", "spectrum", "evolve", "resolvent", "validate"};

std::string fnv1a_hex(const std::string& s)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------
namespace {

void check_keys(const json& o, const std::set<std::string>& allowed, const std::string& where)
{
    if (!o.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : o.items())
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get_or(const json& o, const char* key, T def, const std::string& where)
{
    if (!o.contains(key)) return def;
    try {
        return o.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

int get_positive_int(const json& o, const char* key, int def, const std::string& where)
{
    const int v = get_or<int>(o, key, def, where);
    if (v < 1) throw ConfigError(where + "." + key + " must be at least 1");
    return v;
}

double get_positive(const json& o, const char* key, double def, const std::string& where)
{
    const double v = get_or<double>(o, key, def, where);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(where + "." + key + " must be positive");
    return v;
}

const json& section(const json& j, const char* key)
{
    static const json empty = json::object();
    return j.contains(key) ? j.at(key) : empty;
}

EigMethod parse_eig_method(const std::string& s)
{
    if (s == "auto") return EigMethod::automatic;
    if (s == "dense") return EigMethod::dense;
    if (s == "shift_invert") return EigMethod::shift_invert;
    throw ConfigError("unknown eigensolver '" + s + "'");
}

} // namespace

RunConfig parse_run_config(const json& j, const std::string& base_dir)
{
    check_keys(j,
               {"$schema", "description", "material", "cell", "regime", "macro", "solver", "bloch", "zhikov",
                "spectrum", "load", "evolve", "resolvent", "validate"},
               "config");
    RunConfig c;
    c.raw = j;
    c.base_dir = base_dir;

    if (!j.contains("material")) throw ConfigError("config.material is required");
    const json& m = j.at("material");
    if (m.is_string()) {
        fs::path p(m.get<std::string>());
        if (p.is_relative()) p = fs::path(base_dir) / p;
        c.material_source = p.string();
        c.mat = load_material_file(c.material_source);
    } else if (m.is_object()) {
        c.material_source = "inline";
        c.mat = parse_material_json(m);
    } else {
        throw ConfigError("config.material must be a file path or an object");
    }

    const json& cell = section(j, "cell");
    check_keys(cell, {"shape", "center", "size", "n", "nz"}, "cell");
    const std::string shape = get_or<std::string>(cell, "shape", "disk", "cell");
    if (shape == "disk") c.shape.kind = ShapeKind::disk;
    else if (shape == "square") c.shape.kind = ShapeKind::square;
    else throw ConfigError("unknown inclusion shape '" + shape + "'");
    const auto center = get_or<std::vector<double>>(cell, "center", {0.5, 0.5}, "cell");
    if (center.size() != 2) throw ConfigError("cell.center needs two entries");
    c.shape.cx = center[0];
    c.shape.cy = center[1];
    c.shape.size = get_positive(cell, "size", 0.2625, "cell");
    c.cell_n = get_positive_int(cell, "n", 16, "cell");
    c.cell_nz = get_positive_int(cell, "nz", 4, "cell");

    const json& r = section(j, "regime");
    check_keys(r, {"delta", "delta_value", "mu", "tau", "kappa", "kappa_value"}, "regime");
    c.regime.delta = parse_delta_kind(get_or<std::string>(r, "delta", "finite", "regime"));
    c.regime.delta_value = get_or<double>(r, "delta_value", 1.0, "regime");
    c.regime.mu = parse_mu_scaling(get_or<std::string>(r, "mu", "eps", "regime"));
    c.regime.tau = get_or<int>(r, "tau", 0, "regime");
    c.regime.kappa = parse_kappa(get_or<std::string>(r, "kappa", "none", "regime"));
    c.regime.kappa_value = get_or<double>(r, "kappa_value", 1.0, "regime");
    regime_row(c.regime);

    const json& mac = section(j, "macro");
    check_keys(mac, {"L1", "L2", "n1", "n2", "gamma_D"}, "macro");
    c.L1 = get_positive(mac, "L1", 1.0, "macro");
    c.L2 = get_positive(mac, "L2", 1.0, "macro");
    c.macro_n1 = get_positive_int(mac, "n1", 16, "macro");
    c.macro_n2 = get_positive_int(mac, "n2", 16, "macro");
    c.gamma_D.clear();
    for (const auto& e : get_or<std::vector<std::string>>(mac, "gamma_D", {"left"}, "macro"))
        c.gamma_D.push_back(parse_edge(e));
    if (c.gamma_D.empty()) throw ConfigError("macro.gamma_D must list at least one edge");

    const json& sol = section(j, "solver");
    check_keys(sol, {"modes", "kappa_modes", "eig_method", "eig_tol", "dense_threshold", "seed"}, "solver");
    c.modes = get_positive_int(sol, "modes", 30, "solver");
    c.kappa_modes = get_positive_int(sol, "kappa_modes", 6, "solver");
    c.ws.method = parse_eig_method(get_or<std::string>(sol, "eig_method", "auto", "solver"));
    c.ws.tol = get_positive(sol, "eig_tol", 1e-12, "solver");
    c.ws.dense_threshold = get_positive_int(sol, "dense_threshold", 4000, "solver");
    c.ws.seed = get_or<std::uint64_t>(sol, "seed", 12345, "solver");

    const json& b = section(j, "bloch");
    check_keys(b, {"operator"}, "bloch");
    c.bloch_operator = get_or<std::string>(b, "operator", "auto", "bloch");
    if (c.bloch_operator != "auto") parse_bloch_operator(c.bloch_operator);

    const json& z = section(j, "zhikov");
    check_keys(z, {"lambda_min", "lambda_max", "samples"}, "zhikov");
    c.zhikov_lambda_min = get_or<double>(z, "lambda_min", 0.0, "zhikov");
    c.zhikov_lambda_max = get_or<double>(z, "lambda_max", 0.0, "zhikov");
    c.zhikov_samples = get_positive_int(z, "samples", 400, "zhikov");
    if (c.zhikov_lambda_min < 0.0) throw ConfigError("zhikov.lambda_min must be nonnegative");

    const json& sp = section(j, "spectrum");
    check_keys(sp, {"macro_modes", "lambda_max", "strip_points", "strip_eta_max"}, "spectrum");
    c.spectrum_macro_modes = get_positive_int(sp, "macro_modes", 30, "spectrum");
    c.spectrum_lambda_max = get_or<double>(sp, "lambda_max", 0.0, "spectrum");
    c.strip_points = get_positive_int(sp, "strip_points", 81, "spectrum");
    c.strip_eta_max = get_positive(sp, "strip_eta_max", 20.0, "spectrum");

    const json& l = section(j, "load");
    check_keys(l, {"amplitude", "macro", "transverse", "cell", "time", "omega"}, "load");
    const auto amp = get_or<std::vector<double>>(l, "amplitude", {0.0, 0.0, 1.0}, "load");
    if (amp.size() != 3) throw ConfigError("load.amplitude needs three entries");
    c.load.amplitude = Vec3(amp[0], amp[1], amp[2]);
    c.load.macro = parse_macro_profile(get_or<std::string>(l, "macro", "uniform", "load"));
    c.load.transverse = parse_transverse_profile(get_or<std::string>(l, "transverse", "constant", "load"));
    c.load.cell = parse_cell_profile(get_or<std::string>(l, "cell", "uniform", "load"));
    c.load.time = parse_time_profile(get_or<std::string>(l, "time", "constant", "load"));
    c.load.omega = get_or<double>(l, "omega", 1.0, "load");

    const json& ev = section(j, "evolve");
    check_keys(ev, {"T", "dt", "record_every", "initial", "memory_kernel"}, "evolve");
    c.evolve_T = get_positive(ev, "T", 1.0, "evolve");
    c.evolve_dt = get_positive(ev, "dt", 1e-3, "evolve");
    c.evolve_record_every = get_positive_int(ev, "record_every", 10, "evolve");
    c.evolve_initial = get_or<std::string>(ev, "initial", "rest", "evolve");
    if (c.evolve_initial != "rest" && c.evolve_initial != "mode")
        throw ConfigError("evolve.initial must be 'rest' or 'mode'");
    c.evolve_memory_kernel = get_or<bool>(ev, "memory_kernel", false, "evolve");

    const json& rs = section(j, "resolvent");
    check_keys(rs, {"lambda"}, "resolvent");
    c.resolvent_lambda = get_positive(rs, "lambda", 1.0, "resolvent");

    const json& va = section(j, "validate");
    check_keys(va, {"epsilons", "cell_n", "nz", "eigs", "parity", "max_dofs", "h"}, "validate");
    c.validate_epsilons = get_or<std::vector<double>>(va, "epsilons", {0.5, 0.25}, "validate");
    if (c.validate_epsilons.empty()) throw ConfigError("validate.epsilons must not be empty");
    for (double e : c.validate_epsilons)
        if (!(e > 0.0)) throw ConfigError("validate.epsilons must be positive");
    c.validate_cell_n = get_positive_int(va, "cell_n", 8, "validate");
    c.validate_nz = get_positive_int(va, "nz", 4, "validate");
    c.validate_eigs = get_positive_int(va, "eigs", 3, "validate");
    c.validate_parity = get_or<std::string>(va, "parity", "auto", "validate");
    if (c.validate_parity != "auto") parse_fine_parity(c.validate_parity);
    c.validate_max_dofs = get_or<long>(va, "max_dofs", 200000, "validate");
    c.validate_h = get_or<double>(va, "h", 0.0, "validate");

    const json canonical = {{"config", j}, {"material", material_to_json(c.mat)}};
    c.hash = fnv1a_hex(canonical.dump());
    return c;
}

RunConfig load_run_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
    return parse_run_config(j, fs::path(path).parent_path().string());
}

LimitSetup limit_setup(const RunConfig& c)
{
    LimitSetup s;
    s.regime = c.regime;
    s.mat = c.mat;
    s.shape = c.shape;
    s.cell_n = c.cell_n;
    s.cell_nz = c.cell_nz;
    s.L1 = c.L1;
    s.L2 = c.L2;
    s.macro_n1 = c.macro_n1;
    s.macro_n2 = c.macro_n2;
    s.gamma_D = c.gamma_D;
    s.modes = c.modes;
    s.kappa_modes = c.kappa_modes;
    s.ws = c.ws;
    return s;
}

EffectiveTensor regime_tensor(const RunConfig& c)
{
    c.row();
    switch (c.regime.delta) {
    case DeltaKind::finite:
        return effective_delta(c.mat, build_cell_mesh(c.shape, c.cell_n, 3, c.cell_nz), c.regime.delta_value);
    case DeltaKind::zero: return effective_delta0(c.mat, build_cell_mesh(c.shape, c.cell_n, 2, 0));
    case DeltaKind::infinite: return effective_deltainf(c.mat, build_cell_mesh(c.shape, c.cell_n, 2, 0));
    }
    throw ConfigError("unknown delta kind");
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------
namespace {

json to_json(const Mat& A)
{
    json a = json::array();
    for (int r = 0; r < A.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < A.cols(); ++c) row.push_back(A(r, c));
        a.push_back(row);
    }
    return a;
}

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

class Outputs {
public:
    Outputs(const RunConfig& cfg, const std::string& dir) : cfg_(cfg), dir_(dir)
    {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory '" + dir + "'");
    }

    void json_file(const std::string& name, json j)
    {
        j["config_hash"] = cfg_.hash;
        const fs::path p = fs::path(dir_) / name;
        std::ofstream out(p);
        if (!out) throw ConfigError("cannot write '" + p.string() + "'");
        out << std::setw(2) << j << "\n";
        files.push_back(p.string());
    }

    // CSV with a leading comment line carrying the configuration hash.
    void csv_file(const std::string& name, const std::vector<std::string>& header,
                  const std::vector<std::vector<double>>& rows)
    {
        const fs::path p = fs::path(dir_) / name;
        std::ofstream out(p);
        if (!out) throw ConfigError("cannot write '" + p.string() + "'");
        out << "# config_hash=" << cfg_.hash << "\n";
        for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
        out << "\n" << std::setprecision(12);
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
            out << "\n";
        }
        files.push_back(p.string());
    }

    std::vector<std::string> files;

private:
    const RunConfig& cfg_;
    std::string dir_;
};

json regime_json(const RunConfig& c)
{
    return {{"row", c.row()},
            {"label", regime_label(c.regime)},
            {"delta", to_string(c.regime.delta)},
            {"delta_value", c.regime.delta_value},
            {"mu", to_string(c.regime.mu)},
            {"tau", c.regime.tau},
            {"kappa", to_string(c.regime.kappa)}};
}

double min_eig(const Mat& A) { return Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (A + A.transpose())).eigenvalues().minCoeff(); }

BlochOperator default_operator(int row)
{
    if (row <= 3) return BlochOperator::full_delta;
    if (row <= 6) return BlochOperator::memb_delta0;
    if (row == 7) return BlochOperator::bend_delta0;
    return BlochOperator::full_deltainf;
}

struct CellSpectrum {
    BlochSpectrum spectrum;
    double soft_fraction = 0.0;
};

CellSpectrum cell_spectrum(const RunConfig& c)
{
    const BlochOperator op =
        c.bloch_operator == "auto" ? default_operator(c.row()) : parse_bloch_operator(c.bloch_operator);
    const CellMesh mesh = needs_prism(op) ? build_cell_mesh(c.shape, c.cell_n, 3, c.cell_nz)
                                          : build_cell_mesh(c.shape, c.cell_n, 2, 0);
    const BlochProblem p = assemble_bloch(c.mat, mesh, op, c.regime.delta_value);
    EigWorkspace ws = c.ws;
    ws.N = std::min<int>(c.modes, static_cast<int>(p.pair.K.rows()));
    return {bloch_spectrum(p, ws), mesh.soft_fraction()};
}

std::vector<std::vector<double>> beta_samples(const ZhikovFunction& zf, double lo, double hi, int n)
{
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < n; ++i) {
        const double lambda = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
        bool near_pole = false;
        for (double p : zf.poles()) near_pole |= std::abs(lambda - p) <= 1e-9 * std::max(1.0, p);
        if (near_pole) continue;
        const Mat B = zf.eval(lambda);
        const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (B + B.transpose())).eigenvalues();
        std::vector<double> row{lambda};
        for (int k = 0; k < ev.size(); ++k) row.push_back(ev[k]);
        rows.push_back(row);
    }
    return rows;
}

std::vector<std::string> beta_header(int dim)
{
    std::vector<std::string> h{"lambda"};
    for (int k = 0; k < dim; ++k) h.push_back("beta_eig_" + std::to_string(k + 1));
    return h;
}

json spectrum_json(const LimitSpectrum& s)
{
    json pts = json::array();
    for (const auto& p : s.points)
        pts.push_back({{"lambda", p.lambda}, {"kind", p.kind}, {"macro_index", p.matched_mu},
                       {"pole_interval", p.pole_interval}});
    json gaps = json::array();
    for (const auto& g : s.gaps) gaps.push_back({g.first, g.second});
    return {{"regime", s.regime}, {"points", pts},          {"intervals_from", s.intervals_from},
            {"gaps", gaps},       {"lambda_max", s.lambda_max}, {"note", s.note}};
}

struct InitialState {
    Vec x;
    double eigenvalue = 0.0;
};

// "mode" starts from the lowest limit mode with a nonzero eigenvalue; the
// zero modes carry no energy and would leave nothing to track.
InitialState initial_state(const LimitSystem& sys, const std::string& kind)
{
    if (kind == "rest") return {Vec::Zero(sys.ndof()), 0.0};
    const int ndof = static_cast<int>(sys.ndof());
    for (int N = std::min(8, ndof);; N = std::min(4 * N, ndof)) {
        const EigResult r = limit_system_eigs(sys, N);
        const double scale = std::max(1.0, std::abs(r.values[r.values.size() - 1]));
        for (int k = 0; k < r.values.size(); ++k)
            if (r.values[k] > 1e-8 * scale) return {r.vectors.col(k), r.values[k]};
        if (r.values.size() >= ndof || N == ndof) break;
    }
    throw SolverError("limit system has no mode with a positive eigenvalue");
}

FineParity validate_parity(const RunConfig& c)
{
    if (c.validate_parity != "auto") return parse_fine_parity(c.validate_parity);
    return c.regime.tau == 0 ? FineParity::membrane : FineParity::none;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------
json cmd_tensor(const RunConfig& c, Outputs& out)
{
    const EffectiveTensor t = regime_tensor(c);
    const Mat6 full = t.full();
    const double asym = std::max({(t.memb - t.memb.transpose()).norm(), (t.bend - t.bend.transpose()).norm()});
    json j = {{"regime", regime_json(c)},
              {"memb", to_json(Mat(t.memb))},
              {"coupling", to_json(Mat(t.coupling))},
              {"bend", to_json(Mat(t.bend))},
              {"full", to_json(Mat(full))},
              {"zero_corrector", to_json(Mat(t.zero_corrector))},
              {"cell_n", t.n},
              {"cell_nz", t.nz},
              {"ndof", t.ndof},
              {"max_residual", t.max_residual},
              {"checks",
               {{"block_asymmetry", asym},
                {"memb_min_eigenvalue", min_eig(t.memb)},
                {"bend_min_eigenvalue", min_eig(t.bend)},
                {"full_min_eigenvalue", min_eig(full)},
                {"positive_definite", min_eig(full) > 0.0}}}};
    out.json_file("tensor.json", j);
    return {{"full_min_eigenvalue", min_eig(full)}, {"memb_11", t.memb(0, 0)}, {"bend_11", t.bend(0, 0)}};
}

json cmd_bloch(const RunConfig& c, Outputs& out)
{
    const CellSpectrum cs = cell_spectrum(c);
    const BlochSpectrum& s = cs.spectrum;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> header{"index", "eta", "coupled", "cluster"};
    for (int k = 0; k < s.means.cols(); ++k) header.push_back("mean_" + std::to_string(k + 1));
    for (int n = 0; n < s.size(); ++n) {
        std::vector<double> r{double(n), s.values[n], double(s.coupled[n]), double(s.cluster[n])};
        for (int k = 0; k < s.means.cols(); ++k) r.push_back(s.means(n, k));
        rows.push_back(r);
    }
    out.csv_file("bloch.csv", header, rows);
    json j = {{"regime", regime_json(c)},
              {"operator", to_string(s.op)},
              {"eigenvalues", to_json(s.values)},
              {"coupled", std::vector<int>(s.coupled.begin(), s.coupled.end())},
              {"means", to_json(s.means)},
              {"poles", s.pole_values()},
              {"uncoupled", s.uncoupled_values()},
              {"rho0_mean", s.rho0_mean},
              {"method", s.method},
              {"max_residual", s.max_residual}};
    out.json_file("bloch.json", j);
    return {{"operator", to_string(s.op)}, {"modes", s.size()}, {"eta_1", s.values[0]}};
}

json cmd_zhikov(const RunConfig& c, Outputs& out)
{
    const CellSpectrum cs = cell_spectrum(c);
    const int row = c.row();
    const bool third_only = (row == 3 || row == 9) && cs.spectrum.means.cols() == 3;
    const double rho0m = c.mat.rho0 * cs.soft_fraction, rho1m = c.mat.rho1 * (1.0 - cs.soft_fraction);
    const ZhikovFunction zf(cs.spectrum, rho0m + rho1m, rho1m, 0, third_only ? std::vector<int>{2} : std::vector<int>{});
    const double hi = c.zhikov_lambda_max > 0.0 ? c.zhikov_lambda_max : zf.top_eigenvalue();
    if (!(hi > c.zhikov_lambda_min)) throw ConfigError("zhikov.lambda_max must exceed lambda_min");
    out.csv_file("beta.csv", beta_header(zf.dim()), beta_samples(zf, c.zhikov_lambda_min, hi, c.zhikov_samples));
    json residues = json::array();
    for (const auto& R : zf.residues()) residues.push_back(to_json(R));
    json j = {{"regime", regime_json(c)},
              {"operator", to_string(cs.spectrum.op)},
              {"dim", zf.dim()},
              {"rho_mean", zf.rho_mean()},
              {"rho1_mean", zf.rho1_mean()},
              {"poles", zf.poles()},
              {"residues", residues},
              {"uncoupled", zf.uncoupled()},
              {"modes_used", zf.modes_used()},
              {"lambda_range", {c.zhikov_lambda_min, hi}}};
    out.json_file("zhikov.json", j);
    return {{"poles", zf.poles().size()}, {"modes_used", zf.modes_used()}};
}

json cmd_spectrum(const RunConfig& c, Outputs& out)
{
    const LimitContext ctx = make_limit_context(limit_setup(c));
    RegimeSpectrumOptions opt;
    opt.macro_modes = c.spectrum_macro_modes;
    opt.zhikov.lambda_max = c.spectrum_lambda_max;
    opt.strip_points = c.strip_points;
    opt.strip_eta_max = c.strip_eta_max;
    const RegimeSpectrum rs = regime_spectrum(ctx, opt);
    json j = spectrum_json(rs.spectrum);
    j["regime_config"] = regime_json(c);
    j["macro_eigenvalues"] = rs.macro_eigenvalues;
    j["micro_operator"] = rs.micro_operator;
    j["modes_used"] = rs.modes_used;
    if (rs.strip) j["strip_m0"] = rs.strip->m0;
    out.json_file("spectrum.json", j);
    if (rs.zhikov) {
        const double hi = rs.spectrum.lambda_max > 0.0 ? rs.spectrum.lambda_max : rs.zhikov->top_eigenvalue();
        out.csv_file("dispersion.csv", beta_header(rs.zhikov->dim()), beta_samples(*rs.zhikov, 0.0, hi, 400));
    }
    if (rs.strip) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < rs.strip->eta.size(); ++i) rows.push_back({rs.strip->eta[i], rs.strip->alpha1[i]});
        out.csv_file("strip.csv", {"eta", "alpha1"}, rows);
    }
    return {{"points", rs.spectrum.points.size()}, {"gaps", rs.spectrum.gaps.size()}};
}

json cmd_evolve(const RunConfig& c, Outputs& out)
{
    const LimitContext ctx = make_limit_context(limit_setup(c));
    const LimitSystem sys = assemble_limit_system(ctx, c.load);
    EvolveOptions opt;
    opt.T = c.evolve_T;
    opt.dt = c.evolve_dt;
    opt.record_every = c.evolve_record_every;
    const InitialState init = initial_state(sys, c.evolve_initial);
    const Trajectory tr = evolve(sys, init.x, Vec::Zero(sys.ndof()), opt);
    std::vector<std::string> header{"t", "kinetic", "elastic", "total"};
    std::vector<const LimitBlock*> macro;
    for (const auto& b : sys.blocks)
        if (!b.micro) {
            macro.push_back(&b);
            header.push_back("norm_" + b.name);
        }
    header.push_back("norm_micro");
    const auto E = tr.total();
    std::vector<std::vector<double>> rows;
    double drift = 0.0;
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        std::vector<double> r{tr.t[k], tr.kinetic[k], tr.elastic[k], E[k]};
        double micro = 0.0;
        for (const auto* b : macro) r.push_back(tr.x[k].segment(b->offset, b->size).norm());
        for (const auto& b : sys.blocks)
            if (b.micro) micro += tr.x[k].segment(b.offset, b.size).squaredNorm();
        r.push_back(std::sqrt(micro));
        rows.push_back(r);
        if (E.front() > 0.0) drift = std::max(drift, std::abs(E[k] - E.front()) / E.front());
    }
    out.csv_file("trajectory.csv", header, rows);
    json j = {{"regime", regime_json(c)},
              {"variant", to_string(evolve_variant_for_row(ctx.row))},
              {"description", sys.description},
              {"ndof", sys.ndof()},
              {"dt", tr.dt},
              {"steps", tr.steps},
              {"initial", c.evolve_initial},
              {"initial_eigenvalue", init.eigenvalue},
              {"relative_energy_drift", drift},
              {"final_state_norm", tr.x.back().norm()}};
    if (c.evolve_memory_kernel) {
        const Trajectory mk = evolve_memory_kernel(sys, opt);
        double err = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < tr.x.size() && k < mk.x.size(); ++k) {
            err = std::max(err, (tr.x[k] - mk.x[k]).lpNorm<Eigen::Infinity>());
            scale = std::max(scale, tr.x[k].lpNorm<Eigen::Infinity>());
        }
        j["memory_kernel_sup_difference"] = err;
        j["memory_kernel_relative_difference"] = scale > 0.0 ? err / scale : 0.0;
    }
    out.json_file("evolve.json", j);
    return {{"steps", tr.steps}, {"relative_energy_drift", drift}};
}

json cmd_resolvent(const RunConfig& c, Outputs& out)
{
    const LimitContext ctx = make_limit_context(limit_setup(c));
    const LimitSystem sys = assemble_limit_system(ctx, c.load);
    const Vec x = solve_limit_resolvent(sys, c.resolvent_lambda);
    const MacroSpaces& sp = ctx.spaces;
    std::vector<std::string> header{"x", "y"};
    std::vector<const LimitBlock*> macro;
    for (const auto& b : sys.blocks) {
        if (b.micro) continue;
        macro.push_back(&b);
        if (b.space == FieldSpace::memb) {
            header.push_back(b.name + "_1");
            header.push_back(b.name + "_2");
        } else {
            header.push_back(b.name);
        }
    }
    std::vector<std::vector<double>> rows;
    const MacroMesh& m = sp.mesh;
    for (int jy = 0; jy <= m.n2; ++jy)
        for (int ix = 0; ix <= m.n1; ++ix) {
            const int v = m.node(ix, jy);
            std::vector<double> r{m.x(ix), m.y(jy)};
            for (const auto* b : macro) {
                const Vec seg = x.segment(b->offset, b->size);
                auto val = [&](const DofMap& dm, int comp) {
                    const int d = dm.dof(v, comp);
                    return d >= 0 ? seg[d] : 0.0;
                };
                switch (b->space) {
                case FieldSpace::memb:
                    r.push_back(val(sp.memb, 0));
                    r.push_back(val(sp.memb, 1));
                    break;
                case FieldSpace::bend: r.push_back(val(sp.bend, 0)); break;
                case FieldSpace::bfs_all: r.push_back(val(sp.bfs_all, 0)); break;
                case FieldSpace::nodal: r.push_back(val(sp.nodal, 0)); break;
                }
            }
            rows.push_back(r);
        }
    out.csv_file("resolvent_nodes.csv", header, rows);
    json norms = json::object();
    double micro = 0.0;
    for (const auto& b : sys.blocks) {
        if (b.micro) micro += x.segment(b.offset, b.size).squaredNorm();
        else norms[b.name] = x.segment(b.offset, b.size).norm();
    }
    norms["micro"] = std::sqrt(micro);
    const LoadMoments lm = load_moments(c.load, ctx.soft_fraction);
    json j = {{"regime", regime_json(c)},
              {"lambda", c.resolvent_lambda},
              {"description", sys.description},
              {"ndof", sys.ndof()},
              {"block_norms", norms},
              {"load_moments",
               {{"mean", to_json(Vec(lm.mean))},
                {"moment", to_json(Vec(lm.moment))},
                {"soft_mean", to_json(Vec(lm.soft_mean))}}}};
    out.json_file("resolvent.json", j);
    return {{"solution_norm", x.norm()}};
}

json cmd_validate(const RunConfig& c, Outputs& out)
{
    const LimitContext ctx = make_limit_context(limit_setup(c));
    RegimeSpectrumOptions opt;
    opt.macro_modes = c.spectrum_macro_modes;
    opt.zhikov.lambda_max = c.spectrum_lambda_max;
    opt.strip_points = c.strip_points;
    opt.strip_eta_max = c.strip_eta_max;
    const RegimeSpectrum rs = regime_spectrum(ctx, opt);
    const FineParity parity = validate_parity(c);
    json runs = json::array();
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<double>> dists;
    for (double eps : c.validate_epsilons) {
        FineSetup fs;
        fs.mat = c.mat;
        fs.shape = c.shape;
        fs.regime = c.regime;
        fs.epsilon = eps;
        fs.h = c.validate_h;
        fs.L1 = c.L1;
        fs.L2 = c.L2;
        fs.gamma_D = c.gamma_D;
        fs.cell_n = c.validate_cell_n;
        fs.nz = c.validate_nz;
        fs.max_dofs = c.validate_max_dofs;
        fs.parity = parity;
        const FineProblem fp = build_fine_problem(fs);
        EigWorkspace ws = c.ws;
        const EigResult r = fine_eigs(fp, c.validate_eigs, ws);
        const std::vector<double> vals(r.values.data(), r.values.data() + r.values.size());
        const std::vector<double> d = distance_to_spectrum(vals, rs.spectrum);
        std::vector<double> nearest;
        std::vector<int> pollution;
        for (std::size_t k = 0; k < vals.size(); ++k) {
            double best = std::numeric_limits<double>::quiet_NaN(), bd = std::numeric_limits<double>::infinity();
            for (const auto& p : rs.spectrum.points)
                if (std::abs(p.lambda - vals[k]) < bd) {
                    bd = std::abs(p.lambda - vals[k]);
                    best = p.lambda;
                }
            for (double a : rs.spectrum.intervals_from)
                if (vals[k] >= a) best = vals[k];
            nearest.push_back(best);
            // Inside the strip interval but away from every limit point.
            const bool in_strip =
                std::any_of(rs.spectrum.intervals_from.begin(), rs.spectrum.intervals_from.end(),
                            [&](double a) { return vals[k] >= a; });
            pollution.push_back(in_strip && bd > 1e-3 * std::max(1.0, vals[k]) ? 1 : 0);
            rows.push_back({eps, double(k + 1), vals[k], best, d[k]});
        }
        dists.push_back(d);
        runs.push_back({{"epsilon", eps},
                        {"h", fp.h},
                        {"mu_h", fp.mu_h},
                        {"ndof", fp.pair.K.rows()},
                        {"parity", to_string(parity)},
                        {"eigenvalues", vals},
                        {"nearest_limit_point", nearest},
                        {"distance", d},
                        {"candidate_pollution", pollution}});
    }
    out.csv_file("validate.csv", {"epsilon", "index", "fine_eigenvalue", "nearest_limit_value", "distance"}, rows);
    std::vector<int> decreasing;
    for (int k = 0; k < c.validate_eigs; ++k) {
        bool dec = true;
        for (std::size_t e = 1; e < dists.size(); ++e) dec = dec && dists[e][k] < dists[e - 1][k];
        decreasing.push_back(dec ? 1 : 0);
    }
    json j = {{"regime", regime_json(c)},
              {"limit_spectrum", spectrum_json(rs.spectrum)},
              {"runs", runs},
              {"distance_decreasing", decreasing}};
    out.json_file("validate.json", j);
    return {{"distance_decreasing", decreasing}};
}

} // namespace

CommandResult run_command(const std::string& command, const RunConfig& cfg, const std::string& out_dir)
{
    if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
        throw ConfigError("unknown command '" + command + "'");
    Outputs out(cfg, out_dir);
    json summary;
    if (command == "tensor") summary = cmd_tensor(cfg, out);
    else if (command == "bloch") summary = cmd_bloch(cfg, out);
    else if (command == "zhikov") summary = cmd_zhikov(cfg, out);
    else if (command == "spectrum") summary = cmd_spectrum(cfg, out);
    else if (command == "evolve") summary = cmd_evolve(cfg, out);
    else if (command == "resolvent") summary = cmd_resolvent(cfg, out);
    else summary = cmd_validate(cfg, out);
    summary["command"] = command;
    summary["config_hash"] = cfg.hash;
    summary["files"] = out.files;
    return {summary, out.files};
}

} // namespace hcp
