#include "hcplate/hcplate.h"

#include "hcplate/pipeline.hpp"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

struct hcp_config {
    hcp::RunConfig cfg;
};

struct hcp_material {
    hcp::MaterialSpec mat;
};

namespace {

thread_local std::string g_last_error;

template <class F>
hcp_status guarded(F&& f)
{
    try {
        f();
        g_last_error.clear();
        return HCP_OK;
    } catch (const hcp::ConfigError& e) {
        g_last_error = e.what();
        return HCP_ERR_CONFIG;
    } catch (const hcp::SolverError& e) {
        g_last_error = e.what();
        return HCP_ERR_SOLVER;
    } catch (const std::exception& e) {
        g_last_error = std::string("internal error: ") + e.what();
        return HCP_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "internal error";
        return HCP_ERR_INTERNAL;
    }
}

hcp_status bad_argument(const char* what)
{
    g_last_error = what;
    return HCP_ERR_ARGUMENT;
}

char* dup_string(const std::string& s)
{
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

} // namespace

extern "C" {

const char* hcp_version(void) { return "1.0.0"; }

const char* hcp_last_error(void) { return g_last_error.c_str(); }

int hcp_exit_code(hcp_status status)
{
    switch (status) {
    case HCP_OK: return 0;
    case HCP_ERR_SOLVER: return 3;
    default: return 2;
    }
}

hcp_status hcp_set_threads(int n)
{
    if (n < 0) return bad_argument("thread count must be nonnegative");
    return guarded([&] { hcp::set_thread_count(n); });
}

hcp_status hcp_config_load(const char* path, hcp_config** out)
{
    if (!path || !out) return bad_argument("null argument");
    *out = nullptr;
    return guarded([&] { *out = new hcp_config{hcp::load_run_config(path)}; });
}

hcp_status hcp_config_parse(const char* json_text, const char* base_dir, hcp_config** out)
{
    if (!json_text || !out) return bad_argument("null argument");
    *out = nullptr;
    return guarded([&] {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json_text);
        } catch (const nlohmann::json::exception& e) {
            throw hcp::ConfigError(std::string("config: ") + e.what());
        }
        *out = new hcp_config{hcp::parse_run_config(j, base_dir ? base_dir : ".")};
    });
}

void hcp_config_free(hcp_config* cfg) { delete cfg; }

const char* hcp_config_hash(const hcp_config* cfg) { return cfg ? cfg->cfg.hash.c_str() : ""; }

hcp_status hcp_config_regime_row(const hcp_config* cfg, int* row)
{
    if (!cfg || !row) return bad_argument("null argument");
    return guarded([&] { *row = cfg->cfg.row(); });
}

hcp_status hcp_config_effective_tensor(const hcp_config* cfg, double* full6x6)
{
    if (!cfg || !full6x6) return bad_argument("null argument");
    return guarded([&] {
        const hcp::Mat6 C = hcp::regime_tensor(cfg->cfg).full();
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c) full6x6[6 * r + c] = C(r, c);
    });
}

hcp_status hcp_run(const hcp_config* cfg, const char* command, const char* out_dir, char** summary)
{
    if (!cfg || !command || !out_dir) return bad_argument("null argument");
    if (summary) *summary = nullptr;
    return guarded([&] {
        const hcp::CommandResult r = hcp::run_command(command, cfg->cfg, out_dir);
        if (summary) *summary = dup_string(r.summary.dump());
    });
}

void hcp_string_free(char* s) { std::free(s); }

hcp_status hcp_material_isotropic(double lambda0, double mu0, double lambda1, double mu1, double rho0, double rho1,
                                  double nu, hcp_material** out)
{
    if (!out) return bad_argument("null argument");
    *out = nullptr;
    return guarded([&] {
        nlohmann::json j = {{"C0", {{"isotropic", {{"lambda", lambda0}, {"mu", mu0}}}}},
                            {"C1", {{"isotropic", {{"lambda", lambda1}, {"mu", mu1}}}}},
                            {"rho0", rho0},
                            {"rho1", rho1},
                            {"nu", nu}};
        *out = new hcp_material{hcp::parse_material_json(j)};
    });
}

hcp_status hcp_material_load(const char* path, hcp_material** out)
{
    if (!path || !out) return bad_argument("null argument");
    *out = nullptr;
    return guarded([&] { *out = new hcp_material{hcp::load_material_file(path)}; });
}

void hcp_material_free(hcp_material* m) { delete m; }

hcp_status hcp_reduced_tensor(const hcp_material* m, int which, double* out3x3)
{
    if (!m || !out3x3) return bad_argument("null argument");
    if (which != 0 && which != 1) return bad_argument("which must be 0 or 1");
    return guarded([&] {
        const hcp::Mat3 R = hcp::reduced_tensor(which == 0 ? m->mat.C0 : m->mat.C1);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out3x3[3 * r + c] = R(r, c);
    });
}

} // extern "C"
