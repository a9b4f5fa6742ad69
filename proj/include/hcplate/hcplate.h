#ifndef HCPLATE_H
#define HCPLATE_H

/* C interface of the hcplate library. Handles are opaque; every call that
 * can fail returns an hcp_status and records a message retrievable with
 * hcp_last_error() on the calling thread. */

#include <stddef.h>

#if defined(_WIN32)
#define HCP_API __declspec(dllexport)
#else
#define HCP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hcp_status {
    HCP_OK = 0,
    HCP_ERR_ARGUMENT = 1, /* null pointer or invalid argument */
    HCP_ERR_CONFIG = 2,   /* configuration, geometry or regime error */
    HCP_ERR_SOLVER = 3,   /* solver failure */
    HCP_ERR_INTERNAL = 4  /* unexpected exception */
} hcp_status;

typedef struct hcp_config hcp_config;
typedef struct hcp_material hcp_material;

HCP_API const char* hcp_version(void);
HCP_API const char* hcp_last_error(void);
/* Process exit code for a status: 0, 2 or 3. */
HCP_API int hcp_exit_code(hcp_status status);
HCP_API hcp_status hcp_set_threads(int n);

HCP_API hcp_status hcp_config_load(const char* path, hcp_config** out);
/* base_dir resolves a relative material path; may be NULL. */
HCP_API hcp_status hcp_config_parse(const char* json_text, const char* base_dir, hcp_config** out);
HCP_API void hcp_config_free(hcp_config* cfg);
/* Returns a pointer owned by the handle. */
HCP_API const char* hcp_config_hash(const hcp_config* cfg);
HCP_API hcp_status hcp_config_regime_row(const hcp_config* cfg, int* row);
/* Effective tensor of the configured regime, 36 doubles in row-major Voigt order. */
HCP_API hcp_status hcp_config_effective_tensor(const hcp_config* cfg, double* full6x6);

/* Runs a command (tensor, bloch, zhikov, spectrum, evolve, resolvent,
 * validate). On success *summary receives a JSON string to be released with
 * hcp_string_free; summary may be NULL. */
HCP_API hcp_status hcp_run(const hcp_config* cfg, const char* command, const char* out_dir, char** summary);
HCP_API void hcp_string_free(char* s);

HCP_API hcp_status hcp_material_isotropic(double lambda0, double mu0, double lambda1, double mu1, double rho0,
                                          double rho1, double nu, hcp_material** out);
HCP_API hcp_status hcp_material_load(const char* path, hcp_material** out);
HCP_API void hcp_material_free(hcp_material* m);
/* Reduced plate tensor of C0 (which = 0) or C1 (which = 1), 9 doubles row-major. */
HCP_API hcp_status hcp_reduced_tensor(const hcp_material* m, int which, double* out3x3);

#ifdef __cplusplus
}
#endif

#endif
