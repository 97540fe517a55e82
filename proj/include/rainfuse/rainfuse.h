#ifndef RAINFUSE_RAINFUSE_H
#define RAINFUSE_RAINFUSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RF_API __declspec(dllexport)
#else
#define RF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rf_status {
  RF_OK = 0,
  RF_ERR_INVALID_ARGUMENT = 1, /* null handle, bad value */
  RF_ERR_CONFIG = 2,           /* unknown key, invalid field, missing input file */
  RF_ERR_INGEST = 3,           /* malformed input rows */
  RF_ERR_IO = 4,               /* filesystem failures */
  RF_ERR_RUNTIME = 5,          /* numerical or pipeline failure */
  RF_ERR_INTERNAL = 6
} rf_status;

typedef enum rf_command {
  RF_CMD_SIMULATE = 0,
  RF_CMD_FIT = 1,
  RF_CMD_PREDICT = 2,
  RF_CMD_VALIDATE = 3
} rf_command;

typedef struct rf_config rf_config;
typedef struct rf_observations rf_observations;

/* Message of the last failing call on this thread ("" when none). */
RF_API const char* rf_last_error(void);
RF_API const char* rf_status_string(rf_status status);
RF_API const char* rf_version(void);

/* Configuration. Handles are owned by the caller and released with
   rf_config_free. */
RF_API rf_status rf_config_new(rf_config** out);
RF_API rf_status rf_config_load(const char* path, rf_config** out);
RF_API rf_status rf_config_parse(const char* text, rf_config** out);
RF_API void rf_config_free(rf_config* config);
/* key is "section.key", value its text form. */
RF_API rf_status rf_config_set(rf_config* config, const char* key, const char* value);
RF_API rf_status rf_config_override_seed(rf_config* config, uint64_t seed);
RF_API rf_status rf_config_override_preset(rf_config* config, const char* preset);
RF_API rf_status rf_config_validate(const rf_config* config, rf_command command);
/* Static text documenting every configuration key. */
RF_API const char* rf_config_help(void);

/* Pipeline commands; each validates the configuration first. */
RF_API rf_status rf_cmd_simulate(const rf_config* config);
RF_API rf_status rf_cmd_fit(const rf_config* config);
RF_API rf_status rf_cmd_predict(const rf_config* config);
RF_API rf_status rf_cmd_validate(const rf_config* config);
RF_API rf_status rf_cmd_run(const rf_config* config, rf_command command);

/* Observations as ingested from the configured paths. */
RF_API rf_status rf_observations_load(const rf_config* config, rf_observations** out);
RF_API void rf_observations_free(rf_observations* obs);
/* Relabels implausible zero gages as missing; flagged may be NULL. */
RF_API rf_status rf_observations_screen(rf_observations* obs, int* flagged);
RF_API rf_status rf_observations_counts(const rf_observations* obs, int* time_steps,
                                        int* gage_records, int* gage_present,
                                        int* radar_present);

/* Numeric helpers. */
RF_API double rf_standard_zr(double rain_mm_h);
RF_API double rf_logistic_zero_prob(double a, double b, double y);
RF_API rf_status rf_dic(double d_bar, double d_at_mean, double* dic, double* p_d);

#ifdef __cplusplus
}
#endif

#endif
