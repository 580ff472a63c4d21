#ifndef SCALAW_H
#define SCALAW_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScalawStatus {
  SCALAW_STATUS_OK = 0,
  SCALAW_STATUS_NULL_POINTER = 1,
  SCALAW_STATUS_INVALID_ARGUMENT = 2,
  SCALAW_STATUS_PARSE = 3,
  SCALAW_STATUS_SCHEMA = 4,
  SCALAW_STATUS_FIT_FAILED = 5,
  SCALAW_STATUS_DOMAIN = 6,
  SCALAW_STATUS_PANIC = 7,
} ScalawStatus;

typedef struct ScalawDataset ScalawDataset;

typedef struct ScalawFrontier ScalawFrontier;

typedef struct ScalawLaw ScalawLaw;

typedef struct ScalawLawParams {
  double a;
  double b;
  double e;
  double alpha;
  double beta;
} ScalawLawParams;

typedef struct ScalawFrontierParams {
  double xi;
  double g;
  double a;
  double b;
  double gamma;
  double f;
  double e;
} ScalawFrontierParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Release with
 * [`scalaw_string_free`].
 */
char *scalaw_last_error_message(void);

void scalaw_string_free(char *s);

/**
 * FLOPs per parameter-token for a preset name (`baseline`, `equivariant_mixed`,
 * `pure_multivector`) or a decimal number.
 */
enum ScalawStatus scalaw_xi_preset(const char *name, double *xi_out);

/**
 * Parses experiment CSV text.
 */
enum ScalawStatus scalaw_dataset_from_csv(const char *csv, struct ScalawDataset **dataset_out);

enum ScalawStatus scalaw_dataset_len(const struct ScalawDataset *dataset, size_t *len_out);

void scalaw_dataset_free(struct ScalawDataset *dataset);

enum ScalawStatus scalaw_law_new(const struct ScalawLawParams *params, struct ScalawLaw **law_out);

enum ScalawStatus scalaw_law_params(const struct ScalawLaw *law,
                                    struct ScalawLawParams *params_out);

/**
 * Predicted loss at `n` parameters and `d` tokens.
 */
enum ScalawStatus scalaw_law_eval(const struct ScalawLaw *law,
                                  double n,
                                  double d,
                                  double *loss_out);

void scalaw_law_free(struct ScalawLaw *law);

/**
 * Fits a law with the default start grid. `objective_out` may be null.
 */
enum ScalawStatus scalaw_fit(const struct ScalawDataset *dataset,
                             double delta,
                             bool free_offset,
                             struct ScalawLaw **law_out,
                             double *objective_out);

enum ScalawStatus scalaw_frontier_derive(const struct ScalawLaw *law,
                                         double xi,
                                         struct ScalawFrontier **frontier_out);

enum ScalawStatus scalaw_frontier_params(const struct ScalawFrontier *frontier,
                                         struct ScalawFrontierParams *params_out);

enum ScalawStatus scalaw_frontier_optimal_params(const struct ScalawFrontier *frontier,
                                                 double budget,
                                                 double *params_out);

enum ScalawStatus scalaw_frontier_optimal_tokens(const struct ScalawFrontier *frontier,
                                                 double budget,
                                                 double *tokens_out);

enum ScalawStatus scalaw_frontier_optimal_loss(const struct ScalawFrontier *frontier,
                                               double budget,
                                               double *loss_out);

void scalaw_frontier_free(struct ScalawFrontier *frontier);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCALAW_H */
