/* Generated by cbindgen; do not edit. */

#ifndef TAILMINER_H
#define TAILMINER_H

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum TmStatus {
  TM_STATUS_OK = 0,
  TM_STATUS_NULL_POINTER = 1,
  TM_STATUS_INVALID_INPUT = 2,
  TM_STATUS_CONFIG = 3,
  TM_STATUS_PARSE = 4,
  TM_STATUS_IO = 5,
  TM_STATUS_MISSING_STAGE = 6,
  TM_STATUS_TRAINING = 7,
  TM_STATUS_FROZEN = 8,
  TM_STATUS_UNDEFINED_BASELINE = 9,
  TM_STATUS_PANIC = 10,
} TmStatus;

/*
 Frozen backbone, recalibration layer and autoencoder from one run directory.
 */
typedef struct TmMiner TmMiner;

/*
 A dense network loaded from a weights checkpoint.
 */
typedef struct TmNetwork TmNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *tm_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *tm_version(void);

/*
 Numerically stable softmax of `n` logits into `out[n]`.

 # Safety
 `z` and `out` must point to `n` readable / writable doubles.
 */
enum TmStatus tm_softmax(const double *z, size_t n, double *out);

/*
 Decision score `||softmax(z) - softmax(z_hat)||^2`.

 # Safety
 `z` and `z_hat` must point to `n` doubles; `out` to one writable double.
 */
enum TmStatus tm_score_ours(const double *z, const double *z_hat, size_t n, double *out);

/*
 `1 - max p`.

 # Safety
 `probs` must point to `n` doubles; `out` to one writable double.
 */
enum TmStatus tm_score_max(const double *probs, size_t n, double *out);

/*
 Shannon entropy in nats.

 # Safety
 `probs` must point to `n` doubles; `out` to one writable double.
 */
enum TmStatus tm_score_entropy(const double *probs, size_t n, double *out);

/*
 Entropy of `p_k / (b_k * n)` for class proportions `b`.

 # Safety
 `probs` and `proportions` must point to `n` doubles; `out` to one double.
 */
enum TmStatus tm_score_weighted_entropy(const double *probs,
                                        const double *proportions,
                                        size_t n,
                                        double *out);

/*
 AUC-PR of a ranked list given per-position relevance flags (nonzero = tail).

 # Safety
 `flags` must point to `n` bytes; `out` to one writable double.
 */
enum TmStatus tm_auc_pr(const uint8_t *flags, size_t n, double *out);

/*
 Mean F-score over every prefix of a ranked list.

 # Safety
 `flags` must point to `n` bytes; `out` to one writable double.
 */
enum TmStatus tm_avg_f(const uint8_t *flags, size_t n, double *out);

/*
 Loads any `tailminer-weights-v1` checkpoint.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TmStatus tm_network_load(const char *path, struct TmNetwork **out);

/*
 Input and output widths of a network.

 # Safety
 `net` must come from [`tm_network_load`]; the out pointers must be writable.
 */
enum TmStatus tm_network_dims(const struct TmNetwork *net, size_t *input_dim, size_t *output_dim);

/*
 Forward pass of one input vector.

 # Safety
 `x` must point to `n_in` doubles and `out` to `n_out` writable doubles.
 */
enum TmStatus tm_network_forward(const struct TmNetwork *net,
                                 const double *x,
                                 size_t n_in,
                                 double *out,
                                 size_t n_out);

/*
 Releases a network; NULL is ignored.

 # Safety
 `net` must come from [`tm_network_load`] and not be used afterwards.
 */
void tm_network_free(struct TmNetwork *net);

/*
 Opens `backbone.weights`, `rc.weights` and `ae.weights` in `run_dir`.

 # Safety
 `run_dir` must be a NUL-terminated string; `out` must be writable.
 */
enum TmStatus tm_miner_open(const char *run_dir, struct TmMiner **out);

/*
 Feature width and class count the miner expects.

 # Safety
 `miner` must come from [`tm_miner_open`]; out pointers must be writable.
 */
enum TmStatus tm_miner_dims(const struct TmMiner *miner, size_t *feature_dim, size_t *num_classes);

/*
 Calibrated logits `z` for one feature vector.

 # Safety
 `x` must point to `n` doubles and `out` to `c` writable doubles.
 */
enum TmStatus tm_miner_calibrated_logits(const struct TmMiner *miner,
                                         const double *x,
                                         size_t n,
                                         double *out,
                                         size_t c);

/*
 Mining score of `rows` feature vectors stored row-major in `x`
 (`rows * n` doubles); writes `rows` scores.

 # Safety
 `x` must point to `rows * n` doubles and `out` to `rows` writable doubles.
 */
enum TmStatus tm_miner_score(const struct TmMiner *miner,
                             const double *x,
                             size_t rows,
                             size_t n,
                             double *out);

/*
 Releases a miner; NULL is ignored.

 # Safety
 `miner` must come from [`tm_miner_open`] and not be used afterwards.
 */
void tm_miner_free(struct TmMiner *miner);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAILMINER_H */
