#ifndef FCL_FCL_H
#define FCL_FCL_H

/* C interface to the compositional HOI toolkit. Every command takes a JSON
 * configuration string (schemas in README.md) and returns:
 *   0  success
 *   1  invalid configuration or arguments
 *   2  file / serialization error
 * After a non-zero return, fcl_ctx_error() holds a human-readable message. */

#ifdef __cplusplus
extern "C" {
#endif

typedef struct fcl_ctx fcl_ctx;

fcl_ctx* fcl_ctx_new(void);
void fcl_ctx_free(fcl_ctx* ctx);

/* Message from the most recent failed call on this context; empty string if
 * the last call succeeded. The pointer is owned by the context and valid
 * until the next call on it. */
const char* fcl_ctx_error(const fcl_ctx* ctx);

/* Generate a synthetic world and dataset. */
int fcl_gen(fcl_ctx* ctx, const char* config_json);

/* Train a model on a generated dataset. */
int fcl_train(fcl_ctx* ctx, const char* config_json);

/* Run inference and/or score detections against the test split. */
int fcl_eval(fcl_ctx* ctx, const char* config_json);

/* Report per-batch composition statistics without training. */
int fcl_audit(fcl_ctx* ctx, const char* config_json);

/* Dump real and fabricated object features for inspection. */
int fcl_dump_embeddings(fcl_ctx* ctx, const char* config_json);

#ifdef __cplusplus
}
#endif

#endif /* FCL_FCL_H */
