#ifndef SENTIGRAPH_H
#define SENTIGRAPH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_ARGUMENT = 1,
  SG_STATUS_INVALID_UTF8 = 2,
  SG_STATUS_INVALID_ARGUMENT = 3,
  SG_STATUS_CODEC = 4,
  SG_STATUS_METRICS = 5,
  SG_STATUS_TREEBANK = 6,
  SG_STATUS_PARSER = 7,
  SG_STATUS_PANIC = 8,
} SgStatus;

/**
 * Opaque translation lexicon handle.
 */
typedef struct SgLexicon SgLexicon;

/**
 * Opaque parser model handle.
 */
typedef struct SgModel SgModel;

/**
 * Opaque treebank handle.
 */
typedef struct SgTreebank SgTreebank;

/**
 * Corpus counts of a treebank.
 */
typedef struct SgStats {
  size_t sentences;
  size_t holders;
  size_t targets;
  size_t expressions;
} SgStats;

/**
 * Lexicon coverage of a translation.
 */
typedef struct SgCoverage {
  size_t tokens;
  size_t translated;
  double coverage;
} SgCoverage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sg_version(void);

/**
 * Message of the last error on this thread, or null. Valid until the next
 * library call on the same thread.
 */
const char *sg_last_error_message(void);

/**
 * Library error code of the last error on this thread (for example
 * `BAD_MAGIC`), or null. Valid until the next library call on the same
 * thread.
 */
const char *sg_last_error_code(void);

/**
 * Release a string returned by the library.
 *
 * # Safety
 * `s` must be null or a string returned by this library that has not been
 * freed yet.
 */
void sg_string_free(char *s);

/**
 * Parse a treebank from JSON bytes.
 *
 * # Safety
 * `data` must point to `len` readable bytes, `name` must be a
 * NUL-terminated string and `out` must be writable.
 */
enum SgStatus sg_treebank_from_json(const uint8_t *data,
                                    size_t len,
                                    const char *name,
                                    struct SgTreebank **out);

/**
 * Parse a graph file and decode its opinions. `dangling` may be null;
 * otherwise it receives the number of edges that could not be decoded.
 *
 * # Safety
 * `text` and `name` must be NUL-terminated strings, `out` must be writable
 * and `dangling` must be null or writable.
 */
enum SgStatus sg_treebank_from_graph(const char *text,
                                     const char *name,
                                     struct SgTreebank **out,
                                     size_t *dangling);

/**
 * Serialize a treebank as JSON.
 *
 * # Safety
 * `tb` must be a live treebank handle and `out` must be writable.
 */
enum SgStatus sg_treebank_to_json(const struct SgTreebank *tb, char **out);

/**
 * Encode a treebank and render it as a graph file. `mode` is `head_final`,
 * `head_first` or null for the default. A non-zero `force` resolves label
 * collisions instead of failing.
 *
 * # Safety
 * `tb` must be a live treebank handle, `mode` null or a NUL-terminated
 * string and `out` writable.
 */
enum SgStatus sg_treebank_to_graph(const struct SgTreebank *tb,
                                   const char *mode,
                                   bool force,
                                   char **out);

/**
 * Number of sentences in a treebank.
 *
 * # Safety
 * `tb` must be a live treebank handle and `out` writable.
 */
enum SgStatus sg_treebank_len(const struct SgTreebank *tb, size_t *out);

/**
 * Corpus counts of a treebank.
 *
 * # Safety
 * `tb` must be a live treebank handle and `out` writable.
 */
enum SgStatus sg_treebank_stats(const struct SgTreebank *tb, struct SgStats *out);

/**
 * Concatenate treebanks, prefixing sentence ids with the treebank name.
 *
 * # Safety
 * `parts` must point to `count` live treebank handles and `out` must be
 * writable.
 */
enum SgStatus sg_treebank_merge(const struct SgTreebank *const *parts,
                                size_t count,
                                struct SgTreebank **out);

/**
 * Release a treebank handle.
 *
 * # Safety
 * `tb` must be null or a treebank handle that has not been freed yet.
 */
void sg_treebank_free(struct SgTreebank *tb);

/**
 * Score a predicted treebank against gold. The report is written to `out`
 * as JSON with `sentiment_graph`, `edges` and `spans` sections.
 *
 * # Safety
 * `pred` and `gold` must be live treebank handles, `mode` null or a
 * NUL-terminated string and `out` writable.
 */
enum SgStatus sg_evaluate(const struct SgTreebank *pred,
                          const struct SgTreebank *gold,
                          bool require_polarity,
                          bool labeled,
                          const char *mode,
                          char **out);

/**
 * Load a tab-separated word-to-word lexicon.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be writable.
 */
enum SgStatus sg_lexicon_load(const uint8_t *data,
                              size_t len,
                              bool case_fold,
                              struct SgLexicon **out);

/**
 * Release a lexicon handle.
 *
 * # Safety
 * `lex` must be null or a lexicon handle that has not been freed yet.
 */
void sg_lexicon_free(struct SgLexicon *lex);

/**
 * Translate a treebank word by word. `coverage` may be null.
 *
 * # Safety
 * `tb` and `lex` must be live handles, `out` writable and `coverage` null
 * or writable.
 */
enum SgStatus sg_translate(const struct SgTreebank *tb,
                           const struct SgLexicon *lex,
                           struct SgTreebank **out,
                           struct SgCoverage *coverage);

/**
 * Load a parser checkpoint.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be writable.
 */
enum SgStatus sg_model_load(const uint8_t *data, size_t len, struct SgModel **out);

/**
 * Release a model handle.
 *
 * # Safety
 * `model` must be null or a model handle that has not been freed yet.
 */
void sg_model_free(struct SgModel *model);

/**
 * Predict opinions for every sentence of `input`. Models trained on
 * precomputed vectors need the embedding file in `embeddings`; pass null
 * and zero otherwise. `dangling` may be null.
 *
 * # Safety
 * `model` and `input` must be live handles, `embeddings` must point to
 * `embeddings_len` readable bytes, `out` must be writable and `dangling`
 * null or writable.
 */
enum SgStatus sg_model_predict(const struct SgModel *model,
                               const struct SgTreebank *input,
                               const uint8_t *embeddings,
                               size_t embeddings_len,
                               struct SgTreebank **out,
                               size_t *dangling);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SENTIGRAPH_H */
