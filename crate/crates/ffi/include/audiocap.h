#ifndef AUDIOCAP_H
#define AUDIOCAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every exported function.
typedef enum AcStatus {
  AC_STATUS_OK = 0,
  AC_STATUS_NULL_POINTER = 1,
  AC_STATUS_INVALID_UTF8 = 2,
  AC_STATUS_IO = 3,
  // Malformed or unsupported file contents.
  AC_STATUS_FORMAT = 4,
  // Arguments or data violate an input requirement.
  AC_STATUS_INVALID = 5,
  // Unexpected internal failure.
  AC_STATUS_INTERNAL = 6,
} AcStatus;

// Opaque captioner handle.
typedef struct AcCaptioner AcCaptioner;

// Corpus-level scores.
typedef struct AcScoreReport {
  double bleu1;
  double bleu2;
  double bleu3;
  double bleu4;
  double rouge_l;
  double cider;
  double richness;
} AcScoreReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads a checkpoint file into a new handle stored in `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum AcStatus ac_captioner_load(const char *path, struct AcCaptioner **out);

// Releases a handle; null is ignored.
//
// # Safety
// `h` must come from [`ac_captioner_load`] and not be used afterwards.
void ac_captioner_free(struct AcCaptioner *h);

// Feature dimension the captioner expects.
//
// # Safety
// `h` must be a live handle and `out` a valid pointer.
enum AcStatus ac_captioner_feature_dim(const struct AcCaptioner *h, uint32_t *out);

// Captions a row-major `frames x dims` matrix of raw log-mel features.
// The caption (space-separated tokens) is stored in `*out`.
//
// # Safety
// `data` must point to `frames * dims` floats; `out` must be valid.
enum AcStatus ac_caption_features(const struct AcCaptioner *h,
                                  const float *data,
                                  size_t frames,
                                  size_t dims,
                                  char **out);

// Captions mono samples in [-1, 1] at `sample_rate` Hz.
//
// # Safety
// `samples` must point to `len` floats; `out` must be valid.
enum AcStatus ac_caption_samples(const struct AcCaptioner *h,
                                 const float *samples,
                                 size_t len,
                                 uint32_t sample_rate,
                                 char **out);

// Captions a 16-bit PCM WAV file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid.
enum AcStatus ac_caption_wav_file(const struct AcCaptioner *h, const char *path, char **out);

// Captions a stored feature file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid.
enum AcStatus ac_caption_feature_file(const struct AcCaptioner *h, const char *path, char **out);

// Scores a line-delimited `{audio_id, hypothesis, references}` file.
// A non-zero `cider_raw` omits the ×10 CIDEr scale.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid.
enum AcStatus ac_evaluate_file(const char *path, int32_t cider_raw, struct AcScoreReport *out);

// Releases a string returned by this library; null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void ac_string_free(char *s);

// Message of the last failed call on this thread (empty after success).
// The pointer stays valid until the next call on the same thread.
const char *ac_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ac_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUDIOCAP_H */
