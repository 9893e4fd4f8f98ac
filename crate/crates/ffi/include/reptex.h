#ifndef REPTEX_H
#define REPTEX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Which of the selected candidates to query.
typedef enum ReptexChoice {
  // Closest to the centroid.
  REPTEX_CHOICE_PLAIN = 0,
  // Smallest weighted distance.
  REPTEX_CHOICE_WEIGHTED = 1,
  // Median distance.
  REPTEX_CHOICE_MEDIAN = 2,
} ReptexChoice;

// Embedder selection for [`reptex_params_set_embedder`].
typedef enum ReptexEmbedder {
  REPTEX_EMBEDDER_AUTOENCODER = 0,
  REPTEX_EMBEDDER_DESCRIPTOR = 1,
} ReptexEmbedder;

// Status codes returned by every fallible function.
typedef enum ReptexStatus {
  REPTEX_STATUS_OK = 0,
  REPTEX_STATUS_NULL_ARGUMENT = 1,
  REPTEX_STATUS_INVALID_ARGUMENT = 2,
  REPTEX_STATUS_IO = 3,
  REPTEX_STATUS_PIPELINE = 4,
  REPTEX_STATUS_OUT_OF_RANGE = 5,
  REPTEX_STATUS_PANIC = 6,
} ReptexStatus;

// RGB image, 8 bits per channel.
typedef struct ReptexImage ReptexImage;

// Binary region mask.
typedef struct ReptexMask ReptexMask;

// Extraction parameters.
typedef struct ReptexParams ReptexParams;

// Outcome of one extraction.
typedef struct ReptexResult ReptexResult;

// Axis-aligned pixel rectangle, top-left origin.
typedef struct ReptexRect {
  uintptr_t x;
  uintptr_t y;
  uintptr_t width;
  uintptr_t height;
} ReptexRect;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *reptex_last_error(void);

// Library version as a static NUL-terminated string.
const char *reptex_version(void);

// Creates an image from `width * height * 3` bytes of packed RGB.
//
// # Safety
// `rgb` must point to at least `width * height * 3` readable bytes and `out`
// must be a valid pointer.
enum ReptexStatus reptex_image_new(uintptr_t width,
                                   uintptr_t height,
                                   const uint8_t *rgb,
                                   struct ReptexImage **out);

// Loads a PNG image.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ReptexStatus reptex_image_load(const char *path, struct ReptexImage **out);

// Writes an image as PNG.
//
// # Safety
// `image` must come from this library; `path` must be NUL-terminated.
enum ReptexStatus reptex_image_save(const struct ReptexImage *image, const char *path);

// Width in pixels, 0 for a null handle.
//
// # Safety
// `image` must be null or come from this library.
uintptr_t reptex_image_width(const struct ReptexImage *image);

// Height in pixels, 0 for a null handle.
//
// # Safety
// `image` must be null or come from this library.
uintptr_t reptex_image_height(const struct ReptexImage *image);

// Copies packed RGB bytes into `buf`, which must hold `width * height * 3`.
//
// # Safety
// `image` must come from this library and `buf` must point to `len`
// writable bytes.
enum ReptexStatus reptex_image_copy_pixels(const struct ReptexImage *image,
                                           uint8_t *buf,
                                           uintptr_t len);

// Releases an image. Null is ignored.
//
// # Safety
// `image` must be null or come from this library and not be used afterwards.
void reptex_image_free(struct ReptexImage *image);

// Creates a mask from `width * height` bytes; nonzero marks the region.
//
// # Safety
// `bits` must point to at least `width * height` readable bytes and `out`
// must be a valid pointer.
enum ReptexStatus reptex_mask_new(uintptr_t width,
                                  uintptr_t height,
                                  const uint8_t *bits,
                                  struct ReptexMask **out);

// Loads a mask PNG; nonzero pixels mark the region.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ReptexStatus reptex_mask_load(const char *path, struct ReptexMask **out);

// Releases a mask. Null is ignored.
//
// # Safety
// `mask` must be null or come from this library and not be used afterwards.
void reptex_mask_free(struct ReptexMask *mask);

// Default parameters: 10000 samples, sides 16..48, coverage 0.9,
// autoencoder embedder, k in {3,4,5,6}, seed 0.
struct ReptexParams *reptex_params_new(void);

// Releases parameters. Null is ignored.
//
// # Safety
// `params` must be null or come from this library and not be used afterwards.
void reptex_params_free(struct ReptexParams *params);

// # Safety
// `params` must come from [`reptex_params_new`].
enum ReptexStatus reptex_params_set_seed(struct ReptexParams *params, uint64_t seed);

// Number of candidate crops to draw.
//
// # Safety
// `params` must come from [`reptex_params_new`].
enum ReptexStatus reptex_params_set_samples(struct ReptexParams *params, uintptr_t samples);

// Inclusive range of crop side lengths.
//
// # Safety
// `params` must come from [`reptex_params_new`].
enum ReptexStatus reptex_params_set_side_range(struct ReptexParams *params,
                                               uintptr_t min_side,
                                               uintptr_t max_side);

// Minimum fraction of a crop that must lie inside the mask, in (0, 1].
//
// # Safety
// `params` must come from [`reptex_params_new`].
enum ReptexStatus reptex_params_set_coverage(struct ReptexParams *params, double coverage);

// # Safety
// `params` must come from [`reptex_params_new`].
enum ReptexStatus reptex_params_set_embedder(struct ReptexParams *params, enum ReptexEmbedder kind);

// Autoencoder training epochs.
//
// # Safety
// `params` must come from [`reptex_params_new`].
enum ReptexStatus reptex_params_set_epochs(struct ReptexParams *params, uintptr_t epochs);

// Candidate cluster counts. Each must be at least 2.
//
// # Safety
// `params` must come from [`reptex_params_new`]; `ks` must point to `len`
// readable values.
enum ReptexStatus reptex_params_set_k_set(struct ReptexParams *params,
                                          const uintptr_t *ks,
                                          uintptr_t len);

// Extracts textures from `image`. A null `mask` treats the whole image as
// one region.
//
// # Safety
// Handles must come from this library; `out` must be a valid pointer.
enum ReptexStatus reptex_extract(const struct ReptexImage *image,
                                 const struct ReptexMask *mask,
                                 const struct ReptexParams *params,
                                 struct ReptexResult **out);

// Releases a result. Null is ignored.
//
// # Safety
// `result` must be null or come from this library and not be used afterwards.
void reptex_result_free(struct ReptexResult *result);

// Number of sampled candidates, 0 for a null handle.
//
// # Safety
// `result` must be null or come from this library.
uintptr_t reptex_result_candidate_count(const struct ReptexResult *result);

// Cluster count chosen by the Davies-Bouldin criterion, 0 for a null handle.
//
// # Safety
// `result` must be null or come from this library.
uintptr_t reptex_result_selected_k(const struct ReptexResult *result);

// Size of the cluster the texture was picked from, 0 for a null handle.
//
// # Safety
// `result` must be null or come from this library.
uintptr_t reptex_result_cluster_size(const struct ReptexResult *result);

// Image rectangle of the chosen candidate.
//
// # Safety
// `result` must come from this library; `out` must be a valid pointer.
enum ReptexStatus reptex_result_chosen_rect(const struct ReptexResult *result,
                                            enum ReptexChoice which,
                                            struct ReptexRect *out);

// Copy of the chosen texture crop as a new image.
//
// # Safety
// `result` must come from this library; `out` must be a valid pointer.
enum ReptexStatus reptex_result_texture(const struct ReptexResult *result,
                                        enum ReptexChoice which,
                                        struct ReptexImage **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* REPTEX_H */
