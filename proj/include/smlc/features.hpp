#pragma once

#include <cstdint>
#include <string>

#include "smlc/linalg.hpp"
#include "smlc/rng.hpp"

namespace smlc {

enum class FeatureKind : uint8_t { mel80 = 0, external = 1 };

// A T x D sequence of acoustic frames plus the hop that maps frame index to time.
struct FeatureSequence {
    MatrixF frames;             // T x D, row per frame
    double frame_hop_s = 0.01;  // seconds per frame
    FeatureKind kind = FeatureKind::mel80;

    size_t n_frames() const { return frames.rows(); }
    size_t dim() const { return frames.cols(); }
    double duration_s() const { return static_cast<double>(n_frames()) * frame_hop_s; }
};

enum class CropMode { train_random, eval_start };

// Returns a sequence with exactly target_frames frames. Longer inputs yield a
// contiguous window (random start in train mode, frame 0 in eval mode);
// shorter inputs are extended with all-zero frames at the end.
FeatureSequence crop_or_pad(const FeatureSequence& f, size_t target_frames,
                            CropMode mode = CropMode::eval_start, Rng* rng = nullptr);

// Binary feature file, little-endian:
//   magic "SMLCFEAT" | version u32 = 1 | T u32 | D u32 | hop in microseconds u32
//   | kind u8 (0 = mel80, 1 = external) | T*D float32, row-major.
void save_feature_file(const std::string& path, const FeatureSequence& f);
FeatureSequence load_feature_file(const std::string& path);

} // namespace smlc
