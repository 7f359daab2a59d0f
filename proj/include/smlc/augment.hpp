#pragma once

#include <array>
#include <string>
#include <vector>

#include "smlc/dataset.hpp"
#include "smlc/features.hpp"

namespace smlc {

// Feature frames of one target speaker, capped at a duration of speech.
struct FramePool {
    MatrixF frames; // P x D
    std::string speaker_id;
    double duration_s = 0.0; // P * hop
    double frame_hop_s = 0.0;
};

constexpr double kDefaultPoolCapS = 60.0;
constexpr size_t kDefaultKnnK = 4;

// Concatenates the speaker's frames in input order until cap_s of audio is
// covered. All sequences must share hop and dimension.
FramePool build_pool(const std::vector<FeatureSequence>& features, const std::string& speaker_id,
                     double cap_s = kDefaultPoolCapS);

// Replaces every source frame by the mean of its k nearest pool frames under
// cosine distance, ties broken toward the lower pool index. Length, hop and
// kind are preserved.
FeatureSequence knn_convert(const FeatureSequence& source, const FramePool& pool,
                            size_t k = kDefaultKnnK);

struct PlanItem {
    std::string source_id;       // entry supplying the content frames
    std::string target_speaker;  // speaker supplying the style pool and labels
    std::string output_id;
};

struct AugmentationPlan {
    std::vector<PlanItem> items;
    std::array<size_t, kNumLabels> target_counts{};
    double budget_s = 0.0;
};

// Greedy deficit filling: labels are visited by descending deficit and each
// receives conversions whose target speaker is positive for it, until the
// label reaches its target count or the duration budget runs out. Sources and
// donors are drawn in seed-shuffled round-robin order; a plan item never
// converts a speaker to itself. Deterministic in (entries, seed).
// durations_s gives each entry's audio length (parallel to entries) so the
// budget can be tracked at plan time.
AugmentationPlan plan_augmentation(const std::vector<ManifestEntry>& entries,
                                   const std::vector<double>& durations_s,
                                   const std::array<size_t, kNumLabels>& target_counts,
                                   double budget_s, uint64_t seed);

struct ExecuteResult {
    std::vector<ManifestEntry> fragment; // augmented entries in plan order
    std::vector<std::string> skipped;    // "output_id<TAB>reason" per aborted item
};

// Runs every plan item: builds the target speaker's pool, converts, writes
// <out_dir>/<output_id>.smlcfeat, and emits a manifest line whose labels and
// votes copy the target speaker's. Item failures are recorded in the skip
// report (also written to <out_dir>/skip_report.txt) instead of aborting the
// whole plan.
ExecuteResult execute_plan(const AugmentationPlan& plan, const Dataset& store, size_t k,
                           const std::string& out_dir, double pool_cap_s = kDefaultPoolCapS);

} // namespace smlc
