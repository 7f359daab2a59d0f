#pragma once

#include <array>
#include <string>
#include <vector>

#include "smlc/dataset.hpp"
#include "smlc/model.hpp"

namespace smlc {

struct ConfusionCounts {
    size_t tp = 0, fp = 0, fn = 0, tn = 0;

    size_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

// prediction = 1 iff probability >= threshold; threshold must lie in (0, 1).
MatrixF binarize(const MatrixF& probabilities, double threshold = 0.5);

// Zero-denominator conventions: all three are 0 when undefined.
double precision_of(const ConfusionCounts& c);
double recall_of(const ConfusionCounts& c);
double f1(const ConfusionCounts& c);

// Unweighted mean of per-label scores.
double macro_f1(const std::vector<double>& per_label);

// Fraction of samples whose probability clears the threshold.
double detection_probability(const std::vector<double>& probabilities, double threshold);

// Per-label confusion from binary targets and predictions (both B x K).
std::array<ConfusionCounts, kNumLabels> confusion_counts(const MatrixF& targets,
                                                         const MatrixF& predictions);

struct StratumResult {
    bool present = false; // false = stratum empty, reported as absent
    size_t n = 0;
    ConfusionCounts counts;
    double f1 = 0.0;
};

// For each label, entries are partitioned by votes[label] >= vote_split and F1
// is computed inside each stratum. first = low stratum, second = high.
std::array<std::pair<StratumResult, StratumResult>, kNumLabels> stratified_f1(
    const std::vector<ManifestEntry>& entries, const MatrixF& predictions, int vote_split = 5);

struct LabelMetrics {
    ConfusionCounts counts;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    double detection = 0.0;
    bool in_macro = false; // label had a positive or a predicted positive
    StratumResult low, high;
};

struct MetricsReport {
    std::array<LabelMetrics, kNumLabels> labels;
    double macro_f1 = 0.0;
    size_t macro_label_count = 0;
    double threshold = 0.5;
    int vote_split = 5;
    size_t n_samples = 0;
    std::string checkpoint_id;
};

struct EvalOptions {
    double threshold = 0.5;
    int vote_split = 5;
    size_t batch_size = 64;
    std::string checkpoint_id; // echoed into the report
};

// Deterministic evaluation: crop from frame 0, batched forward in manifest
// order, sigmoid, binarize, then every metric above. The macro average covers
// only labels that occur as positives or were predicted positive.
MetricsReport evaluate(const ModelParameters<float>& params, const Dataset& eval_set,
                       const EvalOptions& opts);

// Stable text schema; identical reports are byte-identical.
std::string format_report(const MetricsReport& r);
void write_report(const MetricsReport& r, const std::string& path);

} // namespace smlc
