#include "smlc/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace smlc {

MatrixF binarize(const MatrixF& probabilities, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("binarize: threshold must lie in (0, 1)");
    MatrixF out(probabilities.rows(), probabilities.cols());
    for (size_t i = 0; i < probabilities.size(); ++i)
        out.data()[i] = static_cast<double>(probabilities.data()[i]) >= threshold ? 1.0f : 0.0f;
    return out;
}

double precision_of(const ConfusionCounts& c) {
    return c.tp + c.fp == 0 ? 0.0
                            : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall_of(const ConfusionCounts& c) {
    return c.tp + c.fn == 0 ? 0.0
                            : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double f1(const ConfusionCounts& c) {
    const double p = precision_of(c), r = recall_of(c);
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double macro_f1(const std::vector<double>& per_label) {
    if (per_label.empty()) throw ValidationError("macro_f1: needs at least one label score");
    double sum = 0.0;
    for (double v : per_label) sum += v;
    return sum / static_cast<double>(per_label.size());
}

double detection_probability(const std::vector<double>& probabilities, double threshold) {
    if (probabilities.empty())
        throw ValidationError("detection_probability: undefined on an empty set");
    size_t hits = 0;
    for (double p : probabilities)
        if (p >= threshold) ++hits;
    return static_cast<double>(hits) / static_cast<double>(probabilities.size());
}

std::array<ConfusionCounts, kNumLabels> confusion_counts(const MatrixF& targets,
                                                         const MatrixF& predictions) {
    if (!targets.same_shape(predictions) || targets.cols() != kNumLabels)
        throw ValidationError("confusion_counts: want matching B x " +
                              std::to_string(kNumLabels) + " matrices");
    std::array<ConfusionCounts, kNumLabels> out{};
    for (size_t i = 0; i < targets.rows(); ++i)
        for (size_t k = 0; k < kNumLabels; ++k) {
            const bool y = targets(i, k) != 0.0f;
            const bool p = predictions(i, k) != 0.0f;
            if (y && p) ++out[k].tp;
            else if (!y && p) ++out[k].fp;
            else if (y && !p) ++out[k].fn;
            else ++out[k].tn;
        }
    return out;
}

std::array<std::pair<StratumResult, StratumResult>, kNumLabels> stratified_f1(
    const std::vector<ManifestEntry>& entries, const MatrixF& predictions, int vote_split) {
    if (entries.size() != predictions.rows() || predictions.cols() != kNumLabels)
        throw ValidationError("stratified_f1: predictions must be entries x labels");
    std::array<std::pair<StratumResult, StratumResult>, kNumLabels> out{};
    for (size_t k = 0; k < kNumLabels; ++k) {
        StratumResult& low = out[k].first;
        StratumResult& high = out[k].second;
        for (size_t i = 0; i < entries.size(); ++i) {
            const bool is_high = entries[i].label.votes[k] >= vote_split;
            StratumResult& s = is_high ? high : low;
            s.present = true;
            s.n += 1;
            const bool y = entries[i].label.labels[k] != 0;
            const bool p = predictions(i, k) != 0.0f;
            if (y && p) ++s.counts.tp;
            else if (!y && p) ++s.counts.fp;
            else if (y && !p) ++s.counts.fn;
            else ++s.counts.tn;
        }
        if (low.present) low.f1 = f1(low.counts);
        if (high.present) high.f1 = f1(high.counts);
    }
    return out;
}

MetricsReport evaluate(const ModelParameters<float>& params, const Dataset& eval_set,
                       const EvalOptions& opts) {
    const ModelConfig& cfg = params.cfg;
    if (cfg.n_labels != kNumLabels)
        throw ConfigError("evaluate: model has " + std::to_string(cfg.n_labels) +
                          " labels, manifests carry " + std::to_string(kNumLabels));
    if (eval_set.size() == 0) throw DataError("evaluate: the eval split is empty");
    if (opts.batch_size == 0) throw ConfigError("evaluate: batch size must be positive");
    for (size_t i = 0; i < eval_set.size(); ++i)
        if (eval_set.features[i].dim() != cfg.input_dim)
            throw DataError("evaluate: entry " + eval_set.entries[i].id + " has feature dim " +
                            std::to_string(eval_set.features[i].dim()) + ", model expects " +
                            std::to_string(cfg.input_dim));

    MatrixF probs(eval_set.size(), kNumLabels);
    for (size_t at = 0; at < eval_set.size(); at += opts.batch_size) {
        const size_t end = std::min(eval_set.size(), at + opts.batch_size);
        std::vector<FeatureSequence> inputs;
        inputs.reserve(end - at);
        for (size_t i = at; i < end; ++i)
            inputs.push_back(crop_or_pad(eval_set.features[i], cfg.target_frames));
        auto fwd = forward(params, inputs);
        MatrixF p = predict(fwd.logits);
        for (size_t i = at; i < end; ++i)
            for (size_t k = 0; k < kNumLabels; ++k) probs(i, k) = p(i - at, k);
    }

    const MatrixF preds = binarize(probs, opts.threshold);
    const MatrixF targets = targets_of(eval_set.entries);
    const auto counts = confusion_counts(targets, preds);
    const auto strata = stratified_f1(eval_set.entries, preds, opts.vote_split);

    MetricsReport rep;
    rep.threshold = opts.threshold;
    rep.vote_split = opts.vote_split;
    rep.n_samples = eval_set.size();
    rep.checkpoint_id = opts.checkpoint_id;
    std::vector<double> macro_scores;
    for (size_t k = 0; k < kNumLabels; ++k) {
        LabelMetrics& lm = rep.labels[k];
        lm.counts = counts[k];
        lm.precision = precision_of(counts[k]);
        lm.recall = recall_of(counts[k]);
        lm.f1 = f1(counts[k]);
        std::vector<double> col(eval_set.size());
        for (size_t i = 0; i < eval_set.size(); ++i) col[i] = static_cast<double>(probs(i, k));
        lm.detection = detection_probability(col, opts.threshold);
        lm.low = strata[k].first;
        lm.high = strata[k].second;
        lm.in_macro = counts[k].tp + counts[k].fp + counts[k].fn > 0;
        if (lm.in_macro) macro_scores.push_back(lm.f1);
    }
    rep.macro_label_count = macro_scores.size();
    rep.macro_f1 = macro_scores.empty() ? 0.0 : macro_f1(macro_scores);
    return rep;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string stratum_line(const std::string& label, const char* name, const StratumResult& s) {
    if (!s.present) return "strata " + label + " " + name + " absent\n";
    return "strata " + label + " " + name + " n " + std::to_string(s.n) + " tp " +
           std::to_string(s.counts.tp) + " fp " + std::to_string(s.counts.fp) + " fn " +
           std::to_string(s.counts.fn) + " tn " + std::to_string(s.counts.tn) + " f1 " +
           fmt(s.f1) + "\n";
}

} // namespace

std::string format_report(const MetricsReport& r) {
    std::ostringstream os;
    os << "speaking-style evaluation report\n";
    os << "checkpoint: " << (r.checkpoint_id.empty() ? "-" : r.checkpoint_id) << "\n";
    os << "samples: " << r.n_samples << "\n";
    os << "threshold: " << fmt(r.threshold) << "\n";
    os << "vote_split: " << r.vote_split << "\n";
    os << "\n";
    for (size_t k = 0; k < kNumLabels; ++k) {
        const LabelMetrics& lm = r.labels[k];
        const std::string& name = label_names()[k];
        os << "label " << name << " tp " << lm.counts.tp << " fp " << lm.counts.fp << " fn "
           << lm.counts.fn << " tn " << lm.counts.tn << " precision " << fmt(lm.precision)
           << " recall " << fmt(lm.recall) << " f1 " << fmt(lm.f1) << " detection "
           << fmt(lm.detection) << "\n";
        os << stratum_line(name, "high", lm.high);
        os << stratum_line(name, "low", lm.low);
    }
    os << "\n";
    os << "macro_f1 " << fmt(r.macro_f1) << " labels " << r.macro_label_count << "\n";
    return os.str();
}

void write_report(const MetricsReport& r, const std::string& path) {
    std::ofstream os(path, std::ios::binary); // binary: byte-identical across platforms
    if (!os) throw IoError("cannot write report: " + path);
    os << format_report(r);
    if (!os) throw IoError("failed while writing report: " + path);
}

} // namespace smlc
