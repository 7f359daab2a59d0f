#include "smlc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "smlc/rng.hpp"

namespace smlc {

FramePool build_pool(const std::vector<FeatureSequence>& features, const std::string& speaker_id,
                     double cap_s) {
    if (features.empty()) throw DataError("build_pool: no features for speaker " + speaker_id);
    const double hop = features[0].frame_hop_s;
    const size_t dim = features[0].dim();
    for (const auto& f : features)
        if (f.frame_hop_s != hop || f.dim() != dim)
            throw ConfigError("build_pool: mixed hop or dimension for speaker " + speaker_id);
    if (!(cap_s > 0.0) || !(hop > 0.0)) throw ConfigError("build_pool: cap and hop must be positive");

    const size_t max_frames = static_cast<size_t>(std::llround(cap_s / hop));
    size_t available = 0;
    for (const auto& f : features) available += f.n_frames();
    const size_t total = std::min(available, max_frames);
    if (total == 0) throw DataError("build_pool: no frames within cap for speaker " + speaker_id);

    FramePool pool;
    pool.frames = MatrixF(total, dim);
    pool.speaker_id = speaker_id;
    pool.frame_hop_s = hop;
    size_t at = 0;
    for (const auto& f : features) {
        for (size_t i = 0; i < f.n_frames() && at < total; ++i, ++at)
            std::copy(f.frames.row(i), f.frames.row(i) + dim, pool.frames.row(at));
        if (at == total) break;
    }
    pool.duration_s = static_cast<double>(total) * hop;
    return pool;
}

namespace {

// Cosine distance in double; zero-norm frames are treated as orthogonal.
double cosine_distance(const float* a, const float* b, size_t n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double x = a[i], y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace

FeatureSequence knn_convert(const FeatureSequence& source, const FramePool& pool, size_t k) {
    const size_t p = pool.frames.rows(), dim = pool.frames.cols();
    if (k < 1) throw ConfigError("knn_convert: k must be at least 1");
    if (k > p)
        throw ConfigError("knn_convert: k = " + std::to_string(k) + " exceeds pool size " +
                          std::to_string(p));
    if (source.dim() != dim)
        throw ConfigError("knn_convert: source dimension " + std::to_string(source.dim()) +
                          " does not match pool dimension " + std::to_string(dim));

    FeatureSequence out;
    out.frames = MatrixF(source.n_frames(), dim);
    out.frame_hop_s = source.frame_hop_s;
    out.kind = source.kind;

    const size_t t_total = source.n_frames();
#pragma omp parallel
    {
        std::vector<std::pair<double, size_t>> dist(p);
        std::vector<double> acc(dim);
#pragma omp for schedule(static)
        for (long long ti = 0; ti < static_cast<long long>(t_total); ++ti) {
            const size_t t = static_cast<size_t>(ti);
            const float* src = source.frames.row(t);
            for (size_t j = 0; j < p; ++j)
                dist[j] = {cosine_distance(src, pool.frames.row(j), dim), j};
            // ascending (distance, index); the pair order is the tie rule
            std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
            std::fill(acc.begin(), acc.end(), 0.0);
            for (size_t r = 0; r < k; ++r) {
                const float* prow = pool.frames.row(dist[r].second);
                for (size_t c = 0; c < dim; ++c) acc[c] += static_cast<double>(prow[c]);
            }
            float* orow = out.frames.row(t);
            for (size_t c = 0; c < dim; ++c)
                orow[c] = static_cast<float>(acc[c] / static_cast<double>(k));
        }
    }
    return out;
}

AugmentationPlan plan_augmentation(const std::vector<ManifestEntry>& entries,
                                   const std::vector<double>& durations_s,
                                   const std::array<size_t, kNumLabels>& target_counts,
                                   double budget_s, uint64_t seed) {
    if (durations_s.size() != entries.size())
        throw ValidationError("plan_augmentation: durations must parallel the entries");
    if (!(budget_s > 0.0)) throw ConfigError("plan_augmentation: budget must be positive");

    // Only original training rows act as conversion sources and style donors.
    std::vector<size_t> eligible;
    for (size_t i = 0; i < entries.size(); ++i)
        if (entries[i].split == Split::train && !entries[i].excluded && !entries[i].augmented)
            eligible.push_back(i);

    std::array<size_t, kNumLabels> counts{};
    std::map<std::string, LabelVector> speaker_labels; // first eligible entry wins
    for (size_t i : eligible) {
        for (size_t j = 0; j < kNumLabels; ++j) counts[j] += entries[i].label.labels[j];
        speaker_labels.emplace(entries[i].speaker_id, entries[i].label);
    }

    AugmentationPlan plan;
    plan.target_counts = target_counts;
    plan.budget_s = budget_s;

    std::vector<size_t> label_order;
    for (size_t j = 0; j < kNumLabels; ++j)
        if (target_counts[j] > counts[j]) label_order.push_back(j);
    std::sort(label_order.begin(), label_order.end(), [&](size_t a, size_t b) {
        const size_t da = target_counts[a] - counts[a], db = target_counts[b] - counts[b];
        return da != db ? da > db : a < b;
    });

    double used_s = 0.0;
    bool budget_left = true;
    for (size_t lab : label_order) {
        if (!budget_left) break;
        std::vector<std::string> donors; // speakers positive for lab, in first-seen order
        for (size_t i : eligible)
            if (entries[i].label.labels[lab] &&
                std::find(donors.begin(), donors.end(), entries[i].speaker_id) == donors.end())
                donors.push_back(entries[i].speaker_id);
        if (donors.empty())
            throw PlanningError("plan_augmentation: no eligible target speakers for label " +
                                label_names()[lab]);
        std::vector<size_t> sources = eligible;
        Rng donor_rng(substream_seed(seed, "plan-donors", lab));
        Rng source_rng(substream_seed(seed, "plan-sources", lab));
        shuffle(donors, donor_rng);
        shuffle(sources, source_rng);

        size_t di = 0, si = 0;
        while (counts[lab] < target_counts[lab] && budget_left) {
            // next (source, donor) pair in round-robin order, never self-converting
            bool planned = false;
            for (size_t dtry = 0; dtry < donors.size() && !planned && budget_left; ++dtry) {
                const std::string& donor = donors[(di + dtry) % donors.size()];
                for (size_t stry = 0; stry < sources.size(); ++stry) {
                    const size_t src = sources[(si + stry) % sources.size()];
                    if (entries[src].speaker_id == donor) continue;
                    if (used_s + durations_s[src] > budget_s) {
                        budget_left = false;
                        break;
                    }
                    used_s += durations_s[src];
                    plan.items.push_back({entries[src].id, donor,
                                          "aug-" + std::to_string(plan.items.size()) + "-" +
                                              entries[src].id + "-as-" + donor});
                    const LabelVector& dl = speaker_labels.at(donor);
                    for (size_t j = 0; j < kNumLabels; ++j) counts[j] += dl.labels[j];
                    si = (si + stry + 1) % sources.size();
                    di = (di + dtry + 1) % donors.size();
                    planned = true;
                    break;
                }
            }
            if (!planned && budget_left)
                throw PlanningError(
                    "plan_augmentation: no source/target pairing avoids self-conversion for "
                    "label " +
                    label_names()[lab]);
        }
    }
    return plan;
}

ExecuteResult execute_plan(const AugmentationPlan& plan, const Dataset& store, size_t k,
                           const std::string& out_dir, double pool_cap_s) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::map<std::string, size_t> by_id;
    std::map<std::string, std::vector<size_t>> by_speaker;
    for (size_t i = 0; i < store.size(); ++i) {
        by_id.emplace(store.entries[i].id, i);
        by_speaker[store.entries[i].speaker_id].push_back(i);
    }

    ExecuteResult result;
    for (const PlanItem& item : plan.items) {
        auto skip = [&](const std::string& reason) {
            result.skipped.push_back(item.output_id + "\t" + reason);
        };
        auto sit = by_id.find(item.source_id);
        if (sit == by_id.end()) {
            skip("source entry not found in feature store");
            continue;
        }
        auto tit = by_speaker.find(item.target_speaker);
        if (tit == by_speaker.end()) {
            skip("target speaker has no features in store");
            continue;
        }
        // the donor's label bits come from its first non-augmented entry
        size_t donor_idx = tit->second.front();
        for (size_t i : tit->second)
            if (!store.entries[i].augmented) {
                donor_idx = i;
                break;
            }
        try {
            std::vector<FeatureSequence> donor_feats;
            for (size_t i : tit->second) donor_feats.push_back(store.features[i]);
            FramePool pool = build_pool(donor_feats, item.target_speaker, pool_cap_s);
            FeatureSequence converted = knn_convert(store.features[sit->second], pool, k);
            const fs::path out_path = fs::path(out_dir) / (item.output_id + ".smlcfeat");
            save_feature_file(out_path.string(), converted);

            ManifestEntry e;
            e.id = item.output_id;
            e.source = fs::absolute(out_path).string();
            e.split = Split::train;
            e.speaker_id = item.target_speaker;
            e.label = store.entries[donor_idx].label;
            e.augmented = true;
            result.fragment.push_back(std::move(e));
        } catch (const std::exception& ex) {
            skip(ex.what());
        }
    }

    std::ofstream rep(fs::path(out_dir) / "skip_report.txt");
    if (!rep) throw IoError("cannot write skip report in " + out_dir);
    for (const auto& line : result.skipped) rep << line << "\n";
    return result;
}

} // namespace smlc
