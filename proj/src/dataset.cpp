#include "smlc/dataset.hpp"

#include <filesystem>

#include "smlc/mel.hpp"
#include "smlc/wav.hpp"

namespace smlc {

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

FeatureSequence load_source_features(const std::string& path) {
    if (has_suffix(path, ".wav")) return log_mel(load_wav(path), default_filterbank());
    if (has_suffix(path, ".smlcfeat")) return load_feature_file(path);
    throw FormatError("source must be a .wav or .smlcfeat file: " + path);
}

Dataset load_dataset(const std::string& manifest_path, Split split, bool include_augmented) {
    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
    Dataset ds;
    for (ManifestEntry& e : parse_manifest(manifest_path)) {
        if (e.split != split || e.excluded) continue;
        if (!include_augmented && e.augmented) continue;
        std::filesystem::path src(e.source);
        if (src.is_relative()) src = base / src;
        try {
            ds.features.push_back(load_source_features(src.string()));
        } catch (const std::exception& ex) {
            throw DataError("entry " + e.id + ": " + ex.what());
        }
        ds.entries.push_back(std::move(e));
    }
    return ds;
}

MatrixF targets_of(const std::vector<ManifestEntry>& entries) {
    MatrixF t(entries.size(), kNumLabels);
    for (size_t i = 0; i < entries.size(); ++i)
        for (size_t k = 0; k < kNumLabels; ++k)
            t(i, k) = entries[i].label.labels[k] ? 1.0f : 0.0f;
    return t;
}

} // namespace smlc
