#pragma once

#include <string>
#include <vector>

#include "smlc/features.hpp"
#include "smlc/manifest.hpp"

namespace smlc {

// Manifest entries with their loaded feature sequences, parallel arrays.
struct Dataset {
    std::vector<ManifestEntry> entries;
    std::vector<FeatureSequence> features;

    size_t size() const { return entries.size(); }
};

// Features for one manifest source: .wav runs through the default log-mel
// front end, .smlcfeat loads as-is. Anything else is a FormatError.
FeatureSequence load_source_features(const std::string& path);

// Loads every non-excluded entry of the given split. Relative source paths
// resolve against the manifest's directory. Augmented rows can be dropped to
// train an un-augmented baseline from the same manifest.
Dataset load_dataset(const std::string& manifest_path, Split split,
                     bool include_augmented = true);

// B x K multi-hot float targets in canonical label order.
MatrixF targets_of(const std::vector<ManifestEntry>& entries);

} // namespace smlc
