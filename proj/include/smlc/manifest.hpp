#pragma once

#include <string>
#include <utility>
#include <vector>

#include "smlc/labels.hpp"

namespace smlc {

enum class Split { train, eval };

std::string split_name(Split s);
Split parse_split(const std::string& s);

// One dataset record. Exclusion and augmentation are flags, not deletion, so
// reports can account for every entry.
struct ManifestEntry {
    std::string id;
    std::string source; // audio or feature file path
    Split split = Split::train;
    std::string speaker_id;
    LabelVector label;
    bool excluded = false;
    bool augmented = false;

    bool operator==(const ManifestEntry&) const = default;
};

// Tab-separated manifest, one record per line:
//   id  source  split  speaker_id  8 label bits  8 vote counts  flags
// The flags field holds "-", "excluded" or "augmented". A '#' header line
// spells out the label order.
std::vector<ManifestEntry> parse_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
std::string format_manifest_line(const ManifestEntry& e);
std::string manifest_header();

// Raw record before label normalization: category names with vote counts drawn
// from {female, male, ambiguous, adult, senior, teenager, dark, bright, rough, smooth}.
struct RawEntry {
    std::string id;
    std::string source;
    Split split = Split::train;
    std::string speaker_id;
    std::vector<std::pair<std::string, int>> categories; // (name, votes)
    int n_annotators = kDefaultAnnotators;
};

// Applies the label-processing rules: "senior" votes fold into Adult (votes
// added, capped at n_annotators; label OR-ed) and a gender of "ambiguous"
// marks the entry excluded. Unknown categories raise ValidationError.
ManifestEntry normalize_labels(const RawEntry& raw);

// Keeps entries whose every positive label has votes >= min_votes; order preserved.
std::vector<ManifestEntry> filter_by_agreement(const std::vector<ManifestEntry>& entries,
                                               int min_votes);

// Fraction of label-k-positive entries whose votes[k] >= min_votes.
// Throws ValidationError when no entry is positive for the label.
double agreement_ratio(const std::vector<ManifestEntry>& entries, size_t label_index,
                       int min_votes);

} // namespace smlc
