#include "smlc/manifest.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "smlc/errors.hpp"

namespace smlc {

std::string split_name(Split s) { return s == Split::train ? "train" : "eval"; }

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "eval") return Split::eval;
    throw ValidationError("unknown split: " + s);
}

std::string manifest_header() {
    std::string h = "# id\tsource\tsplit\tspeaker_id";
    for (const auto& n : label_names()) h += "\t" + n;
    for (const auto& n : label_names()) h += "\tvotes:" + n;
    h += "\tflags";
    return h;
}

std::string format_manifest_line(const ManifestEntry& e) {
    std::ostringstream os;
    os << e.id << '\t' << e.source << '\t' << split_name(e.split) << '\t' << e.speaker_id;
    for (size_t k = 0; k < kNumLabels; ++k) os << '\t' << static_cast<int>(e.label.labels[k]);
    for (size_t k = 0; k < kNumLabels; ++k) os << '\t' << static_cast<int>(e.label.votes[k]);
    os << '\t' << (e.excluded ? "excluded" : (e.augmented ? "augmented" : "-"));
    return os.str();
}

std::vector<ManifestEntry> parse_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);

    std::vector<ManifestEntry> entries;
    std::unordered_set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        const size_t expected = 4 + kNumLabels * 2 + 1;
        if (fields.size() != expected)
            throw FormatError("manifest line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(expected) + " fields, got " +
                                  std::to_string(fields.size()));

        ManifestEntry e;
        e.id = fields[0];
        e.source = fields[1];
        e.speaker_id = fields[3];
        try {
            e.split = parse_split(fields[2]);
            for (size_t k = 0; k < kNumLabels; ++k) {
                const int bit = std::stoi(fields[4 + k]);
                if (bit != 0 && bit != 1) throw ValidationError("label bit not binary");
                e.label.labels[k] = static_cast<uint8_t>(bit);
                const int votes = std::stoi(fields[4 + kNumLabels + k]);
                if (votes < 0 || votes > e.label.n_annotators)
                    throw ValidationError("vote count out of range");
                e.label.votes[k] = static_cast<uint8_t>(votes);
            }
        } catch (const std::exception& ex) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": " + ex.what());
        }
        const std::string& flags = fields.back();
        if (flags == "excluded")
            e.excluded = true;
        else if (flags == "augmented")
            e.augmented = true;
        else if (flags != "-")
            throw FormatError("manifest line " + std::to_string(line_no) +
                               ": unknown flags value '" + flags + "'");

        if (e.id.empty() || e.source.empty())
            throw FormatError("manifest line " + std::to_string(line_no) +
                               ": empty id or source");
        if (!seen.insert(e.id).second)
            throw ValidationError("duplicate manifest id \"" + e.id + "\" at line " +
                                  std::to_string(line_no));
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open manifest for writing: " + path);
    out << manifest_header() << '\n';
    for (const auto& e : entries) out << format_manifest_line(e) << '\n';
    if (!out) throw IoError("manifest write failed: " + path);
}

ManifestEntry normalize_labels(const RawEntry& raw) {
    ManifestEntry e;
    e.id = raw.id;
    e.source = raw.source;
    e.split = raw.split;
    e.speaker_id = raw.speaker_id;
    e.label.n_annotators = raw.n_annotators;

    for (const auto& [name, votes] : raw.categories) {
        if (votes < 0 || votes > raw.n_annotators)
            throw ValidationError("vote count out of range for category " + name);
        size_t k = kNumLabels;
        if (name == "female") k = kFemale;
        else if (name == "male") k = kMale;
        else if (name == "adult" || name == "senior") k = kAdult; // merged categories
        else if (name == "teenager") k = kTeenager;
        else if (name == "dark") k = kDark;
        else if (name == "bright") k = kBright;
        else if (name == "rough") k = kRough;
        else if (name == "smooth") k = kSmooth;
        else if (name == "ambiguous") {
            e.excluded = true;
            continue;
        } else {
            throw ValidationError("unknown category \"" + name + "\" in entry " + raw.id);
        }
        const int merged = std::min(raw.n_annotators, static_cast<int>(e.label.votes[k]) + votes);
        e.label.votes[k] = static_cast<uint8_t>(merged);
        e.label.labels[k] |= votes > 0 ? 1 : 0;
    }
    return e;
}

std::vector<ManifestEntry> filter_by_agreement(const std::vector<ManifestEntry>& entries,
                                               int min_votes) {
    std::vector<ManifestEntry> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        bool keep = true;
        for (size_t k = 0; k < kNumLabels; ++k)
            if (e.label.labels[k] && static_cast<int>(e.label.votes[k]) < min_votes) {
                keep = false;
                break;
            }
        if (keep) out.push_back(e);
    }
    return out;
}

double agreement_ratio(const std::vector<ManifestEntry>& entries, size_t label_index,
                       int min_votes) {
    if (label_index >= kNumLabels) throw ValidationError("label index out of range");
    size_t positive = 0, agreeing = 0;
    for (const auto& e : entries)
        if (e.label.labels[label_index]) {
            ++positive;
            if (static_cast<int>(e.label.votes[label_index]) >= min_votes) ++agreeing;
        }
    if (positive == 0)
        throw ValidationError("agreement_ratio undefined: no entries positive for " +
                              label_names()[label_index]);
    return static_cast<double>(agreeing) / static_cast<double>(positive);
}

} // namespace smlc
