#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace smlc {

// Canonical label order used by every manifest, model head and report.
constexpr size_t kNumLabels = 8;
constexpr int kDefaultAnnotators = 8;

enum Label : size_t {
    kFemale = 0,
    kMale = 1,
    kAdult = 2,
    kTeenager = 3,
    kDark = 4,
    kBright = 5,
    kRough = 6,
    kSmooth = 7,
};

const std::array<std::string, kNumLabels>& label_names();

// Case-sensitive lookup of a canonical label name; returns kNumLabels if unknown.
size_t label_index(const std::string& name);

// Multi-hot target plus per-label annotator vote counts.
struct LabelVector {
    std::array<uint8_t, kNumLabels> labels{};  // each 0 or 1
    std::array<uint8_t, kNumLabels> votes{};   // each in [0, n_annotators]
    int n_annotators = kDefaultAnnotators;

    bool operator==(const LabelVector&) const = default;
};

// One choice per perceptual axis; expands to a LabelVector with exactly four
// ones and full annotator agreement.
struct StyleSpec {
    enum class Gender { female, male } gender = Gender::female;
    enum class Age { adult, teenager } age = Age::adult;
    enum class Tone { dark, bright } tone = Tone::dark;
    enum class Texture { rough, smooth } texture = Texture::smooth;

    LabelVector to_labels(int n_annotators = kDefaultAnnotators) const;
    std::string tag() const; // e.g. "female-adult-dark-smooth"

    // All 16 combinations in a fixed enumeration order.
    static std::array<StyleSpec, 16> all_combinations();
};

} // namespace smlc
