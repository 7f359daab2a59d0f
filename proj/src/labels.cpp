#include "smlc/labels.hpp"

namespace smlc {

const std::array<std::string, kNumLabels>& label_names() {
    static const std::array<std::string, kNumLabels> names = {
        "Female", "Male", "Adult", "Teenager", "Dark", "Bright", "Rough", "Smooth"};
    return names;
}

size_t label_index(const std::string& name) {
    const auto& names = label_names();
    for (size_t i = 0; i < kNumLabels; ++i)
        if (names[i] == name) return i;
    return kNumLabels;
}

LabelVector StyleSpec::to_labels(int n_annotators) const {
    LabelVector v;
    v.n_annotators = n_annotators;
    const size_t picks[4] = {
        gender == Gender::female ? kFemale : kMale,
        age == Age::adult ? kAdult : kTeenager,
        tone == Tone::dark ? kDark : kBright,
        texture == Texture::rough ? kRough : kSmooth,
    };
    for (size_t k : picks) {
        v.labels[k] = 1;
        v.votes[k] = static_cast<uint8_t>(n_annotators);
    }
    return v;
}

std::string StyleSpec::tag() const {
    std::string s;
    s += gender == Gender::female ? "female" : "male";
    s += age == Age::adult ? "-adult" : "-teenager";
    s += tone == Tone::dark ? "-dark" : "-bright";
    s += texture == Texture::rough ? "-rough" : "-smooth";
    return s;
}

std::array<StyleSpec, 16> StyleSpec::all_combinations() {
    std::array<StyleSpec, 16> out;
    size_t i = 0;
    for (int g = 0; g < 2; ++g)
        for (int a = 0; a < 2; ++a)
            for (int t = 0; t < 2; ++t)
                for (int x = 0; x < 2; ++x) {
                    StyleSpec s;
                    s.gender = g == 0 ? Gender::female : Gender::male;
                    s.age = a == 0 ? Age::adult : Age::teenager;
                    s.tone = t == 0 ? Tone::dark : Tone::bright;
                    s.texture = x == 0 ? Texture::rough : Texture::smooth;
                    out[i++] = s;
                }
    return out;
}

} // namespace smlc
