#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "smlc/errors.hpp"
#include "smlc/labels.hpp"
#include "smlc/manifest.hpp"
#include "smlc/mel.hpp"
#include "smlc/rng.hpp"
#include "smlc/synth.hpp"
#include "smlc/wav.hpp"

using namespace smlc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& leaf) {
    fs::path d = fs::temp_directory_path() / "smlc_test_corpus" / leaf;
    fs::create_directories(d);
    return d;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ManifestEntry make_entry(const std::string& id, std::initializer_list<size_t> positives,
                         uint8_t votes = 8) {
    ManifestEntry e;
    e.id = id;
    e.source = id + ".wav";
    e.speaker_id = "spk-" + id;
    for (size_t k : positives) {
        e.label.labels[k] = 1;
        e.label.votes[k] = votes;
    }
    return e;
}

// Autocorrelation pitch estimate; the oracle deliberately shares no code with
// the synthesizer. Takes the first local maximum within 80% of the global
// peak: an integer multiple of a non-integer period can align with the sample
// grid better than the period itself, leaving the global argmax an octave low.
double estimate_f0(const Waveform& w) {
    const size_t start = w.samples.size() / 4;
    const size_t len = std::min<size_t>(4096, w.samples.size() - start);
    const int min_lag = w.sample_rate / 300; // 300 Hz ceiling
    const int max_lag = w.sample_rate / 80;  // 80 Hz floor

    std::vector<double> r(static_cast<size_t>(max_lag) + 2, 0.0);
    for (int lag = min_lag; lag <= max_lag + 1; ++lag) {
        double acc = 0.0;
        for (size_t i = start; i + static_cast<size_t>(lag) < start + len; ++i)
            acc += static_cast<double>(w.samples[i]) * w.samples[i + static_cast<size_t>(lag)];
        r[static_cast<size_t>(lag)] = acc;
    }
    double peak = 0.0;
    for (int lag = min_lag; lag <= max_lag; ++lag)
        peak = std::max(peak, r[static_cast<size_t>(lag)]);

    int best = max_lag;
    for (int lag = min_lag + 1; lag < max_lag; ++lag)
        if (r[static_cast<size_t>(lag)] >= 0.8 * peak &&
            r[static_cast<size_t>(lag)] >= r[static_cast<size_t>(lag) - 1] &&
            r[static_cast<size_t>(lag)] >= r[static_cast<size_t>(lag) + 1]) {
            best = lag;
            break;
        }

    double refined = static_cast<double>(best);
    const double ym = r[static_cast<size_t>(best) - 1];
    const double y0 = r[static_cast<size_t>(best)];
    const double yp = r[static_cast<size_t>(best) + 1];
    const double denom = ym - 2.0 * y0 + yp;
    if (best > min_lag && best < max_lag && std::fabs(denom) > 1e-12)
        refined += 0.5 * (ym - yp) / denom;
    return static_cast<double>(w.sample_rate) / refined;
}

// Hann-windowed 4096-point power spectrum of the middle of the signal.
std::vector<double> mid_power_spectrum(const Waveform& w) {
    const size_t n = 4096;
    const size_t start = (w.samples.size() - n) / 2;
    std::vector<double> re(n), im(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const double hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / n);
        re[i] = static_cast<double>(w.samples[start + i]) * hann;
    }
    fft_inplace(re, im);
    std::vector<double> power(n / 2 + 1);
    for (size_t b = 0; b <= n / 2; ++b) power[b] = re[b] * re[b] + im[b] * im[b];
    return power;
}

double spectral_flatness(const Waveform& w) {
    std::vector<double> power = mid_power_spectrum(w);
    double log_acc = 0.0, lin_acc = 0.0;
    size_t count = 0;
    for (size_t b = 1; b < power.size(); ++b) {
        const double p = std::max(power[b], 1e-20);
        log_acc += std::log(p);
        lin_acc += p;
        ++count;
    }
    return std::exp(log_acc / static_cast<double>(count)) /
           (lin_acc / static_cast<double>(count));
}

// Ratio of band energy [2 kHz, 6 kHz) over [200 Hz, 1 kHz): bright tilt keeps
// far more high-band energy than dark.
double band_energy_ratio(const Waveform& w) {
    std::vector<double> power = mid_power_spectrum(w);
    const double bin_hz = static_cast<double>(w.sample_rate) / 4096.0;
    double low = 0.0, high = 0.0;
    for (size_t b = 0; b < power.size(); ++b) {
        const double f = bin_hz * static_cast<double>(b);
        if (f >= 200.0 && f < 1000.0) low += power[b];
        if (f >= 2000.0 && f < 6000.0) high += power[b];
    }
    return high / std::max(low, 1e-20);
}

StyleSpec spec_of(bool female, bool adult, bool dark, bool rough) {
    StyleSpec s;
    s.gender = female ? StyleSpec::Gender::female : StyleSpec::Gender::male;
    s.age = adult ? StyleSpec::Age::adult : StyleSpec::Age::teenager;
    s.tone = dark ? StyleSpec::Tone::dark : StyleSpec::Tone::bright;
    s.texture = rough ? StyleSpec::Texture::rough : StyleSpec::Texture::smooth;
    return s;
}

} // namespace

TEST_CASE("labels: canonical order and lookup") {
    const auto& names = label_names();
    REQUIRE(names.size() == 8);
    CHECK(names[0] == "Female");
    CHECK(names[1] == "Male");
    CHECK(names[2] == "Adult");
    CHECK(names[3] == "Teenager");
    CHECK(names[4] == "Dark");
    CHECK(names[5] == "Bright");
    CHECK(names[6] == "Rough");
    CHECK(names[7] == "Smooth");
    for (size_t k = 0; k < kNumLabels; ++k) CHECK(label_index(names[k]) == k);
    CHECK(label_index("Senior") == kNumLabels);
    CHECK(label_index("female") == kNumLabels); // case-sensitive
}

TEST_CASE("style spec: 16 combinations, 4 ones each, full agreement") {
    const auto combos = StyleSpec::all_combinations();
    std::vector<std::string> tags;
    for (const auto& spec : combos) {
        const LabelVector lv = spec.to_labels();
        int ones = 0;
        for (size_t k = 0; k < kNumLabels; ++k) {
            ones += lv.labels[k];
            CHECK(lv.votes[k] == (lv.labels[k] ? 8 : 0));
        }
        CHECK(ones == 4);
        // Mutual exclusion within each axis.
        CHECK((lv.labels[kFemale] ^ lv.labels[kMale]) == 1);
        CHECK((lv.labels[kAdult] ^ lv.labels[kTeenager]) == 1);
        CHECK((lv.labels[kDark] ^ lv.labels[kBright]) == 1);
        CHECK((lv.labels[kRough] ^ lv.labels[kSmooth]) == 1);
        tags.push_back(spec.tag());
    }
    std::sort(tags.begin(), tags.end());
    CHECK(std::unique(tags.begin(), tags.end()) == tags.end()); // all distinct
}

TEST_CASE("manifest: empty file parses to an empty list") {
    fs::path p = temp_dir("parse") / "empty.tsv";
    std::ofstream(p) << manifest_header() << "\n";
    CHECK(parse_manifest(p.string()).empty());

    fs::path p2 = temp_dir("parse") / "really_empty.tsv";
    std::ofstream(p2).flush();
    CHECK(parse_manifest(p2.string()).empty());
}

TEST_CASE("manifest: one valid line round-trips as written") {
    ManifestEntry e = make_entry("utt-1", {kFemale, kAdult, kBright, kSmooth});
    e.split = Split::eval;
    e.label.votes[kBright] = 5;

    fs::path p = temp_dir("parse") / "one.tsv";
    write_manifest(p.string(), {e});
    auto parsed = parse_manifest(p.string());
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0] == e);
}

TEST_CASE("manifest: flags column round-trips excluded and augmented") {
    ManifestEntry plain = make_entry("a", {kMale, kAdult, kDark, kRough});
    ManifestEntry excl = make_entry("b", {kFemale, kAdult, kDark, kRough});
    excl.excluded = true;
    ManifestEntry aug = make_entry("c", {kFemale, kTeenager, kBright, kSmooth});
    aug.augmented = true;

    fs::path p = temp_dir("parse") / "flags.tsv";
    write_manifest(p.string(), {plain, excl, aug});
    auto parsed = parse_manifest(p.string());
    REQUIRE(parsed.size() == 3);
    CHECK(parsed[0] == plain);
    CHECK(parsed[1] == excl);
    CHECK(parsed[2] == aug);

    const std::string text = read_text(p);
    CHECK(text.find("\texcluded") != std::string::npos);
    CHECK(text.find("\taugmented") != std::string::npos);
}

TEST_CASE("manifest: duplicate id is a validation error naming the id") {
    ManifestEntry a = make_entry("u1", {kFemale, kAdult, kDark, kSmooth});
    ManifestEntry b = make_entry("u1", {kMale, kAdult, kDark, kSmooth});
    b.source = "other.wav";
    b.speaker_id = "spk-other";

    fs::path p = temp_dir("parse") / "dup.tsv";
    std::ofstream out(p);
    out << manifest_header() << "\n"
        << format_manifest_line(a) << "\n"
        << format_manifest_line(b) << "\n";
    out.close();

    try {
        parse_manifest(p.string());
        FAIL("expected ValidationError");
    } catch (const ValidationError& ex) {
        CHECK(std::string(ex.what()).find("u1") != std::string::npos);
    }
}

TEST_CASE("manifest: malformed line reports its line number") {
    ManifestEntry a = make_entry("ok", {kFemale, kAdult, kDark, kSmooth});
    fs::path p = temp_dir("parse") / "malformed.tsv";
    std::ofstream out(p);
    out << manifest_header() << "\n"
        << format_manifest_line(a) << "\n"
        << "not\tenough\tfields\n";
    out.close();

    try {
        parse_manifest(p.string());
        FAIL("expected FormatError");
    } catch (const FormatError& ex) {
        CHECK(std::string(ex.what()).find("3") != std::string::npos); // 1-based line
    }

    SUBCASE("non-binary label bit") {
        ManifestEntry bad = make_entry("z", {kFemale, kAdult, kDark, kSmooth});
        std::string line = format_manifest_line(bad);
        const size_t pos = line.find("\t1\t");
        REQUIRE(pos != std::string::npos);
        line[pos + 1] = '7';
        fs::path bp = temp_dir("parse") / "badbit.tsv";
        std::ofstream(bp) << manifest_header() << "\n" << line << "\n";
        CHECK_THROWS_AS(parse_manifest(bp.string()), FormatError);
    }
}

TEST_CASE("normalize_labels: senior folds into Adult") {
    RawEntry raw;
    raw.id = "r1";
    raw.source = "r1.wav";
    raw.speaker_id = "s1";
    raw.categories = {{"female", 8}, {"senior", 6}, {"dark", 7}, {"smooth", 8}};
    ManifestEntry e = normalize_labels(raw);
    CHECK(e.label.labels[kAdult] == 1);
    CHECK(e.label.labels[kTeenager] == 0);
    CHECK(e.label.votes[kAdult] == 6);
    CHECK_FALSE(e.excluded);

    SUBCASE("adult plus senior votes add and cap at n_annotators") {
        raw.categories = {{"female", 8}, {"adult", 5}, {"senior", 6}, {"dark", 7}, {"smooth", 8}};
        ManifestEntry m = normalize_labels(raw);
        CHECK(m.label.labels[kAdult] == 1);
        CHECK(m.label.votes[kAdult] == 8); // 5 + 6 capped at 8
    }
}

TEST_CASE("normalize_labels: ambiguous gender marks the entry excluded") {
    RawEntry raw;
    raw.id = "r2";
    raw.source = "r2.wav";
    raw.speaker_id = "s2";
    raw.categories = {{"ambiguous", 6}, {"adult", 8}, {"bright", 8}, {"smooth", 8}};
    ManifestEntry e = normalize_labels(raw);
    CHECK(e.excluded);
    CHECK(e.label.labels[kFemale] == 0);
    CHECK(e.label.labels[kMale] == 0);
}

TEST_CASE("normalize_labels: plain categories pass through unchanged") {
    RawEntry raw;
    raw.id = "r3";
    raw.source = "r3.wav";
    raw.speaker_id = "s3";
    raw.categories = {{"female", 7}, {"adult", 8}, {"bright", 6}, {"smooth", 5}};
    ManifestEntry e = normalize_labels(raw);
    CHECK(e.label.labels[kFemale] == 1);
    CHECK(e.label.votes[kFemale] == 7);
    CHECK(e.label.labels[kAdult] == 1);
    CHECK(e.label.votes[kAdult] == 8);
    CHECK(e.label.labels[kBright] == 1);
    CHECK(e.label.votes[kBright] == 6);
    CHECK(e.label.labels[kSmooth] == 1);
    CHECK(e.label.votes[kSmooth] == 5);
    CHECK(e.label.labels[kMale] == 0);
    CHECK_FALSE(e.excluded);
}

TEST_CASE("normalize_labels: unknown category is a validation error") {
    RawEntry raw;
    raw.id = "r4";
    raw.source = "r4.wav";
    raw.speaker_id = "s4";
    raw.categories = {{"female", 8}, {"melodic", 4}};
    CHECK_THROWS_AS(normalize_labels(raw), ValidationError);
}

TEST_CASE("filter_by_agreement: threshold semantics") {
    std::vector<ManifestEntry> entries;
    entries.push_back(make_entry("all8", {kFemale, kAdult, kDark, kSmooth}, 8));
    ManifestEntry weak = make_entry("weak", {kFemale, kBright}, 8);
    weak.label.votes[kBright] = 4;
    entries.push_back(weak);
    entries.push_back(make_entry("edge", {kMale, kTeenager, kBright, kRough}, 5));

    SUBCASE("min_votes = 0 returns the input unchanged") {
        CHECK(filter_by_agreement(entries, 0) == entries);
    }
    SUBCASE("a single under-threshold positive drops the entry") {
        auto kept = filter_by_agreement(entries, 5);
        REQUIRE(kept.size() == 2);
        CHECK(kept[0].id == "all8");
        CHECK(kept[1].id == "edge"); // votes exactly 5 survive min_votes 5
    }
    SUBCASE("composition collapses to the max threshold") {
        for (int a = 0; a <= 8; ++a)
            for (int b = 0; b <= 8; ++b) {
                auto composed = filter_by_agreement(filter_by_agreement(entries, a), b);
                auto direct = filter_by_agreement(entries, std::max(a, b));
                CHECK(composed == direct);
            }
    }
}

TEST_CASE("agreement_ratio: exact fractions") {
    SUBCASE("all positives at 8 votes gives 1.00") {
        std::vector<ManifestEntry> entries;
        for (int i = 0; i < 12; ++i)
            entries.push_back(make_entry("e" + std::to_string(i),
                                         {kFemale, kAdult, kDark, kSmooth}, 8));
        CHECK(agreement_ratio(entries, kFemale, 5) == 1.0);
    }
    SUBCASE("28 of 100 rough positives at threshold gives exactly 0.28") {
        std::vector<ManifestEntry> entries;
        for (int i = 0; i < 100; ++i) {
            ManifestEntry e = make_entry("e" + std::to_string(i),
                                         {kMale, kAdult, kDark, kRough}, 8);
            e.label.votes[kRough] = static_cast<uint8_t>(i < 28 ? 5 : 4);
            entries.push_back(e);
        }
        CHECK(agreement_ratio(entries, kRough, 5) == 0.28);
    }
    SUBCASE("min_votes = 0 gives 1.00") {
        std::vector<ManifestEntry> entries = {make_entry("a", {kDark}, 2)};
        CHECK(agreement_ratio(entries, kDark, 0) == 1.0);
    }
    SUBCASE("no positive entries is an error") {
        std::vector<ManifestEntry> entries = {make_entry("a", {kDark}, 8)};
        CHECK_THROWS_AS(agreement_ratio(entries, kBright, 5), ValidationError);
    }
    SUBCASE("monotone non-increasing in min_votes") {
        Rng rng(44);
        std::vector<ManifestEntry> entries;
        for (int i = 0; i < 60; ++i) {
            ManifestEntry e = make_entry("e" + std::to_string(i), {kSmooth}, 8);
            e.label.votes[kSmooth] = static_cast<uint8_t>(1 + rng.below(8));
            entries.push_back(e);
        }
        double prev = 2.0;
        for (int v = 0; v <= 8; ++v) {
            const double r = agreement_ratio(entries, kSmooth, v);
            CHECK(r <= prev);
            prev = r;
        }
    }
}

TEST_CASE("synth_sample: male-adult-dark-smooth at seed 7 has f0 in [100, 140]") {
    auto [w, lv] = synth_sample(spec_of(false, true, true, false), 5.0, 7);
    CHECK(w.sample_rate == 16000);
    CHECK(w.samples.size() == 80000);
    const double f0 = estimate_f0(w);
    CHECK(f0 >= 100.0);
    CHECK(f0 <= 140.0);
    CHECK(lv.labels[kMale] == 1);
    CHECK(lv.labels[kAdult] == 1);
    CHECK(lv.labels[kDark] == 1);
    CHECK(lv.labels[kSmooth] == 1);
    CHECK(lv.labels[kFemale] == 0);
    for (size_t k = 0; k < kNumLabels; ++k)
        CHECK(lv.votes[k] == (lv.labels[k] ? 8 : 0));
}

TEST_CASE("synth_sample: same spec and seed is bit-identical") {
    const StyleSpec spec = spec_of(true, false, false, true);
    auto [w1, l1] = synth_sample(spec, 2.0, 1234);
    auto [w2, l2] = synth_sample(spec, 2.0, 1234);
    CHECK(w1.samples == w2.samples);
    CHECK(l1 == l2);

    auto [w3, l3] = synth_sample(spec, 2.0, 1235);
    CHECK(w1.samples != w3.samples);
}

TEST_CASE("synth_sample: rough has strictly higher spectral flatness than smooth") {
    for (uint64_t seed : {3u, 8u, 21u, 77u}) {
        auto [rough_w, r1] = synth_sample(spec_of(true, true, true, true), 2.0, seed);
        auto [smooth_w, r2] = synth_sample(spec_of(true, true, true, false), 2.0, seed);
        CHECK(spectral_flatness(rough_w) > spectral_flatness(smooth_w));
    }
}

TEST_CASE("synth_sample: pitch oracle recovers gender on 200 samples") {
    Rng picker(202);
    int correct = 0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
        const bool female = picker.below(2) == 0;
        const StyleSpec spec = spec_of(female, picker.below(2) == 0, picker.below(2) == 0,
                                       picker.below(2) == 0);
        auto [w, lv] = synth_sample(spec, 1.0, 9000 + static_cast<uint64_t>(i));
        const double f0 = estimate_f0(w);
        const bool classified_female = f0 >= 170.0;
        if (classified_female == female) ++correct;
    }
    CHECK(correct == n); // 100% accuracy required
}

TEST_CASE("synth_sample: tilt oracle recovers tone on 200 samples") {
    Rng picker(303);
    int correct = 0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
        const bool dark = picker.below(2) == 0;
        const StyleSpec spec = spec_of(picker.below(2) == 0, picker.below(2) == 0, dark,
                                       picker.below(2) == 0);
        auto [w, lv] = synth_sample(spec, 1.0, 5000 + static_cast<uint64_t>(i));
        const bool classified_dark = band_energy_ratio(w) < 0.48;
        if (classified_dark == dark) ++correct;
    }
    CHECK(static_cast<double>(correct) / n >= 0.95);
}

TEST_CASE("synth_corpus: n=2 writes 32 files and 32 manifest lines") {
    fs::path dir = temp_dir("corpus_n2");
    SynthCorpusConfig cfg;
    cfg.n_per_combination = 2;
    cfg.duration_s = 0.5;
    cfg.seed = 11;
    const std::string manifest = synth_corpus(cfg, dir.string());

    auto entries = parse_manifest(manifest);
    CHECK(entries.size() == 32);
    size_t wavs = 0;
    for (const auto& f : fs::directory_iterator(dir))
        if (f.path().extension() == ".wav") ++wavs;
    CHECK(wavs == 32);
    for (const auto& e : entries) {
        CHECK(e.split == Split::train);
        const fs::path wav_path = dir / e.source; // sources are manifest-relative
        CHECK(fs::exists(wav_path));
        Waveform w = load_wav(wav_path.string());
        CHECK(w.samples.size() == 8000);
    }
}

TEST_CASE("synth_corpus: halving rough keeps rough at half of smooth") {
    fs::path dir = temp_dir("corpus_imb");
    SynthCorpusConfig cfg;
    cfg.n_per_combination = 2;
    cfg.duration_s = 0.25;
    cfg.seed = 5;
    cfg.imbalance[kRough] = 0.5;
    auto entries = parse_manifest(synth_corpus(cfg, dir.string()));

    size_t rough = 0, smooth = 0;
    for (const auto& e : entries) {
        rough += e.label.labels[kRough];
        smooth += e.label.labels[kSmooth];
    }
    CHECK(smooth == 16);
    CHECK(rough == 8);
}

TEST_CASE("synth_corpus: eval split samples are marked eval and never downsampled") {
    fs::path dir = temp_dir("corpus_eval");
    SynthCorpusConfig cfg;
    cfg.n_per_combination = 2;
    cfg.eval_per_combination = 1;
    cfg.duration_s = 0.25;
    cfg.seed = 6;
    cfg.imbalance[kRough] = 0.5;
    auto entries = parse_manifest(synth_corpus(cfg, dir.string()));

    size_t train = 0, eval = 0, eval_rough = 0;
    for (const auto& e : entries) {
        if (e.split == Split::train) ++train;
        else {
            ++eval;
            eval_rough += e.label.labels[kRough];
        }
    }
    CHECK(train == 24); // 8 smooth combos x 2 + 8 rough combos x 1
    CHECK(eval == 16);
    CHECK(eval_rough == 8); // imbalance leaves eval untouched
}

TEST_CASE("synth_corpus: same seed twice is byte-identical") {
    fs::path dir = temp_dir("corpus_det");
    SynthCorpusConfig cfg;
    cfg.n_per_combination = 1;
    cfg.duration_s = 0.25;
    cfg.seed = 99;

    const std::string manifest = synth_corpus(cfg, dir.string());
    const std::string first_manifest = read_text(manifest);
    auto first_entries = parse_manifest(manifest);
    REQUIRE(!first_entries.empty());
    const fs::path wav0 = dir / first_entries[0].source;
    const std::string first_wav = read_text(wav0.string());

    synth_corpus(cfg, dir.string());
    CHECK(read_text(manifest) == first_manifest);
    CHECK(read_text(wav0.string()) == first_wav);
}
