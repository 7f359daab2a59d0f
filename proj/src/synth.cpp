#include "smlc/synth.hpp"

#include <cmath>
#include <filesystem>

#include "smlc/errors.hpp"
#include "smlc/rng.hpp"

namespace fs = std::filesystem;

namespace smlc {

namespace {

constexpr int kSampleRate = 16000;
constexpr double kAmDepth = 0.5;
constexpr double kBaseRms = 0.15;
constexpr double kJitterFrac = 0.02;
constexpr double kNoiseSnrDb = 10.0;
constexpr int kMaxHarmonics = 64;

double rms(const std::vector<float>& x) {
    double acc = 0.0;
    for (float v : x) acc += static_cast<double>(v) * v;
    return std::sqrt(acc / std::max<size_t>(1, x.size()));
}

} // namespace

std::pair<Waveform, LabelVector> synth_sample(const StyleSpec& spec, double duration_s,
                                              uint64_t seed) {
    if (duration_s <= 0.0) throw ConfigError("synth_sample: duration must be positive");

    Rng rng(substream_seed(seed, "synth-sample"));

    const bool female = spec.gender == StyleSpec::Gender::female;
    const double f0 = female ? rng.uniform(200.0, 260.0) : rng.uniform(100.0, 140.0);
    const double am_rate = spec.age == StyleSpec::Age::adult ? 3.0 : 6.0;
    const double tilt_db = spec.tone == StyleSpec::Tone::dark ? -9.0 : -3.0;
    const bool rough = spec.texture == StyleSpec::Texture::rough;

    const size_t n = static_cast<size_t>(std::lround(duration_s * kSampleRate));
    Waveform w;
    w.sample_rate = kSampleRate;
    w.samples.resize(n);

    // Harmonic stack below 7600 Hz; amplitude of harmonic h follows the tilt:
    // gain(h) = tilt_db * log2(h) dB relative to the fundamental.
    const int n_harm = std::min(kMaxHarmonics, static_cast<int>(7600.0 / f0));
    std::vector<double> amp(static_cast<size_t>(n_harm));
    std::vector<double> phase(static_cast<size_t>(n_harm));
    for (int h = 1; h <= n_harm; ++h) {
        amp[h - 1] = std::pow(10.0, tilt_db * std::log2(static_cast<double>(h)) / 20.0);
        phase[h - 1] = rng.uniform(0.0, 2.0 * M_PI);
    }

    // Phase-coherent synthesis; rough redraws a +-2% jitter factor each period.
    double fundamental_phase = 0.0;
    double jitter_mult = rough ? 1.0 + kJitterFrac * rng.uniform(-1.0, 1.0) : 1.0;
    for (size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int h = 1; h <= n_harm; ++h)
            s += amp[h - 1] * std::sin(static_cast<double>(h) * fundamental_phase + phase[h - 1]);
        w.samples[i] = static_cast<float>(s);
        fundamental_phase += 2.0 * M_PI * f0 * jitter_mult / kSampleRate;
        if (fundamental_phase >= 2.0 * M_PI) {
            fundamental_phase -= 2.0 * M_PI;
            if (rough) jitter_mult = 1.0 + kJitterFrac * rng.uniform(-1.0, 1.0);
        }
    }

    // Normalize the carrier, then apply the age amplitude modulation.
    const double carrier_rms = rms(w.samples);
    const double gain = carrier_rms > 0.0 ? kBaseRms / carrier_rms : 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double am = 1.0 + kAmDepth * std::sin(2.0 * M_PI * am_rate * t);
        w.samples[i] = static_cast<float>(w.samples[i] * gain * am);
    }

    if (rough) {
        double sig_power = 0.0;
        for (float v : w.samples) sig_power += static_cast<double>(v) * v;
        sig_power /= static_cast<double>(n);
        const double noise_sigma = std::sqrt(sig_power / std::pow(10.0, kNoiseSnrDb / 10.0));
        for (size_t i = 0; i < n; ++i)
            w.samples[i] += static_cast<float>(rng.normal(0.0, noise_sigma));
    }

    // Keep headroom for 16-bit quantization.
    float peak = 0.0f;
    for (float v : w.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.95f)
        for (float& v : w.samples) v *= 0.95f / peak;

    return {std::move(w), spec.to_labels()};
}

std::string synth_corpus(const SynthCorpusConfig& cfg, const std::string& out_dir) {
    if (cfg.n_per_combination < 1)
        throw ConfigError("synth_corpus: n_per_combination must be >= 1");
    for (const auto& [k, frac] : cfg.imbalance) {
        if (k >= kNumLabels) throw ConfigError("synth_corpus: imbalance label index out of range");
        if (frac <= 0.0 || frac > 1.0)
            throw ConfigError("synth_corpus: imbalance fraction must be in (0, 1]");
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    std::vector<ManifestEntry> entries;
    const auto combos = StyleSpec::all_combinations();
    for (const auto& spec : combos) {
        const LabelVector lv = spec.to_labels();
        double keep = 1.0;
        for (const auto& [k, frac] : cfg.imbalance)
            if (lv.labels[k]) keep = std::min(keep, frac);
        const size_t n_train = std::max<size_t>(
            1, static_cast<size_t>(std::lround(static_cast<double>(cfg.n_per_combination) * keep)));

        const size_t total = n_train + cfg.eval_per_combination;
        for (size_t i = 0; i < total; ++i) {
            const bool is_eval = i >= n_train;
            const std::string stem = spec.tag() + "_" + (is_eval ? "e" : "t") +
                                     std::to_string(is_eval ? i - n_train : i);
            const uint64_t sample_seed = substream_seed(cfg.seed, "synth/" + stem);
            auto [wav, labels] = synth_sample(spec, cfg.duration_s, sample_seed);

            const std::string wav_path = (fs::path(out_dir) / (stem + ".wav")).string();
            save_wav(wav_path, wav);

            ManifestEntry e;
            e.id = stem;
            e.source = stem + ".wav"; // relative to the manifest directory
            e.split = is_eval ? Split::eval : Split::train;
            e.speaker_id = "spk-" + stem;
            e.label = labels;
            entries.push_back(std::move(e));
        }
    }

    const std::string manifest_path = (fs::path(out_dir) / "manifest.tsv").string();
    write_manifest(manifest_path, entries);
    return manifest_path;
}

} // namespace smlc
