#pragma once

#include <map>
#include <string>
#include <vector>

#include "smlc/labels.hpp"
#include "smlc/manifest.hpp"
#include "smlc/wav.hpp"

namespace smlc {

// Procedural speech-like sample whose measurable properties encode the style:
//   gender  -> fundamental drawn from [200, 260] Hz (female) or [100, 140] Hz (male)
//   age     -> amplitude modulation at 3 Hz (adult) or 6 Hz (teenager)
//   tone    -> harmonic spectral tilt of -9 dB/octave (dark) or -3 dB/octave (bright)
//   texture -> rough adds 2% fundamental jitter plus noise at 10 dB SNR; smooth adds none
// Deterministic in (spec, seed).
std::pair<Waveform, LabelVector> synth_sample(const StyleSpec& spec, double duration_s,
                                              uint64_t seed);

// Per-label keep fractions in (0, 1]; a combination's sample count is scaled by
// the smallest fraction among its positive labels. Applies to the train split only.
using ImbalanceProfile = std::map<size_t, double>;

struct SynthCorpusConfig {
    size_t n_per_combination = 1;      // train samples per style combination
    size_t eval_per_combination = 0;   // held-out samples per combination, never downsampled
    double duration_s = 5.0;
    uint64_t seed = 0;
    ImbalanceProfile imbalance;
};

// Writes WAV files plus a manifest ("manifest.tsv") under out_dir; one synthetic
// speaker per file. Returns the manifest path.
std::string synth_corpus(const SynthCorpusConfig& cfg, const std::string& out_dir);

} // namespace smlc
