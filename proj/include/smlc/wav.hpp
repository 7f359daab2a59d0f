#pragma once

#include <string>
#include <vector>

namespace smlc {

struct Waveform {
    std::vector<float> samples; // amplitudes in [-1, 1]
    int sample_rate = 16000;

    double duration_s() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

// Reads a RIFF/WAVE file. Only PCM 16-bit little-endian mono is accepted;
// samples are normalized to [-1, 1) by division by 32768. Chunks are scanned,
// so extra metadata chunks before "data" are fine.
// Throws FormatError on malformed or unsupported files.
Waveform load_wav(const std::string& path);

// Writes PCM 16-bit mono. Samples are scaled by 32768, rounded and clamped.
void save_wav(const std::string& path, const Waveform& w);

} // namespace smlc
