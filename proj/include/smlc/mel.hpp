#pragma once

#include <vector>

#include "smlc/features.hpp"
#include "smlc/linalg.hpp"
#include "smlc/wav.hpp"

namespace smlc {

// Triangular mel filterbank over FFT power-spectrum bins. Rows are nonnegative
// triangles, each peaking at its center frequency and covering a contiguous
// bin range.
struct MelFilterbank {
    MatrixD weights;  // n_mels x n_bins, n_bins = n_fft/2 + 1
    int sample_rate = 16000;
    int n_fft = 512;
    std::vector<double> center_hz; // per-row triangle peak frequency

    size_t n_mels() const { return weights.rows(); }
    size_t n_bins() const { return weights.cols(); }
};

// Slaney-scale mel points (linear below 1 kHz, logarithmic above), triangles
// normalized by 2 / bandwidth.
MelFilterbank make_mel_filterbank(int n_mels, int sample_rate, int n_fft, double fmin_hz,
                                  double fmax_hz);

// Power spectrum frames before the log: frames[t][m] = sum_bin fb[m][bin] * |STFT|^2.
// Hann window, frame zero-padded to n_fft. T = floor((len - frame)/hop) + 1.
// Throws DataError if the waveform is shorter than one frame, ConfigError on a
// sample-rate mismatch with the filterbank.
MatrixD mel_power(const Waveform& w, const MelFilterbank& fb, double frame_size_s,
                  double frame_hop_s);

// log(max(eps, mel power)) with eps = 1e-10; feature_kind = mel80.
FeatureSequence log_mel(const Waveform& w, const MelFilterbank& fb, double frame_size_s = 0.025,
                        double frame_hop_s = 0.010);

// Defaults used throughout the toolkit: 80 mels, 16 kHz, n_fft 512, 0-8000 Hz.
const MelFilterbank& default_filterbank();

constexpr double kLogMelFloor = 1e-10;
constexpr double kDefaultFrameSizeS = 0.025;
constexpr double kDefaultFrameHopS = 0.010;

// In-place iterative radix-2 FFT on interleaved complex data (re, im pairs).
// n must be a power of two. Exposed for the DSP tests.
void fft_inplace(std::vector<double>& re, std::vector<double>& im);

} // namespace smlc
