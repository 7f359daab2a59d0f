#include "smlc/mel.hpp"

#include <cmath>

#include "smlc/errors.hpp"

namespace smlc {

namespace {

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (hz < min_log_hz) return hz / f_sp;
    return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (mel < min_log_mel) return mel * f_sp;
    return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

} // namespace

void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
    const size_t n = re.size();
    if (n == 0 || (n & (n - 1)) != 0 || im.size() != n)
        throw ConfigError("fft_inplace: size must be a power of two");

    // bit reversal
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (size_t i = 0; i < n; i += len) {
            double cur_r = 1.0, cur_i = 0.0;
            for (size_t k = 0; k < len / 2; ++k) {
                const size_t a = i + k, b = i + k + len / 2;
                const double tr = re[b] * cur_r - im[b] * cur_i;
                const double ti = re[b] * cur_i + im[b] * cur_r;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                const double nr = cur_r * wr - cur_i * wi;
                cur_i = cur_r * wi + cur_i * wr;
                cur_r = nr;
            }
        }
    }
}

MelFilterbank make_mel_filterbank(int n_mels, int sample_rate, int n_fft, double fmin_hz,
                                  double fmax_hz) {
    if (n_mels < 1 || sample_rate <= 0 || n_fft < 2 || fmax_hz <= fmin_hz)
        throw ConfigError("make_mel_filterbank: invalid parameters");

    MelFilterbank fb;
    fb.sample_rate = sample_rate;
    fb.n_fft = n_fft;
    const size_t n_bins = static_cast<size_t>(n_fft) / 2 + 1;
    fb.weights = MatrixD(static_cast<size_t>(n_mels), n_bins);
    fb.center_hz.resize(static_cast<size_t>(n_mels));

    const double mel_min = hz_to_mel(fmin_hz);
    const double mel_max = hz_to_mel(fmax_hz);
    std::vector<double> hz_pts(static_cast<size_t>(n_mels) + 2);
    for (size_t i = 0; i < hz_pts.size(); ++i) {
        const double mel = mel_min + (mel_max - mel_min) * static_cast<double>(i) /
                                         static_cast<double>(n_mels + 1);
        hz_pts[i] = mel_to_hz(mel);
    }

    const double bin_hz = static_cast<double>(sample_rate) / n_fft;
    for (int m = 0; m < n_mels; ++m) {
        const double lo = hz_pts[m], center = hz_pts[m + 1], hi = hz_pts[m + 2];
        fb.center_hz[m] = center;
        const double norm = 2.0 / (hi - lo); // Slaney bandwidth normalization
        for (size_t b = 0; b < n_bins; ++b) {
            const double f = bin_hz * static_cast<double>(b);
            double wgt = 0.0;
            if (f > lo && f < hi)
                wgt = (f <= center) ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
            fb.weights(static_cast<size_t>(m), b) = wgt * norm;
        }
    }
    return fb;
}

MatrixD mel_power(const Waveform& w, const MelFilterbank& fb, double frame_size_s,
                  double frame_hop_s) {
    if (w.sample_rate != fb.sample_rate)
        throw ConfigError("mel_power: waveform rate " + std::to_string(w.sample_rate) +
                          " != filterbank rate " + std::to_string(fb.sample_rate));
    const size_t frame = static_cast<size_t>(std::lround(frame_size_s * w.sample_rate));
    const size_t hop = static_cast<size_t>(std::lround(frame_hop_s * w.sample_rate));
    if (frame == 0 || hop == 0) throw ConfigError("mel_power: frame/hop too small");
    if (static_cast<size_t>(fb.n_fft) < frame)
        throw ConfigError("mel_power: n_fft smaller than frame size");
    if (w.samples.size() < frame)
        throw DataError("mel_power: waveform shorter than one frame");

    const size_t t_frames = (w.samples.size() - frame) / hop + 1;
    const size_t n_fft = static_cast<size_t>(fb.n_fft);
    const size_t n_bins = n_fft / 2 + 1;
    const size_t n_mels = fb.n_mels();

    // periodic Hann
    std::vector<double> window(frame);
    for (size_t i = 0; i < frame; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / frame);

    // Sparse view of the triangles: each row covers a contiguous bin range.
    std::vector<size_t> row_begin(n_mels), row_end(n_mels);
    for (size_t m = 0; m < n_mels; ++m) {
        size_t b0 = n_bins, b1 = 0;
        for (size_t b = 0; b < n_bins; ++b)
            if (fb.weights(m, b) > 0.0) {
                if (b < b0) b0 = b;
                b1 = b + 1;
            }
        row_begin[m] = b0 == n_bins ? 0 : b0;
        row_end[m] = b1;
    }

    MatrixD out(t_frames, n_mels);
#pragma omp parallel for schedule(static)
    for (long long ti = 0; ti < static_cast<long long>(t_frames); ++ti) {
        const size_t t = static_cast<size_t>(ti);
        std::vector<double> re(n_fft, 0.0), im(n_fft, 0.0);
        const float* src = w.samples.data() + t * hop;
        for (size_t i = 0; i < frame; ++i) re[i] = static_cast<double>(src[i]) * window[i];
        fft_inplace(re, im);
        std::vector<double> power(n_bins);
        for (size_t b = 0; b < n_bins; ++b) power[b] = re[b] * re[b] + im[b] * im[b];
        double* orow = out.row(t);
        for (size_t m = 0; m < n_mels; ++m) {
            double acc = 0.0;
            const double* wrow = fb.weights.row(m);
            for (size_t b = row_begin[m]; b < row_end[m]; ++b) acc += wrow[b] * power[b];
            orow[m] = acc;
        }
    }
    return out;
}

FeatureSequence log_mel(const Waveform& w, const MelFilterbank& fb, double frame_size_s,
                        double frame_hop_s) {
    const MatrixD power = mel_power(w, fb, frame_size_s, frame_hop_s);
    FeatureSequence f;
    f.frame_hop_s = frame_hop_s;
    // feature_kind mel80 promises D = 80; odd-size banks land as "external"
    f.kind = fb.n_mels() == 80 ? FeatureKind::mel80 : FeatureKind::external;
    f.frames = MatrixF(power.rows(), power.cols());
    for (size_t t = 0; t < power.rows(); ++t)
        for (size_t m = 0; m < power.cols(); ++m)
            f.frames(t, m) = static_cast<float>(std::log(std::max(kLogMelFloor, power(t, m))));
    return f;
}

const MelFilterbank& default_filterbank() {
    static const MelFilterbank fb = make_mel_filterbank(80, 16000, 512, 0.0, 8000.0);
    return fb;
}

} // namespace smlc
