#include "smlc/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "smlc/errors.hpp"

namespace smlc {

namespace {

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

} // namespace

Waveform load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open WAV file: " + path);

    char riff[4], wave[4];
    in.read(riff, 4);
    read_u32(in); // riff payload size, unused
    in.read(wave, 4);
    if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
        throw FormatError("not a RIFF/WAVE file: " + path);

    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    Waveform w;

    // Scan chunks (don't assume a 44-byte header).
    while (true) {
        char id[4];
        in.read(id, 4);
        if (!in) break;
        uint32_t size = read_u32(in);
        if (!in) throw FormatError("truncated chunk header in " + path);

        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16) throw FormatError("fmt chunk too small in " + path);
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in); // byte rate
            read_u16(in); // block align
            bits = read_u16(in);
            in.seekg(size - 16 + (size & 1), std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            if (!have_fmt) throw FormatError("data chunk before fmt in " + path);
            if (format != 1) throw FormatError("unsupported WAV encoding (PCM required): " + path);
            if (bits != 16) throw FormatError("unsupported bit depth (16-bit required): " + path);
            if (channels != 1) throw FormatError("unsupported channel count (mono required): " + path);
            const size_t n = size / 2;
            std::vector<int16_t> raw(n);
            in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 2));
            if (static_cast<size_t>(in.gcount()) != n * 2)
                throw FormatError("truncated data chunk in " + path);
            w.samples.resize(n);
            for (size_t i = 0; i < n; ++i) w.samples[i] = static_cast<float>(raw[i]) / 32768.0f;
            w.sample_rate = static_cast<int>(rate);
            return w;
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
            if (!in) throw FormatError("truncated chunk in " + path);
        }
    }
    throw FormatError("no data chunk found in " + path);
}

void save_wav(const std::string& path, const Waveform& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);

    const uint32_t n = static_cast<uint32_t>(w.samples.size());
    const uint32_t data_bytes = n * 2;

    out.write("RIFF", 4);
    write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1); // PCM
    write_u16(out, 1); // mono
    write_u32(out, static_cast<uint32_t>(w.sample_rate));
    write_u32(out, static_cast<uint32_t>(w.sample_rate) * 2);
    write_u16(out, 2);
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_bytes);

    for (uint32_t i = 0; i < n; ++i) {
        double v = std::lround(static_cast<double>(w.samples[i]) * 32768.0);
        v = std::min(32767.0, std::max(-32768.0, v));
        write_u16(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace smlc
