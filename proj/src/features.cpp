#include "smlc/features.hpp"

#include <cstring>
#include <fstream>

#include "smlc/errors.hpp"

namespace smlc {

namespace {

constexpr char kMagic[8] = {'S', 'M', 'L', 'C', 'F', 'E', 'A', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

} // namespace

FeatureSequence crop_or_pad(const FeatureSequence& f, size_t target_frames, CropMode mode,
                            Rng* rng) {
    if (target_frames == 0) throw ConfigError("crop_or_pad: target_frames must be >= 1");
    const size_t t = f.n_frames();
    const size_t d = f.dim();

    FeatureSequence out;
    out.frame_hop_s = f.frame_hop_s;
    out.kind = f.kind;
    out.frames = MatrixF(target_frames, d);

    size_t start = 0;
    if (t > target_frames) {
        if (mode == CropMode::train_random && rng != nullptr)
            start = static_cast<size_t>(rng->below(t - target_frames + 1));
    }
    const size_t copy = std::min(t - std::min(start, t), target_frames);
    for (size_t i = 0; i < copy; ++i)
        std::memcpy(out.frames.row(i), f.frames.row(start + i), d * sizeof(float));
    // remaining rows stay zero
    return out;
}

void save_feature_file(const std::string& path, const FeatureSequence& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 8);
    write_u32(out, kVersion);
    write_u32(out, static_cast<uint32_t>(f.n_frames()));
    write_u32(out, static_cast<uint32_t>(f.dim()));
    write_u32(out, static_cast<uint32_t>(std::lround(f.frame_hop_s * 1e6)));
    char kind = static_cast<char>(f.kind);
    out.write(&kind, 1);
    out.write(reinterpret_cast<const char*>(f.frames.data()),
              static_cast<std::streamsize>(f.frames.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

FeatureSequence load_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open feature file: " + path);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("bad magic in feature file: " + path);
    const uint32_t version = read_u32(in);
    if (version != kVersion)
        throw FormatError("unsupported feature file version " + std::to_string(version) + ": " + path);
    const uint32_t t = read_u32(in);
    const uint32_t d = read_u32(in);
    const uint32_t hop_us = read_u32(in);
    char kind_byte = 0;
    in.read(&kind_byte, 1);
    if (!in) throw FormatError("truncated feature file header: " + path);
    if (kind_byte != 0 && kind_byte != 1)
        throw FormatError("unknown feature kind in " + path);
    if (t == 0 || d == 0) throw FormatError("empty feature dimensions in " + path);
    if (kind_byte == 0 && d != 80)
        throw FormatError("mel80 feature file must have D = 80, got " + std::to_string(d) + ": " + path);

    FeatureSequence f;
    f.frame_hop_s = static_cast<double>(hop_us) * 1e-6;
    f.kind = static_cast<FeatureKind>(kind_byte);
    f.frames = MatrixF(t, d);
    in.read(reinterpret_cast<char*>(f.frames.data()),
            static_cast<std::streamsize>(static_cast<size_t>(t) * d * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != static_cast<size_t>(t) * d * sizeof(float))
        throw FormatError("truncated feature payload in " + path);
    return f;
}

} // namespace smlc
