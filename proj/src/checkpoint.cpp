#include "smlc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <vector>

namespace smlc {

namespace {

constexpr char kMagic[8] = {'S', 'M', 'L', 'C', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) throw FormatError("checkpoint truncated");
    return v;
}

uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 8)) throw FormatError("checkpoint truncated");
    return v;
}

std::string read_string(std::istream& is) {
    uint32_t n = read_u32(is);
    if (n > (1u << 16)) throw FormatError("checkpoint name length is implausible");
    std::string s(n, '\0');
    if (!is.read(s.data(), n)) throw FormatError("checkpoint truncated");
    return s;
}

// The config fields serialized by name, in a fixed order.
std::vector<std::pair<std::string, uint64_t>> config_fields(const ModelConfig& cfg) {
    return {{"d_model", cfg.d_model},       {"n_layers", cfg.n_layers},
            {"n_heads", cfg.n_heads},       {"n_labels", cfg.n_labels},
            {"input_dim", cfg.input_dim},   {"ffn_dim", cfg.ffn_dim},
            {"target_frames", cfg.target_frames}};
}

} // namespace

void save_checkpoint(const std::string& path, const ModelParameters<float>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 8);
    write_u32(os, kVersion);

    auto fields = config_fields(params.cfg);
    write_u32(os, static_cast<uint32_t>(fields.size()));
    for (const auto& [name, value] : fields) {
        write_string(os, name);
        write_u64(os, value);
    }

    auto tensors = params.tensors();
    write_u32(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& nt : tensors) {
        write_string(os, nt.name);
        write_u32(os, static_cast<uint32_t>(nt.tensor->rows()));
        write_u32(os, static_cast<uint32_t>(nt.tensor->cols()));
        os.write(reinterpret_cast<const char*>(nt.tensor->data()),
                 static_cast<std::streamsize>(nt.tensor->size() * sizeof(float)));
    }
    os.flush();
    if (!os) throw IoError("failed while writing checkpoint: " + path);
}

ModelParameters<float> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);

    char magic[8] = {};
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("not a checkpoint file (bad magic): " + path);
    uint32_t version = read_u32(is);
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    uint32_t n_fields = read_u32(is);
    std::map<std::string, uint64_t> fields;
    for (uint32_t i = 0; i < n_fields; ++i) {
        std::string name = read_string(is);
        uint64_t value = read_u64(is);
        if (!fields.emplace(name, value).second)
            throw FormatError("checkpoint config repeats field: " + name);
    }
    auto take = [&](const char* name) {
        auto it = fields.find(name);
        if (it == fields.end())
            throw FormatError(std::string("checkpoint config is missing field: ") + name);
        uint64_t v = it->second;
        fields.erase(it);
        return static_cast<size_t>(v);
    };
    ModelConfig cfg;
    cfg.d_model = take("d_model");
    cfg.n_layers = take("n_layers");
    cfg.n_heads = take("n_heads");
    cfg.n_labels = take("n_labels");
    cfg.input_dim = take("input_dim");
    cfg.ffn_dim = take("ffn_dim");
    cfg.target_frames = take("target_frames");
    if (!fields.empty())
        throw FormatError("checkpoint config has unknown field: " + fields.begin()->first);
    cfg.validate();

    ModelParameters<float> params = ModelParameters<float>::zeros_like(cfg);
    auto tensors = params.tensors();
    uint32_t n_tensors = read_u32(is);
    if (n_tensors != tensors.size())
        throw FormatError("checkpoint holds " + std::to_string(n_tensors) + " tensors, config requires " +
                          std::to_string(tensors.size()));
    for (auto& nt : tensors) {
        std::string name = read_string(is);
        if (name != nt.name)
            throw FormatError("checkpoint tensor order mismatch: found '" + name +
                              "' where '" + nt.name + "' was expected");
        uint32_t rows = read_u32(is);
        uint32_t cols = read_u32(is);
        if (rows != nt.tensor->rows() || cols != nt.tensor->cols())
            throw ConfigError("checkpoint field " + nt.name + " is " + std::to_string(rows) +
                              "x" + std::to_string(cols) + ", config requires " +
                              std::to_string(nt.tensor->rows()) + "x" +
                              std::to_string(nt.tensor->cols()));
        if (!is.read(reinterpret_cast<char*>(nt.tensor->data()),
                     static_cast<std::streamsize>(nt.tensor->size() * sizeof(float))))
            throw FormatError("checkpoint truncated inside tensor " + nt.name);
        if (!nt.tensor->all_finite())
            throw NumericError("checkpoint field " + nt.name + " contains non-finite values");
    }
    if (is.peek() != std::ifstream::traits_type::eof())
        throw FormatError("trailing bytes after last checkpoint tensor");

    params.pos_encoding = sinusoidal_encoding<float>(cfg.target_frames, cfg.d_model);
    params.revision = 1;
    return params;
}

} // namespace smlc
