#pragma once

#include <string>

#include "smlc/model.hpp"

namespace smlc {

// Binary checkpoint, little-endian:
//   magic "SMLCCKPT" | version u32 = 1
//   | n_config_fields u32 | per field: name_len u32, name, value u64
//   | n_tensors u32 | per tensor: name_len u32, name, rows u32, cols u32,
//     rows*cols float32 row-major.
// Tensors appear in the canonical parameter order and are validated against
// the stored config on load; any mismatch names the offending field.
void save_checkpoint(const std::string& path, const ModelParameters<float>& params);
ModelParameters<float> load_checkpoint(const std::string& path);

} // namespace smlc
