#pragma once

#include "tabdiff/diffusion.hpp"

#include <string>

namespace tabdiff {

// Checkpoint container: magic line, an 8-byte little-endian header length, a
// JSON header (schedule, codec, layout, fingerprints, config echo, tensor
// directory), then the raw little-endian tensor payload in directory order.
// The payload scalar width follows the dtype tag ("f32" or "f64").
inline constexpr const char* kCheckpointMagic = "TABDIFFCKPT1\n";

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tabdiff
