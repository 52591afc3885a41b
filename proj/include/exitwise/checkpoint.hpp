#pragma once

#include <filesystem>

#include "exitwise/model.hpp"

namespace exitwise {

// Checkpoint layout: 4 magic bytes "MXEC", little-endian uint32 version (1),
// a length-prefixed UTF-8 architecture descriptor, then every parameter
// array as little-endian IEEE-754 single precision in deterministic order
// (trunk layers ascending, then heads ascending, weights before bias). The
// descriptor carries the optional policy calibration.
void save_checkpoint(const ModelF& model, const std::filesystem::path& path);
ModelF load_checkpoint(const std::filesystem::path& path);

// Descriptor codec, exposed for tests.
std::string encode_descriptor(const ModelF& model);
ModelF decode_descriptor(const std::string& descriptor);

}  // namespace exitwise
