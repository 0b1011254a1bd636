#pragma once

#include "fcl_model.hpp"

namespace fcl {

// Flat binary checkpoint: magic + version + shape table, then all tensors as
// contiguous little-endian 64-bit floats. A JSON sidecar at <path>.json names
// each tensor and records the model structure.
void save_model(const FclParams& model, const std::string& path);
FclParams load_model(const std::string& path);

}  // namespace fcl
