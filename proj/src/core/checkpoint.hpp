#pragma once

#include <string>

#include <json.hpp>

#include "core/param_store.hpp"

namespace hoigen {

/// Checkpoint = `<prefix>.manifest.json` (name, shape, byte offset per tensor,
/// plus a caller-owned meta object) and `<prefix>.weights.bin` (little-endian
/// 32-bit floats, concatenated in manifest order).
void save_checkpoint(const ParamStore& store, const std::string& prefix,
                     const nlohmann::json& meta);

/// Loads tensor values into `store`. Tensors already present must match the
/// manifest shape; missing ones are created (requires_grad = true).
/// Returns the manifest's meta object.
nlohmann::json load_checkpoint(ParamStore& store, const std::string& prefix);

bool checkpoint_exists(const std::string& prefix);

}  // namespace hoigen
