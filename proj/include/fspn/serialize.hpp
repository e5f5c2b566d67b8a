#pragma once

#include <string>

#include "fspn/model.hpp"

namespace fspn {

/// Writes the model as a self-describing JSON tree (see docs/FORMATS.md).
/// Doubles are printed with round-trip precision.
std::string serialize(const FspnModel& model);

/// Parses and validates a model. Throws ModelError on malformed text, an
/// unsupported version or an unknown tag, and ValidationError when the
/// decoded tree breaks an invariant.
FspnModel deserialize(const std::string& text);

FspnModel load_model(const std::string& path);
void save_model(const FspnModel& model, const std::string& path);

}  // namespace fspn
