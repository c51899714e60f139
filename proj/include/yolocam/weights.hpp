#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "yolocam/model.hpp"

namespace yolocam {

/// Number of parameter floats the weights blob must carry for this spec.
std::int64_t expected_weight_floats(const NetworkSpec& spec);

/// Populates every conv layer's LayerParams from a darknet-layout blob:
/// 5 little-endian int32 header words, then per conv layer
/// [bias | if batchnorm: scale, running-mean, running-variance] weights.
/// The blob must be consumed exactly; non-finite values are rejected.
void load_weights(const std::vector<std::uint8_t>& bytes, NetworkSpec& spec);

void load_weights_file(const std::string& path, NetworkSpec& spec);

/// Inverse of load_weights; emits a blob load_weights maps back to the same
/// parameters.
std::vector<std::uint8_t> serialize_weights(const NetworkSpec& spec);

void save_weights_file(const std::string& path, const NetworkSpec& spec);

}  // namespace yolocam
