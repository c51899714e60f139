#pragma once

#include <string>
#include <vector>

#include "yolocam/model.hpp"

namespace yolocam {

/// Parses a darknet-style section config ([net]/[convolutional]/[maxpool]/
/// [upsample]/[route]/[yolo], key=value lines, # comments) into a validated
/// NetworkSpec. Unknown keys inside supported sections are collected as
/// warnings; unknown sections are errors.
NetworkSpec parse_network_config(const std::string& text,
                                 std::vector<std::string>* warnings = nullptr);

NetworkSpec parse_network_config_file(const std::string& path,
                                      std::vector<std::string>* warnings = nullptr);

/// Emits a canonical config document that parses back to an equal spec.
std::string emit_canonical_config(const NetworkSpec& spec);

bool specs_equal(const NetworkSpec& a, const NetworkSpec& b);

}  // namespace yolocam
