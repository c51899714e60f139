#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "yolocam/gradcam.hpp"

namespace yolocam {

/// Pool over which maps share one min-max range for display.
enum class NormalizationScope { detection, image, dataset };

std::string to_string(NormalizationScope scope);
NormalizationScope parse_scope(const std::string& name);

/// A set of maps normalized together. Members index the caller's map list.
struct MapGroup {
  std::vector<std::size_t> members;
  NormalizationScope scope = NormalizationScope::detection;
  float group_min = 0;
  float group_max = 0;
};

/// Detection -> one group per map; Image -> one group per source image;
/// Dataset -> a single group. image_ids runs parallel to maps.
std::vector<MapGroup> regroup(const std::vector<AttributionMap>& maps, NormalizationScope scope,
                              const std::vector<std::string>& image_ids);

/// Min-max normalizes each member map into [0,1] using the group range;
/// a constant group maps to all zeros. Results follow group member order.
std::vector<Tensorf> normalize(const MapGroup& group, const std::vector<AttributionMap>& maps);

}  // namespace yolocam
