#include "yolocam/normalize.hpp"

#include <algorithm>
#include <map>

namespace yolocam {

std::string to_string(NormalizationScope scope) {
  switch (scope) {
    case NormalizationScope::detection: return "detection";
    case NormalizationScope::image: return "image";
    case NormalizationScope::dataset: return "dataset";
  }
  return "?";
}

NormalizationScope parse_scope(const std::string& name) {
  if (name == "detection") return NormalizationScope::detection;
  if (name == "image") return NormalizationScope::image;
  if (name == "dataset") return NormalizationScope::dataset;
  throw Error("unknown normalization scope '" + name + "' (detection|image|dataset)");
}

namespace {

MapGroup make_group(std::vector<std::size_t> members, NormalizationScope scope,
                    const std::vector<AttributionMap>& maps) {
  MapGroup g{std::move(members), scope, 0, 0};
  g.group_min = maps[g.members[0]].raw_min;
  g.group_max = maps[g.members[0]].raw_max;
  for (std::size_t m : g.members) {
    g.group_min = std::min(g.group_min, maps[m].raw_min);
    g.group_max = std::max(g.group_max, maps[m].raw_max);
  }
  return g;
}

}  // namespace

std::vector<MapGroup> regroup(const std::vector<AttributionMap>& maps, NormalizationScope scope,
                              const std::vector<std::string>& image_ids) {
  if (image_ids.size() != maps.size()) {
    throw Error("regroup: " + std::to_string(image_ids.size()) + " image ids for " +
                std::to_string(maps.size()) + " maps");
  }
  std::vector<MapGroup> groups;
  switch (scope) {
    case NormalizationScope::detection:
      for (std::size_t i = 0; i < maps.size(); ++i) {
        groups.push_back(make_group({i}, scope, maps));
      }
      break;
    case NormalizationScope::image: {
      // one group per image, groups ordered by first appearance
      std::map<std::string, std::size_t> seen;
      std::vector<std::vector<std::size_t>> buckets;
      for (std::size_t i = 0; i < maps.size(); ++i) {
        auto [it, inserted] = seen.try_emplace(image_ids[i], buckets.size());
        if (inserted) buckets.emplace_back();
        buckets[it->second].push_back(i);
      }
      for (auto& members : buckets) groups.push_back(make_group(std::move(members), scope, maps));
      break;
    }
    case NormalizationScope::dataset: {
      if (maps.empty()) break;
      std::vector<std::size_t> all(maps.size());
      for (std::size_t i = 0; i < maps.size(); ++i) all[i] = i;
      groups.push_back(make_group(std::move(all), scope, maps));
      break;
    }
  }
  return groups;
}

std::vector<Tensorf> normalize(const MapGroup& group, const std::vector<AttributionMap>& maps) {
  if (group.members.empty()) throw Error("normalize: empty group");
  const float range = group.group_max - group.group_min;
  std::vector<Tensorf> out;
  out.reserve(group.members.size());
  for (std::size_t m : group.members) {
    const Tensorf& src = maps[m].values;
    Tensorf dst(src.shape());
    if (range > 0.0f) {
      for (std::int64_t i = 0; i < src.size(); ++i) {
        dst[i] = (src[i] - group.group_min) / range;
      }
    }
    out.push_back(std::move(dst));  // degenerate group: all zeros
  }
  return out;
}

}  // namespace yolocam
