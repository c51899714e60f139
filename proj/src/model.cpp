#include "yolocam/model.hpp"

namespace yolocam {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "convolutional";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::upsample: return "upsample";
    case LayerKind::route: return "route";
    case LayerKind::yolo_head: return "yolo";
  }
  return "?";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::linear: return "linear";
    case Activation::leaky: return "leaky";
    case Activation::logistic: return "logistic";
  }
  return "?";
}

std::vector<std::pair<float, float>> head_anchors(const NetworkSpec& spec, int head_pos) {
  const LayerNode& head = spec.layers[static_cast<std::size_t>(spec.head_indices[head_pos])];
  std::vector<std::pair<float, float>> out;
  out.reserve(head.anchor_mask.size());
  for (int m : head.anchor_mask) out.push_back(head.all_anchors[static_cast<std::size_t>(m)]);
  return out;
}

std::vector<bool> ancestor_mask(const NetworkSpec& spec, int index) {
  std::vector<bool> mask(spec.layers.size(), false);
  std::vector<int> stack{index};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int s : spec.sources(i)) {
      if (s >= 0 && !mask[static_cast<std::size_t>(s)]) {
        mask[static_cast<std::size_t>(s)] = true;
        stack.push_back(s);
      }
    }
  }
  return mask;
}

}  // namespace yolocam
