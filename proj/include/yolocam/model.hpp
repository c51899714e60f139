#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "yolocam/kernels.hpp"
#include "yolocam/tensor.hpp"

namespace yolocam {

enum class LayerKind { conv, maxpool, upsample, route, yolo_head };

enum class Activation { linear, leaky, logistic };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);

/// One node of the parsed layer graph. Fields outside the node's kind are
/// left at their defaults; sizes (out_*) are filled by shape inference.
struct LayerNode {
  LayerKind kind = LayerKind::conv;

  // conv
  int filters = 0;
  int size = 1;
  int stride = 1;
  int pad = 0;  // actual padding in pixels
  bool batch_normalize = false;
  Activation activation = Activation::linear;
  std::optional<LayerParams<float>> params;

  // route (absolute indices after parsing)
  std::vector<int> route_sources;

  // yolo head
  std::vector<std::pair<float, float>> all_anchors;  // (w,h) pixel pairs
  std::vector<int> anchor_mask;                      // indices into all_anchors
  int classes = 0;
  int num_anchors = 0;

  // inferred
  int in_channels = 0;
  int out_channels = 0;
  int out_h = 0;
  int out_w = 0;
};

struct NetworkSpec {
  int input_width = 416;
  int input_height = 416;
  int input_channels = 3;
  std::vector<LayerNode> layers;
  std::vector<int> head_indices;  // yolo_head nodes, in order

  /// Indices of the layers feeding layer i (-1 denotes the input image).
  std::vector<int> sources(int i) const {
    const LayerNode& node = layers[static_cast<std::size_t>(i)];
    if (node.kind == LayerKind::route) return node.route_sources;
    return {i - 1};
  }

  /// The 1x1 output conv producing head `head_pos` (0-based).
  int head_conv_index(int head_pos) const {
    return head_indices[static_cast<std::size_t>(head_pos)] - 1;
  }
};

/// Masked anchors of one head, as (w,h) pixel pairs.
std::vector<std::pair<float, float>> head_anchors(const NetworkSpec& spec, int head_pos);

/// All transitive producers of layer `index` (excluding the layer itself).
std::vector<bool> ancestor_mask(const NetworkSpec& spec, int index);

}  // namespace yolocam
