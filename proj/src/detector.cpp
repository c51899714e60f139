#include "yolocam/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace yolocam {

std::string to_string(TargetKind kind) {
  return kind == TargetKind::objectness ? "objectness" : "class";
}

HeadMeta make_head_meta(const NetworkSpec& spec, int head_pos) {
  if (head_pos < 0 || head_pos >= static_cast<int>(spec.head_indices.size())) {
    throw Error("head index " + std::to_string(head_pos) + " out of range (network has " +
                std::to_string(spec.head_indices.size()) + " heads)");
  }
  const LayerNode& head = spec.layers[static_cast<std::size_t>(spec.head_indices[head_pos])];
  HeadMeta meta;
  meta.head_index = head_pos;
  meta.head_conv_index = spec.head_conv_index(head_pos);
  meta.stride_x = static_cast<float>(spec.input_width) / static_cast<float>(head.out_w);
  meta.stride_y = static_cast<float>(spec.input_height) / static_cast<float>(head.out_h);
  meta.image_width = static_cast<float>(spec.input_width);
  meta.image_height = static_cast<float>(spec.input_height);
  meta.anchors = head_anchors(spec, head_pos);
  meta.classes = head.classes;
  return meta;
}

ForwardResult forward(const NetworkSpec& spec, const Tensorf& image) {
  if (image.rank() != 3 || image.extent(0) != spec.input_channels ||
      image.extent(1) != spec.input_height || image.extent(2) != spec.input_width) {
    throw Error("forward: image " + shape_string(image.shape()) + " does not match network input " +
                shape_string({spec.input_channels, spec.input_height, spec.input_width}));
  }

  ForwardResult fwd;
  fwd.activations.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerNode& node = spec.layers[i];
    const auto input_of = [&](int src) -> const Tensorf& {
      return src < 0 ? image : fwd.activations[static_cast<std::size_t>(src)];
    };
    switch (node.kind) {
      case LayerKind::conv: {
        if (!node.params) {
          throw Error("forward: conv layer " + std::to_string(i) + " has no weights loaded");
        }
        Tensorf out = conv2d_forward(input_of(static_cast<int>(i) - 1), *node.params,
                                     node.stride, node.pad);
        if (node.activation == Activation::leaky) {
          out = leaky_relu_forward(out);
        } else if (node.activation == Activation::logistic) {
          out = sigmoid_forward(out);
        }
        fwd.activations.push_back(std::move(out));
        break;
      }
      case LayerKind::maxpool:
        fwd.activations.push_back(
            maxpool_forward(input_of(static_cast<int>(i) - 1), node.size, node.stride).output);
        break;
      case LayerKind::upsample:
        fwd.activations.push_back(upsample2x_forward(input_of(static_cast<int>(i) - 1)));
        break;
      case LayerKind::route: {
        std::vector<const Tensorf*> parts;
        parts.reserve(node.route_sources.size());
        for (int src : node.route_sources) parts.push_back(&input_of(src));
        fwd.activations.push_back(concat_channels(parts));
        break;
      }
      case LayerKind::yolo_head:
        // raw passthrough; decode happens outside the graph
        fwd.activations.push_back(input_of(static_cast<int>(i) - 1));
        break;
    }
  }
  return fwd;
}

const Tensorf& head_output(const NetworkSpec& spec, const ForwardResult& fwd, int head_pos) {
  return fwd.activations[static_cast<std::size_t>(spec.head_conv_index(head_pos))];
}

std::vector<Detection> decode_head(const Tensorf& raw, const HeadMeta& meta) {
  const int num_anchors = static_cast<int>(meta.anchors.size());
  const int per_anchor = 5 + meta.classes;
  if (raw.rank() != 3 || raw.extent(0) != num_anchors * per_anchor) {
    throw Error("decode_head: raw tensor has " + std::to_string(raw.extent(0)) +
                " channels, expected " + std::to_string(num_anchors) + "*(5+" +
                std::to_string(meta.classes) + ")=" + std::to_string(num_anchors * per_anchor));
  }
  const int grid_h = raw.extent(1), grid_w = raw.extent(2);

  std::vector<Detection> out;
  out.reserve(static_cast<std::size_t>(grid_h) * grid_w * num_anchors);
  for (int gy = 0; gy < grid_h; ++gy) {
    for (int gx = 0; gx < grid_w; ++gx) {
      for (int a = 0; a < num_anchors; ++a) {
        const int base = a * per_anchor;
        const float tx = raw.at(base + 0, gy, gx);
        const float ty = raw.at(base + 1, gy, gx);
        const float tw = raw.at(base + 2, gy, gx);
        const float th = raw.at(base + 3, gy, gx);
        const float t_obj = raw.at(base + 4, gy, gx);

        int best_class = 0;
        float best_logit = raw.at(base + 5, gy, gx);
        for (int c = 1; c < meta.classes; ++c) {
          const float logit = raw.at(base + 5 + c, gy, gx);
          if (logit > best_logit) {
            best_logit = logit;
            best_class = c;
          }
        }

        Detection d;
        d.objectness = sigmoid_scalar(t_obj);
        d.class_id = best_class;
        d.class_prob = sigmoid_scalar(best_logit);
        d.confidence = d.objectness * d.class_prob;
        d.provenance = {meta.head_index, gy, gx, a};

        const float cx = (static_cast<float>(gx) + sigmoid_scalar(tx)) * meta.stride_x;
        const float cy = (static_cast<float>(gy) + sigmoid_scalar(ty)) * meta.stride_y;
        const float bw = meta.anchors[static_cast<std::size_t>(a)].first * std::exp(tw);
        const float bh = meta.anchors[static_cast<std::size_t>(a)].second * std::exp(th);
        d.box.x_min = std::clamp(cx - bw / 2, 0.0f, meta.image_width);
        d.box.x_max = std::clamp(cx + bw / 2, 0.0f, meta.image_width);
        d.box.y_min = std::clamp(cy - bh / 2, 0.0f, meta.image_height);
        d.box.y_max = std::clamp(cy + bh / 2, 0.0f, meta.image_height);
        out.push_back(d);
      }
    }
  }
  return out;
}

float iou(const Box& a, const Box& b) {
  const float ix = std::max(0.0f, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const float iy = std::max(0.0f, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const float inter = ix * iy;
  const float area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min);
  const float area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min);
  const float uni = area_a + area_b - inter;
  return uni > 0.0f ? inter / uni : 0.0f;
}

std::vector<Detection> nms(const std::vector<Detection>& candidates, float conf_threshold,
                           float iou_threshold) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].confidence >= conf_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].confidence > candidates[b].confidence;
  });

  std::vector<Detection> kept;
  for (std::size_t i : order) {
    const Detection& d = candidates[i];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_id == d.class_id && iou(k.box, d.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

NeuronAddress locate_target_neuron(const Detection& d, const Target& target,
                                   const NetworkSpec& spec) {
  const HeadMeta meta = make_head_meta(spec, d.provenance.head_index);
  const int per_anchor = 5 + meta.classes;
  const LayerNode& head =
      spec.layers[static_cast<std::size_t>(spec.head_indices[d.provenance.head_index])];
  if (d.provenance.grid_y < 0 || d.provenance.grid_y >= head.out_h || d.provenance.grid_x < 0 ||
      d.provenance.grid_x >= head.out_w || d.provenance.anchor_index < 0 ||
      d.provenance.anchor_index >= static_cast<int>(meta.anchors.size())) {
    throw Error("locate_target_neuron: provenance out of range for head " +
                std::to_string(d.provenance.head_index));
  }

  NeuronAddress addr;
  addr.layer_index = meta.head_conv_index;
  addr.grid_y = d.provenance.grid_y;
  addr.grid_x = d.provenance.grid_x;
  if (target.kind == TargetKind::objectness) {
    addr.channel = d.provenance.anchor_index * per_anchor + 4;
  } else {
    const int class_id = target.class_id >= 0 ? target.class_id : d.class_id;
    if (class_id >= meta.classes) {
      throw Error("locate_target_neuron: class id " + std::to_string(class_id) +
                  " out of range for " + std::to_string(meta.classes) + " classes");
    }
    addr.channel = d.provenance.anchor_index * per_anchor + 5 + class_id;
  }
  return addr;
}

std::vector<Detection> detect(const NetworkSpec& spec, const ForwardResult& fwd,
                              float conf_threshold, float iou_threshold) {
  std::vector<Detection> candidates;
  for (int h = 0; h < static_cast<int>(spec.head_indices.size()); ++h) {
    const HeadMeta meta = make_head_meta(spec, h);
    std::vector<Detection> decoded = decode_head(head_output(spec, fwd, h), meta);
    candidates.insert(candidates.end(), decoded.begin(), decoded.end());
  }
  return nms(candidates, conf_threshold, iou_threshold);
}

}  // namespace yolocam
