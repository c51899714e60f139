#include "yolocam/gradcam.hpp"

#include <cmath>

namespace yolocam {

std::string to_string(CamMode mode) {
  return mode == CamMode::classic ? "classic" : "elementwise";
}

std::string to_string(TargetTransform t) {
  return t == TargetTransform::sigmoid ? "sigmoid" : "logit";
}

int select_target_layer(const NetworkSpec& spec, int head_pos,
                        std::optional<int> override_layer) {
  const int head_conv = spec.head_conv_index(head_pos);
  if (override_layer) {
    const int idx = *override_layer;
    const std::vector<bool> ancestors = ancestor_mask(spec, head_conv);
    if (idx < 0 || idx >= static_cast<int>(spec.layers.size()) ||
        !ancestors[static_cast<std::size_t>(idx)]) {
      throw Error("target layer " + std::to_string(idx) + " is not on head " +
                  std::to_string(head_pos) + "'s forward path");
    }
    if (spec.layers[static_cast<std::size_t>(idx)].kind != LayerKind::conv) {
      throw Error("target layer " + std::to_string(idx) + " is not a convolutional layer");
    }
    return idx;
  }
  const std::vector<int> srcs = spec.sources(head_conv);
  if (srcs.size() != 1 || srcs[0] < 0 ||
      spec.layers[static_cast<std::size_t>(srcs[0])].kind != LayerKind::conv) {
    throw Error("head " + std::to_string(head_pos) +
                ": no conv layer feeds the output conv; pass an explicit target layer");
  }
  return srcs[0];
}

namespace {

void accumulate(Tensorf& slot, Tensorf&& grad) {
  if (slot.empty()) {
    slot = std::move(grad);
    return;
  }
  for (std::int64_t i = 0; i < slot.size(); ++i) slot[i] += grad[i];
}

// Transfers d(score)/d(output of layer) into d(score)/d(each source output).
void backward_layer(const NetworkSpec& spec, const ForwardResult& fwd, int layer,
                    Tensorf grad, std::vector<Tensorf>& grads, const Tensorf& image) {
  const LayerNode& node = spec.layers[static_cast<std::size_t>(layer)];
  const auto activation_of = [&](int src) -> const Tensorf& {
    return src < 0 ? image : fwd.activations[static_cast<std::size_t>(src)];
  };
  const auto sink = [&grads](int src, Tensorf&& g) {
    if (src >= 0) accumulate(grads[static_cast<std::size_t>(src)], std::move(g));
  };

  switch (node.kind) {
    case LayerKind::conv: {
      const int src = layer - 1;
      const Tensorf& out = fwd.activations[static_cast<std::size_t>(layer)];
      if (node.activation == Activation::leaky) {
        grad = leaky_relu_backward(out, grad);
      } else if (node.activation == Activation::logistic) {
        grad = sigmoid_backward(out, grad);
      }
      sink(src, conv2d_backward_input(grad, *node.params, node.stride, node.pad,
                                      activation_of(src).shape()));
      break;
    }
    case LayerKind::maxpool: {
      const int src = layer - 1;
      // argmax positions are recomputed from the cached input
      const auto pooled = maxpool_forward(activation_of(src), node.size, node.stride);
      sink(src, maxpool_backward(pooled.argmax, activation_of(src).shape(), grad));
      break;
    }
    case LayerKind::upsample:
      sink(layer - 1, upsample2x_backward(grad));
      break;
    case LayerKind::route: {
      std::vector<int> counts;
      counts.reserve(node.route_sources.size());
      for (int src : node.route_sources) {
        counts.push_back(activation_of(src).extent(0));
      }
      std::vector<Tensorf> parts = split_channels(grad, counts);
      for (std::size_t i = 0; i < parts.size(); ++i) {
        sink(node.route_sources[i], std::move(parts[i]));
      }
      break;
    }
    case LayerKind::yolo_head:
      sink(layer - 1, std::move(grad));
      break;
  }
}

}  // namespace

AttributionMap compute_cam(const NetworkSpec& spec, const ForwardResult& fwd,
                           const NeuronAddress& neuron, int target_layer,
                           TargetTransform transform, CamMode mode) {
  if (neuron.layer_index < 0 || neuron.layer_index >= static_cast<int>(spec.layers.size())) {
    throw Error("compute_cam: neuron layer " + std::to_string(neuron.layer_index) +
                " out of range");
  }
  if (fwd.activations.size() != spec.layers.size()) {
    throw Error("compute_cam: activation cache does not match the network");
  }
  const std::vector<bool> ancestors = ancestor_mask(spec, neuron.layer_index);
  if (target_layer < 0 || target_layer >= static_cast<int>(spec.layers.size()) ||
      !ancestors[static_cast<std::size_t>(target_layer)]) {
    throw Error("compute_cam: neuron layer " + std::to_string(neuron.layer_index) +
                " is not downstream of target layer " + std::to_string(target_layer));
  }

  const Tensorf& raw = fwd.activations[static_cast<std::size_t>(neuron.layer_index)];
  if (neuron.channel < 0 || neuron.channel >= raw.extent(0) || neuron.grid_y < 0 ||
      neuron.grid_y >= raw.extent(1) || neuron.grid_x < 0 || neuron.grid_x >= raw.extent(2)) {
    throw Error("compute_cam: neuron address out of range for layer output " +
                shape_string(raw.shape()));
  }

  // Seed d(score)/d(raw): 1 for the logit, sigma'(z) for the probability.
  float seed = 1.0f;
  if (transform == TargetTransform::sigmoid) {
    const float s = sigmoid_scalar(raw.at(neuron.channel, neuron.grid_y, neuron.grid_x));
    seed = s * (1.0f - s);
  }

  // The image itself is never differentiated; a placeholder keeps the
  // source-activation lookup total.
  static const Tensorf no_image({1, 1, 1});

  std::vector<Tensorf> grads(spec.layers.size());
  Tensorf seed_grad(raw.shape());
  seed_grad.at(neuron.channel, neuron.grid_y, neuron.grid_x) = seed;
  grads[static_cast<std::size_t>(neuron.layer_index)] = std::move(seed_grad);

  for (int layer = neuron.layer_index; layer > target_layer; --layer) {
    Tensorf& slot = grads[static_cast<std::size_t>(layer)];
    if (slot.empty()) continue;
    backward_layer(spec, fwd, layer, std::move(slot), grads, no_image);
    slot = Tensorf();
  }

  const Tensorf& activation = fwd.activations[static_cast<std::size_t>(target_layer)];
  const Tensorf& grad = grads[static_cast<std::size_t>(target_layer)];
  const int channels = activation.extent(0);
  const int h = activation.extent(1), w = activation.extent(2);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;

  AttributionMap map;
  map.values = Tensorf({1, h, w});
  if (mode == CamMode::classic) {
    for (int k = 0; k < channels; ++k) {
      const float* g = grad.data() + k * plane;
      double sum = 0;
      for (std::int64_t i = 0; i < plane; ++i) sum += g[i];
      const float alpha = static_cast<float>(sum / static_cast<double>(plane));
      const float* a = activation.data() + k * plane;
      for (std::int64_t i = 0; i < plane; ++i) map.values[i] += alpha * a[i];
    }
  } else {
    for (int k = 0; k < channels; ++k) {
      const float* g = grad.data() + k * plane;
      const float* a = activation.data() + k * plane;
      for (std::int64_t i = 0; i < plane; ++i) map.values[i] += g[i] * a[i];
    }
  }
  const float inv_channels = 1.0f / static_cast<float>(channels);
  for (std::int64_t i = 0; i < plane; ++i) {
    const float v = map.values[i] * inv_channels;
    map.values[i] = v > 0.0f ? v : 0.0f;  // ReLU after channel aggregation
  }

  map.neuron = neuron;
  map.target_layer = target_layer;
  map.raw_min = min_value(map.values);
  map.raw_max = max_value(map.values);
  return map;
}

std::vector<AttributionMap> explain_detection(const NetworkSpec& spec, const Tensorf& image,
                                              const Detection& d,
                                              const std::vector<Target>& targets,
                                              TargetTransform transform, CamMode mode,
                                              std::optional<int> target_layer_override) {
  const ForwardResult fwd = forward(spec, image);
  const int target_layer =
      select_target_layer(spec, d.provenance.head_index, target_layer_override);

  // Guard against a detection that was not produced by this spec+image:
  // the raw head value must reproduce the detection's scores.
  const Tensorf& raw = head_output(spec, fwd, d.provenance.head_index);
  const NeuronAddress obj_addr = locate_target_neuron(d, Target::objectness(), spec);
  const float obj = sigmoid_scalar(raw.at(obj_addr.channel, obj_addr.grid_y, obj_addr.grid_x));
  if (std::fabs(obj - d.objectness) > 1e-6f) {
    throw Error("explain_detection: detection does not match this forward pass (objectness " +
                std::to_string(d.objectness) + " vs " + std::to_string(obj) + ")");
  }

  std::vector<AttributionMap> maps;
  maps.reserve(targets.size());
  for (const Target& t : targets) {
    const NeuronAddress addr = locate_target_neuron(d, t, spec);
    AttributionMap map = compute_cam(spec, fwd, addr, target_layer, transform, mode);
    map.target = t;
    if (t.kind == TargetKind::class_score && t.class_id < 0) {
      map.target.class_id = d.class_id;
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

}  // namespace yolocam
