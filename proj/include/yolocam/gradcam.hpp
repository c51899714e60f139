#pragma once

#include <optional>
#include <string>
#include <vector>

#include "yolocam/detector.hpp"
#include "yolocam/model.hpp"
#include "yolocam/tensor.hpp"

namespace yolocam {

/// classic: spatially pooled gradients become per-channel weights.
/// elementwise: gradient*activation pointwise, then the channel mean.
enum class CamMode { classic, elementwise };

/// Whether gradients start from the sigmoid probability or the raw logit.
enum class TargetTransform { sigmoid, logit };

std::string to_string(CamMode mode);
std::string to_string(TargetTransform t);

/// Raw, unnormalized Grad-CAM map at target-layer resolution.
struct AttributionMap {
  Tensorf values;  // 1xhxw, non-negative
  Target target;
  NeuronAddress neuron;
  int target_layer = 0;
  std::string detection_ref;
  float raw_min = 0;
  float raw_max = 0;
};

/// Default: the conv layer feeding the head's 1x1 output conv. An override
/// must be a conv on that head's forward path.
int select_target_layer(const NetworkSpec& spec, int head_pos,
                        std::optional<int> override_layer = std::nullopt);

/// Backpropagates the neuron's score to the target layer's activation and
/// folds gradients and activations into a single non-negative map.
AttributionMap compute_cam(const NetworkSpec& spec, const ForwardResult& fwd,
                           const NeuronAddress& neuron, int target_layer,
                           TargetTransform transform = TargetTransform::sigmoid,
                           CamMode mode = CamMode::classic);

/// One map per requested target, sharing a single forward pass.
std::vector<AttributionMap> explain_detection(const NetworkSpec& spec, const Tensorf& image,
                                              const Detection& d,
                                              const std::vector<Target>& targets,
                                              TargetTransform transform = TargetTransform::sigmoid,
                                              CamMode mode = CamMode::classic,
                                              std::optional<int> target_layer_override = std::nullopt);

}  // namespace yolocam
