#pragma once

#include <string>
#include <utility>
#include <vector>

#include "yolocam/model.hpp"
#include "yolocam/tensor.hpp"

namespace yolocam {

struct Box {
  float x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};

/// Where a detection came from; enough to reverse NMS back to head neurons.
struct Provenance {
  int head_index = 0;
  int grid_y = 0;
  int grid_x = 0;
  int anchor_index = 0;  // slot within the head's anchor mask
};

struct Detection {
  Box box;  // input-image pixels
  float objectness = 0;
  int class_id = 0;
  float class_prob = 0;
  float confidence = 0;  // objectness * class_prob
  Provenance provenance;
};

/// Coordinates of one scalar in a head's output conv.
struct NeuronAddress {
  int layer_index = 0;
  int channel = 0;
  int grid_y = 0;
  int grid_x = 0;
};

enum class TargetKind { objectness, class_score };

struct Target {
  TargetKind kind = TargetKind::objectness;
  int class_id = -1;  // class_score: -1 means the detection's own class

  static Target objectness() { return {TargetKind::objectness, -1}; }
  static Target class_score(int class_id = -1) { return {TargetKind::class_score, class_id}; }
};

std::string to_string(TargetKind kind);

/// Per-layer outputs of one forward pass (yolo nodes store a copy of their
/// producing conv's raw output). Index -1 is not stored; kernels backing
/// Grad-CAM never need the image itself.
struct ForwardResult {
  std::vector<Tensorf> activations;
};

struct HeadMeta {
  int head_index = 0;       // position among the heads, 0-based
  int head_conv_index = 0;  // layer index of the producing conv
  float stride_x = 0, stride_y = 0;
  float image_width = 0, image_height = 0;
  std::vector<std::pair<float, float>> anchors;
  int classes = 0;
};

HeadMeta make_head_meta(const NetworkSpec& spec, int head_pos);

/// Runs the network on a 3xHxW image in [0,1], caching every layer output.
ForwardResult forward(const NetworkSpec& spec, const Tensorf& image);

/// Raw (pre-sigmoid) output tensor of head `head_pos`.
const Tensorf& head_output(const NetworkSpec& spec, const ForwardResult& fwd, int head_pos);

/// Standard YOLO decode: one candidate per (cell, anchor, argmax class),
/// with full provenance.
std::vector<Detection> decode_head(const Tensorf& raw, const HeadMeta& meta);

float iou(const Box& a, const Box& b);

/// Confidence filter + per-class greedy NMS. Survivors keep their original
/// provenance; ties break toward the lower candidate index.
std::vector<Detection> nms(const std::vector<Detection>& candidates, float conf_threshold,
                           float iou_threshold);

/// Maps a detection back to the head-conv neuron holding the requested score.
NeuronAddress locate_target_neuron(const Detection& d, const Target& target,
                                   const NetworkSpec& spec);

/// decode all heads + threshold + NMS.
std::vector<Detection> detect(const NetworkSpec& spec, const ForwardResult& fwd,
                              float conf_threshold, float iou_threshold);

}  // namespace yolocam
