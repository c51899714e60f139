#include "yolocam/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace yolocam {
namespace {

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
  bool used = false;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<KeyValue> entries;
};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<Section> split_sections(const std::string& text) {
  std::vector<Section> sections;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error("config line " + std::to_string(line_no) + ": malformed section header '" +
                    trim(raw) + "'");
      }
      sections.push_back({trim(line.substr(1, line.size() - 2)), line_no, {}});
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key=value, got '" +
                  line + "'");
    }
    if (sections.empty()) {
      throw Error("config line " + std::to_string(line_no) + ": key=value before any section");
    }
    sections.back().entries.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                                       line_no, false});
  }
  return sections;
}

KeyValue* find_entry(Section& s, const std::string& key) {
  for (auto& kv : s.entries) {
    if (kv.key == key) {
      kv.used = true;
      return &kv;
    }
  }
  return nullptr;
}

int find_int(Section& s, const std::string& key, int fallback) {
  KeyValue* kv = find_entry(s, key);
  if (!kv) return fallback;
  try {
    std::size_t pos = 0;
    const int v = std::stoi(kv->value, &pos);
    if (pos != kv->value.size()) throw std::invalid_argument(kv->value);
    return v;
  } catch (const std::exception&) {
    throw Error("config line " + std::to_string(kv->line) + ": '" + key +
                "' expects an integer, got '" + kv->value + "'");
  }
}

std::string find_str(Section& s, const std::string& key, const std::string& fallback) {
  KeyValue* kv = find_entry(s, key);
  return kv ? kv->value : fallback;
}

std::vector<float> parse_float_list(const std::string& value, int line) {
  std::vector<float> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stof(item));
    } catch (const std::exception&) {
      throw Error("config line " + std::to_string(line) + ": bad number '" + item + "'");
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& value, int line) {
  std::vector<int> out;
  for (float f : parse_float_list(value, line)) out.push_back(static_cast<int>(f));
  return out;
}

Activation parse_activation(const std::string& name, int line) {
  if (name == "linear") return Activation::linear;
  if (name == "leaky") return Activation::leaky;
  if (name == "logistic") return Activation::logistic;
  throw Error("config line " + std::to_string(line) + ": unsupported activation '" + name + "'");
}

// Mirrors the output-size rules of the kernels so parse-time inference and
// runtime agree.
void infer_conv_shape(LayerNode& node, int in_c, int in_h, int in_w, int line) {
  node.in_channels = in_c;
  node.out_channels = node.filters;
  const int span_h = in_h + 2 * node.pad - node.size;
  const int span_w = in_w + 2 * node.pad - node.size;
  if (span_h < 0 || span_w < 0 || span_h % node.stride != 0 || span_w % node.stride != 0) {
    throw Error("config line " + std::to_string(line) + ": convolutional output size of " +
                std::to_string(in_h) + "x" + std::to_string(in_w) + " input is not an integer");
  }
  node.out_h = span_h / node.stride + 1;
  node.out_w = span_w / node.stride + 1;
}

void infer_maxpool_shape(LayerNode& node, int in_c, int in_h, int in_w, int line) {
  node.in_channels = in_c;
  node.out_channels = in_c;
  if (node.size == 2 && node.stride == 1) {
    node.out_h = in_h;
    node.out_w = in_w;
    return;
  }
  if (in_h < node.size || in_w < node.size || (in_h - node.size) % node.stride != 0 ||
      (in_w - node.size) % node.stride != 0) {
    throw Error("config line " + std::to_string(line) + ": maxpool size " +
                std::to_string(node.size) + " stride " + std::to_string(node.stride) +
                " does not tile a " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                " input");
  }
  node.out_h = (in_h - node.size) / node.stride + 1;
  node.out_w = (in_w - node.size) / node.stride + 1;
}

std::string format_float(float v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

}  // namespace

NetworkSpec parse_network_config(const std::string& text, std::vector<std::string>* warnings) {
  std::vector<Section> sections = split_sections(text);
  if (sections.empty()) throw Error("config: no sections found");

  NetworkSpec spec;
  std::size_t first_layer = 0;
  if (sections[0].name == "net") {
    Section& net = sections[0];
    spec.input_width = find_int(net, "width", 416);
    spec.input_height = find_int(net, "height", 416);
    spec.input_channels = find_int(net, "channels", 3);
    if (spec.input_width < 1 || spec.input_height < 1 || spec.input_channels < 1) {
      throw Error("config line " + std::to_string(net.line) + ": net dimensions must be >= 1");
    }
    first_layer = 1;
  }

  // Running output shape of the most recent layer, starting at the image.
  int cur_c = spec.input_channels, cur_h = spec.input_height, cur_w = spec.input_width;

  for (std::size_t si = first_layer; si < sections.size(); ++si) {
    Section& s = sections[si];
    const int index = static_cast<int>(spec.layers.size());
    LayerNode node;

    if (s.name == "net") {
      throw Error("config line " + std::to_string(s.line) + ": [net] must be the first section");
    } else if (s.name == "convolutional") {
      node.kind = LayerKind::conv;
      node.batch_normalize = find_int(s, "batch_normalize", 0) != 0;
      node.filters = find_int(s, "filters", 0);
      node.size = find_int(s, "size", 1);
      node.stride = find_int(s, "stride", 1);
      node.pad = find_int(s, "padding", 0);
      if (find_int(s, "pad", 0) != 0) node.pad = node.size / 2;
      node.activation = parse_activation(find_str(s, "activation", "linear"), s.line);
      if (node.filters < 1 || node.size < 1 || node.stride < 1 || node.pad < 0) {
        throw Error("config line " + std::to_string(s.line) +
                    ": convolutional needs filters >= 1, size/stride >= 1, padding >= 0");
      }
      infer_conv_shape(node, cur_c, cur_h, cur_w, s.line);
    } else if (s.name == "maxpool") {
      node.kind = LayerKind::maxpool;
      node.size = find_int(s, "size", 2);
      node.stride = find_int(s, "stride", node.size);
      if (node.size < 1 || node.stride < 1) {
        throw Error("config line " + std::to_string(s.line) + ": maxpool size/stride must be >= 1");
      }
      infer_maxpool_shape(node, cur_c, cur_h, cur_w, s.line);
    } else if (s.name == "upsample") {
      node.kind = LayerKind::upsample;
      node.stride = find_int(s, "stride", 2);
      if (node.stride != 2) {
        throw Error("config line " + std::to_string(s.line) +
                    ": only stride=2 upsample is supported");
      }
      node.in_channels = cur_c;
      node.out_channels = cur_c;
      node.out_h = 2 * cur_h;
      node.out_w = 2 * cur_w;
    } else if (s.name == "route") {
      node.kind = LayerKind::route;
      KeyValue* kv = find_entry(s, "layers");
      if (!kv) throw Error("config line " + std::to_string(s.line) + ": route needs layers=");
      for (int ref : parse_int_list(kv->value, kv->line)) {
        const int abs_index = ref < 0 ? index + ref : ref;
        if (abs_index < 0 || abs_index >= index) {
          throw Error("config line " + std::to_string(kv->line) + ": route reference " +
                      std::to_string(ref) + " is out of range for layer " +
                      std::to_string(index));
        }
        node.route_sources.push_back(abs_index);
      }
      int channels = 0;
      const LayerNode& ref0 = spec.layers[static_cast<std::size_t>(node.route_sources[0])];
      for (int src : node.route_sources) {
        const LayerNode& ref = spec.layers[static_cast<std::size_t>(src)];
        if (ref.out_h != ref0.out_h || ref.out_w != ref0.out_w) {
          throw Error("config line " + std::to_string(s.line) +
                      ": route sources disagree on spatial size (" + std::to_string(ref.out_h) +
                      "x" + std::to_string(ref.out_w) + " vs " + std::to_string(ref0.out_h) +
                      "x" + std::to_string(ref0.out_w) + ")");
        }
        channels += ref.out_channels;
      }
      node.in_channels = channels;
      node.out_channels = channels;
      node.out_h = ref0.out_h;
      node.out_w = ref0.out_w;
    } else if (s.name == "yolo") {
      node.kind = LayerKind::yolo_head;
      if (index == 0 || spec.layers.back().kind != LayerKind::conv) {
        throw Error("config line " + std::to_string(s.line) +
                    ": yolo section must follow a convolutional layer");
      }
      node.classes = find_int(s, "classes", 20);
      node.num_anchors = find_int(s, "num", 1);
      if (node.classes < 1 || node.num_anchors < 1) {
        throw Error("config line " + std::to_string(s.line) + ": yolo classes/num must be >= 1");
      }
      KeyValue* anchors_kv = find_entry(s, "anchors");
      if (anchors_kv) {
        const std::vector<float> flat = parse_float_list(anchors_kv->value, anchors_kv->line);
        if (flat.size() != 2 * static_cast<std::size_t>(node.num_anchors)) {
          throw Error("config line " + std::to_string(anchors_kv->line) + ": expected " +
                      std::to_string(2 * node.num_anchors) + " anchor values, got " +
                      std::to_string(flat.size()));
        }
        for (std::size_t i = 0; i + 1 < flat.size(); i += 2) {
          if (flat[i] <= 0 || flat[i + 1] <= 0) {
            throw Error("config line " + std::to_string(anchors_kv->line) +
                        ": anchors must be positive");
          }
          node.all_anchors.emplace_back(flat[i], flat[i + 1]);
        }
      } else {
        node.all_anchors.assign(static_cast<std::size_t>(node.num_anchors), {0.5f, 0.5f});
      }
      KeyValue* mask_kv = find_entry(s, "mask");
      if (mask_kv) {
        node.anchor_mask = parse_int_list(mask_kv->value, mask_kv->line);
        for (int m : node.anchor_mask) {
          if (m < 0 || m >= node.num_anchors) {
            throw Error("config line " + std::to_string(mask_kv->line) + ": mask index " +
                        std::to_string(m) + " out of range for num=" +
                        std::to_string(node.num_anchors));
          }
        }
      } else {
        for (int i = 0; i < node.num_anchors; ++i) node.anchor_mask.push_back(i);
      }
      const int expected = static_cast<int>(node.anchor_mask.size()) * (5 + node.classes);
      if (cur_c != expected) {
        throw Error("config line " + std::to_string(s.line) + ": producing conv has " +
                    std::to_string(cur_c) + " output channels, expected " +
                    std::to_string(node.anchor_mask.size()) + "*(5+" +
                    std::to_string(node.classes) + ")=" + std::to_string(expected));
      }
      node.in_channels = cur_c;
      node.out_channels = cur_c;
      node.out_h = cur_h;
      node.out_w = cur_w;
      spec.head_indices.push_back(index);
    } else {
      throw Error("config line " + std::to_string(s.line) + ": unknown section [" + s.name + "]");
    }

    spec.layers.push_back(std::move(node));
    const LayerNode& added = spec.layers.back();
    cur_c = added.out_channels;
    cur_h = added.out_h;
    cur_w = added.out_w;
  }

  if (warnings) {
    for (std::size_t si = 0; si < sections.size(); ++si) {
      for (const KeyValue& kv : sections[si].entries) {
        if (!kv.used) {
          warnings->push_back("config line " + std::to_string(kv.line) + ": ignoring key '" +
                              kv.key + "' in [" + sections[si].name + "]");
        }
      }
    }
  }
  return spec;
}

NetworkSpec parse_network_config_file(const std::string& path,
                                      std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_network_config(ss.str(), warnings);
}

std::string emit_canonical_config(const NetworkSpec& spec) {
  std::ostringstream out;
  out << "[net]\n";
  out << "width=" << spec.input_width << "\n";
  out << "height=" << spec.input_height << "\n";
  out << "channels=" << spec.input_channels << "\n";
  for (const LayerNode& node : spec.layers) {
    out << "\n[" << to_string(node.kind) << "]\n";
    switch (node.kind) {
      case LayerKind::conv:
        if (node.batch_normalize) out << "batch_normalize=1\n";
        out << "filters=" << node.filters << "\n";
        out << "size=" << node.size << "\n";
        out << "stride=" << node.stride << "\n";
        out << "padding=" << node.pad << "\n";
        out << "activation=" << to_string(node.activation) << "\n";
        break;
      case LayerKind::maxpool:
        out << "size=" << node.size << "\n";
        out << "stride=" << node.stride << "\n";
        break;
      case LayerKind::upsample:
        out << "stride=2\n";
        break;
      case LayerKind::route: {
        out << "layers=";
        for (std::size_t i = 0; i < node.route_sources.size(); ++i) {
          if (i) out << ",";
          out << node.route_sources[i];
        }
        out << "\n";
        break;
      }
      case LayerKind::yolo_head: {
        out << "mask=";
        for (std::size_t i = 0; i < node.anchor_mask.size(); ++i) {
          if (i) out << ",";
          out << node.anchor_mask[i];
        }
        out << "\nanchors=";
        for (std::size_t i = 0; i < node.all_anchors.size(); ++i) {
          if (i) out << ",";
          out << format_float(node.all_anchors[i].first) << ","
              << format_float(node.all_anchors[i].second);
        }
        out << "\nclasses=" << node.classes << "\n";
        out << "num=" << node.num_anchors << "\n";
        break;
      }
    }
  }
  return out.str();
}

bool specs_equal(const NetworkSpec& a, const NetworkSpec& b) {
  if (a.input_width != b.input_width || a.input_height != b.input_height ||
      a.input_channels != b.input_channels || a.layers.size() != b.layers.size() ||
      a.head_indices != b.head_indices) {
    return false;
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const LayerNode& x = a.layers[i];
    const LayerNode& y = b.layers[i];
    if (x.kind != y.kind || x.filters != y.filters || x.size != y.size || x.stride != y.stride ||
        x.pad != y.pad || x.batch_normalize != y.batch_normalize ||
        x.activation != y.activation || x.route_sources != y.route_sources ||
        x.all_anchors != y.all_anchors || x.anchor_mask != y.anchor_mask ||
        x.classes != y.classes || x.num_anchors != y.num_anchors ||
        x.in_channels != y.in_channels || x.out_channels != y.out_channels ||
        x.out_h != y.out_h || x.out_w != y.out_w) {
      return false;
    }
  }
  return true;
}

}  // namespace yolocam
