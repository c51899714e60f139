#include "yolocam/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "weights blobs are little-endian; big-endian hosts are unsupported");

namespace yolocam {
namespace {

constexpr std::size_t kHeaderWords = 5;

std::int64_t conv_weight_floats(const LayerNode& node) {
  const std::int64_t w = static_cast<std::int64_t>(node.filters) * node.in_channels *
                         node.size * node.size;
  const std::int64_t per_channel = node.batch_normalize ? 4 : 1;  // bias (+bn: scale,mean,var)
  return w + per_channel * node.filters;
}

class FloatReader {
 public:
  FloatReader(const float* data, std::int64_t count) : data_(data), count_(count) {}

  void take(std::vector<float>& dst, std::int64_t n, const std::string& what) {
    dst.resize(static_cast<std::size_t>(n));
    take(dst.data(), n, what);
  }

  void take(float* dst, std::int64_t n, const std::string& what) {
    if (pos_ + n > count_) {
      throw Error("weights: blob exhausted while reading " + what);
    }
    std::memcpy(dst, data_ + pos_, static_cast<std::size_t>(n) * sizeof(float));
    for (std::int64_t i = 0; i < n; ++i) {
      if (!std::isfinite(dst[i])) {
        throw Error("weights: non-finite value in " + what + " at float " +
                    std::to_string(pos_ + i));
      }
    }
    pos_ += n;
  }

 private:
  const float* data_;
  std::int64_t count_;
  std::int64_t pos_ = 0;
};

}  // namespace

std::int64_t expected_weight_floats(const NetworkSpec& spec) {
  std::int64_t total = 0;
  for (const LayerNode& node : spec.layers) {
    if (node.kind == LayerKind::conv) total += conv_weight_floats(node);
  }
  return total;
}

void load_weights(const std::vector<std::uint8_t>& bytes, NetworkSpec& spec) {
  const std::size_t header_bytes = kHeaderWords * sizeof(std::int32_t);
  if (bytes.size() < header_bytes) {
    throw Error("weights: blob of " + std::to_string(bytes.size()) +
                " bytes is smaller than the " + std::to_string(header_bytes) + "-byte header");
  }
  if ((bytes.size() - header_bytes) % sizeof(float) != 0) {
    throw Error("weights: payload of " + std::to_string(bytes.size() - header_bytes) +
                " bytes is not a whole number of floats");
  }
  const std::int64_t actual = static_cast<std::int64_t>((bytes.size() - header_bytes) /
                                                        sizeof(float));
  const std::int64_t expected = expected_weight_floats(spec);
  if (actual != expected) {
    throw Error("weights: expected " + std::to_string(expected) + " parameter floats, got " +
                std::to_string(actual));
  }

  FloatReader reader(reinterpret_cast<const float*>(bytes.data() + header_bytes), actual);
  int conv_no = 0;
  for (LayerNode& node : spec.layers) {
    if (node.kind != LayerKind::conv) continue;
    const std::string where = "conv layer " + std::to_string(conv_no++);
    LayerParams<float> p;
    reader.take(p.bias, node.filters, where + " bias");
    if (node.batch_normalize) {
      BatchNormStats<float> bn;
      bn.shift = std::move(p.bias);  // darknet stores the bn shift in the bias slot
      p.bias.assign(static_cast<std::size_t>(node.filters), 0.0f);
      reader.take(bn.scale, node.filters, where + " bn scale");
      reader.take(bn.running_mean, node.filters, where + " bn mean");
      reader.take(bn.running_variance, node.filters, where + " bn variance");
      for (float v : bn.running_variance) {
        if (v < 0.0f) throw Error("weights: negative bn variance in " + where);
      }
      p.batchnorm = std::move(bn);
    }
    p.weights = Tensorf({node.filters, node.in_channels, node.size, node.size});
    reader.take(p.weights.data(), p.weights.size(), where + " weights");
    node.params = std::move(p);
  }
}

void load_weights_file(const std::string& path, NetworkSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("weights: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  load_weights(bytes, spec);
}

std::vector<std::uint8_t> serialize_weights(const NetworkSpec& spec) {
  std::vector<std::uint8_t> out(kHeaderWords * sizeof(std::int32_t), 0);
  const std::int32_t header[kHeaderWords] = {0, 2, 0, 0, 0};  // major, minor, revision, seen
  std::memcpy(out.data(), header, sizeof(header));

  auto put = [&out](const float* src, std::int64_t n) {
    const std::size_t offset = out.size();
    out.resize(offset + static_cast<std::size_t>(n) * sizeof(float));
    std::memcpy(out.data() + offset, src, static_cast<std::size_t>(n) * sizeof(float));
  };

  for (const LayerNode& node : spec.layers) {
    if (node.kind != LayerKind::conv) continue;
    if (!node.params) {
      throw Error("weights: conv layer has no parameters to serialize");
    }
    const LayerParams<float>& p = *node.params;
    if (node.batch_normalize) {
      const BatchNormStats<float>& bn = *p.batchnorm;
      put(bn.shift.data(), node.filters);
      put(bn.scale.data(), node.filters);
      put(bn.running_mean.data(), node.filters);
      put(bn.running_variance.data(), node.filters);
    } else {
      put(p.bias.data(), node.filters);
    }
    put(p.weights.data(), p.weights.size());
  }
  return out;
}

void save_weights_file(const std::string& path, const NetworkSpec& spec) {
  const std::vector<std::uint8_t> bytes = serialize_weights(spec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("weights: cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("weights: write to '" + path + "' failed");
}

}  // namespace yolocam
