#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "yolocam/tensor.hpp"

// Forward/backward kernels for the closed Tiny-YOLO-v3 layer set:
// conv2d (+inference-mode batchnorm), leaky_relu, sigmoid, maxpool,
// nearest-neighbor 2x upsample and channel concat. Everything is a pure
// function of its inputs; conv runs as im2col + Eigen GEMM.

namespace yolocam {

template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct BatchNormStats {
  std::vector<Scalar> scale;
  std::vector<Scalar> shift;
  std::vector<Scalar> running_mean;
  std::vector<Scalar> running_variance;
};

/// Parameters of one convolution layer. When batchnorm is present the bias
/// is folded into the shift and ignored by the kernels.
template <typename Scalar>
struct LayerParams {
  Tensor<Scalar> weights;  // OxIxKhxKw
  std::vector<Scalar> bias;
  std::optional<BatchNormStats<Scalar>> batchnorm;
  Scalar epsilon = Scalar(1e-5);
};

namespace detail {

template <typename Scalar>
void validate_conv_args(const Tensor<Scalar>& input, const LayerParams<Scalar>& p,
                        int stride, int pad) {
  if (input.rank() != 3) {
    throw Error("conv2d: input must be CxHxW, got " + shape_string(input.shape()));
  }
  if (p.weights.rank() != 4) {
    throw Error("conv2d: weights must be OxIxKhxKw, got " + shape_string(p.weights.shape()));
  }
  if (p.weights.extent(1) != input.extent(0)) {
    throw Error("conv2d: input channels " + std::to_string(input.extent(0)) +
                " != weights input channels " + std::to_string(p.weights.extent(1)));
  }
  const int out_c = p.weights.extent(0);
  if (static_cast<int>(p.bias.size()) != out_c) {
    throw Error("conv2d: bias length " + std::to_string(p.bias.size()) +
                " != output channels " + std::to_string(out_c));
  }
  if (p.batchnorm) {
    const auto& bn = *p.batchnorm;
    const std::size_t n = static_cast<std::size_t>(out_c);
    if (bn.scale.size() != n || bn.shift.size() != n || bn.running_mean.size() != n ||
        bn.running_variance.size() != n) {
      throw Error("conv2d: batchnorm vectors must all have length " + std::to_string(out_c));
    }
    for (Scalar v : bn.running_variance) {
      if (v < Scalar(0)) throw Error("conv2d: negative running variance");
    }
  }
  if (stride < 1) throw Error("conv2d: stride must be >= 1, got " + std::to_string(stride));
  if (pad < 0) throw Error("conv2d: pad must be >= 0, got " + std::to_string(pad));
}

inline int conv_out_extent(int in, int kernel, int stride, int pad, const char* axis) {
  const int span = in + 2 * pad - kernel;
  if (span < 0 || span % stride != 0) {
    throw Error(std::string("conv2d: non-integer output size along ") + axis + ": (" +
                std::to_string(in) + " + 2*" + std::to_string(pad) + " - " +
                std::to_string(kernel) + ") / " + std::to_string(stride) + " + 1");
  }
  return span / stride + 1;
}

// col has C_in*Kh*Kw rows and out_h*out_w columns, row-major.
template <typename Scalar>
void im2col(const Tensor<Scalar>& input, int kh, int kw, int stride, int pad,
            int out_h, int out_w, Scalar* col) {
  const int in_c = input.extent(0), in_h = input.extent(1), in_w = input.extent(2);
  const Scalar* im = input.data();
  for (int c = 0; c < in_c; ++c, im += static_cast<std::int64_t>(in_h) * in_w) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in_h) {
            for (int ox = 0; ox < out_w; ++ox) *col++ = Scalar(0);
            continue;
          }
          const Scalar* row = im + static_cast<std::int64_t>(iy) * in_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            *col++ = (ix >= 0 && ix < in_w) ? row[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-accumulate columns back into the image.
template <typename Scalar>
void col2im_accumulate(const Scalar* col, int in_c, int in_h, int in_w, int kh, int kw,
                       int stride, int pad, int out_h, int out_w, Scalar* im) {
  for (int c = 0; c < in_c; ++c, im += static_cast<std::int64_t>(in_h) * in_w) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in_h) {
            col += out_w;
            continue;
          }
          Scalar* row = im + static_cast<std::int64_t>(iy) * in_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < in_w) row[ix] += *col;
            ++col;
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Cross-correlation, then inference-mode batchnorm (scale/shift with fixed
/// running statistics, bias omitted) or bias addition.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const LayerParams<Scalar>& p,
                              int stride, int pad) {
  detail::validate_conv_args(input, p, stride, pad);
  const int out_c = p.weights.extent(0);
  const int kh = p.weights.extent(2), kw = p.weights.extent(3);
  const int out_h = detail::conv_out_extent(input.extent(1), kh, stride, pad, "height");
  const int out_w = detail::conv_out_extent(input.extent(2), kw, stride, pad, "width");

  const std::int64_t k = static_cast<std::int64_t>(input.extent(0)) * kh * kw;
  const std::int64_t n = static_cast<std::int64_t>(out_h) * out_w;
  std::vector<Scalar> col(static_cast<std::size_t>(k * n));
  detail::im2col(input, kh, kw, stride, pad, out_h, out_w, col.data());

  Tensor<Scalar> out({out_c, out_h, out_w});
  Eigen::Map<const MatrixRM<Scalar>> w_mat(p.weights.data(), out_c, k);
  Eigen::Map<const MatrixRM<Scalar>> col_mat(col.data(), k, n);
  Eigen::Map<MatrixRM<Scalar>> out_mat(out.data(), out_c, n);
  out_mat.noalias() = w_mat * col_mat;

  if (p.batchnorm) {
    const auto& bn = *p.batchnorm;
    for (int c = 0; c < out_c; ++c) {
      const Scalar inv = Scalar(1) / std::sqrt(bn.running_variance[c] + p.epsilon);
      out_mat.row(c) = (out_mat.row(c).array() - bn.running_mean[c]) * (bn.scale[c] * inv) +
                       bn.shift[c];
    }
  } else {
    for (int c = 0; c < out_c; ++c) out_mat.row(c).array() += p.bias[c];
  }
  return out;
}

/// Gradient of conv2d_forward with respect to its input; batchnorm is
/// differentiated with fixed running statistics.
template <typename Scalar>
Tensor<Scalar> conv2d_backward_input(const Tensor<Scalar>& grad_out, const LayerParams<Scalar>& p,
                                     int stride, int pad, const std::vector<int>& input_shape) {
  if (input_shape.size() != 3) {
    throw Error("conv2d_backward_input: input_shape must be CxHxW, got " +
                shape_string(input_shape));
  }
  const Tensor<Scalar> probe(input_shape);
  detail::validate_conv_args(probe, p, stride, pad);
  const int out_c = p.weights.extent(0);
  const int kh = p.weights.extent(2), kw = p.weights.extent(3);
  const int out_h = detail::conv_out_extent(input_shape[1], kh, stride, pad, "height");
  const int out_w = detail::conv_out_extent(input_shape[2], kw, stride, pad, "width");
  if (grad_out.rank() != 3 || grad_out.extent(0) != out_c || grad_out.extent(1) != out_h ||
      grad_out.extent(2) != out_w) {
    throw Error("conv2d_backward_input: grad_out " + shape_string(grad_out.shape()) +
                " does not match forward output " +
                shape_string({out_c, out_h, out_w}));
  }

  const std::int64_t k = static_cast<std::int64_t>(input_shape[0]) * kh * kw;
  const std::int64_t n = static_cast<std::int64_t>(out_h) * out_w;

  // d(bn)/d(conv) is the per-channel factor scale/sqrt(var+eps).
  MatrixRM<Scalar> g(out_c, n);
  g = Eigen::Map<const MatrixRM<Scalar>>(grad_out.data(), out_c, n);
  if (p.batchnorm) {
    const auto& bn = *p.batchnorm;
    for (int c = 0; c < out_c; ++c) {
      g.row(c) *= bn.scale[c] / std::sqrt(bn.running_variance[c] + p.epsilon);
    }
  }

  std::vector<Scalar> col(static_cast<std::size_t>(k * n));
  Eigen::Map<const MatrixRM<Scalar>> w_mat(p.weights.data(), out_c, k);
  Eigen::Map<MatrixRM<Scalar>> col_mat(col.data(), k, n);
  col_mat.noalias() = w_mat.transpose() * g;

  Tensor<Scalar> grad_in(input_shape);
  detail::col2im_accumulate(col.data(), input_shape[0], input_shape[1], input_shape[2], kh, kw,
                            stride, pad, out_h, out_w, grad_in.data());
  return grad_in;
}

template <typename Scalar>
Tensor<Scalar> leaky_relu_forward(const Tensor<Scalar>& input, Scalar slope = Scalar(0.1)) {
  if (!(slope > Scalar(0) && slope < Scalar(1))) {
    throw Error("leaky_relu: slope must be in (0,1), got " + std::to_string(slope));
  }
  Tensor<Scalar> out(input.shape());
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const Scalar x = input[i];
    out[i] = x >= Scalar(0) ? x : slope * x;
  }
  return out;
}

// The derivative is recovered from the forward output: leaky_relu preserves
// sign for slope in (0,1), and the derivative at exactly 0 is defined as 1.
template <typename Scalar>
Tensor<Scalar> leaky_relu_backward(const Tensor<Scalar>& output, const Tensor<Scalar>& grad_out,
                                   Scalar slope = Scalar(0.1)) {
  if (!output.same_shape(grad_out)) {
    throw Error("leaky_relu_backward: output " + shape_string(output.shape()) +
                " vs grad_out " + shape_string(grad_out.shape()));
  }
  Tensor<Scalar> grad_in(output.shape());
  for (std::int64_t i = 0; i < output.size(); ++i) {
    grad_in[i] = output[i] >= Scalar(0) ? grad_out[i] : slope * grad_out[i];
  }
  return grad_in;
}

template <typename Scalar>
Scalar sigmoid_scalar(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
Tensor<Scalar> sigmoid_forward(const Tensor<Scalar>& input) {
  Tensor<Scalar> out(input.shape());
  for (std::int64_t i = 0; i < input.size(); ++i) out[i] = sigmoid_scalar(input[i]);
  return out;
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& output, const Tensor<Scalar>& grad_out) {
  if (!output.same_shape(grad_out)) {
    throw Error("sigmoid_backward: output " + shape_string(output.shape()) + " vs grad_out " +
                shape_string(grad_out.shape()));
  }
  Tensor<Scalar> grad_in(output.shape());
  for (std::int64_t i = 0; i < output.size(); ++i) {
    grad_in[i] = grad_out[i] * output[i] * (Scalar(1) - output[i]);
  }
  return grad_in;
}

template <typename Scalar>
struct MaxPoolResult {
  Tensor<Scalar> output;
  std::vector<std::int64_t> argmax;  // flat input index per output element
};

/// Per-window max. Ties break toward the first element in row-major window
/// order. size==2/stride==1 (Tiny YOLO's final pool) keeps the spatial size
/// by padding the bottom/right edge with -inf.
template <typename Scalar>
MaxPoolResult<Scalar> maxpool_forward(const Tensor<Scalar>& input, int size, int stride) {
  if (input.rank() != 3) {
    throw Error("maxpool: input must be CxHxW, got " + shape_string(input.shape()));
  }
  if (size < 1 || stride < 1) {
    throw Error("maxpool: size and stride must be >= 1");
  }
  const int c_n = input.extent(0), in_h = input.extent(1), in_w = input.extent(2);
  const bool same_size = (size == 2 && stride == 1);
  int out_h, out_w;
  if (same_size) {
    out_h = in_h;
    out_w = in_w;
  } else {
    if (in_h < size || in_w < size || (in_h - size) % stride != 0 || (in_w - size) % stride != 0) {
      throw Error("maxpool: window size " + std::to_string(size) + " stride " +
                  std::to_string(stride) + " does not tile input " + shape_string(input.shape()));
    }
    out_h = (in_h - size) / stride + 1;
    out_w = (in_w - size) / stride + 1;
  }

  MaxPoolResult<Scalar> r{Tensor<Scalar>({c_n, out_h, out_w}), {}};
  r.argmax.resize(static_cast<std::size_t>(r.output.size()));
  std::int64_t o = 0;
  for (int c = 0; c < c_n; ++c) {
    const std::int64_t plane = static_cast<std::int64_t>(c) * in_h * in_w;
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox, ++o) {
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        std::int64_t best_idx = -1;
        for (int ky = 0; ky < size; ++ky) {
          const int iy = oy * stride + ky;
          if (iy >= in_h) break;
          for (int kx = 0; kx < size; ++kx) {
            const int ix = ox * stride + kx;
            if (ix >= in_w) break;
            const std::int64_t idx = plane + static_cast<std::int64_t>(iy) * in_w + ix;
            const Scalar v = input[idx];
            if (v > best) {
              best = v;
              best_idx = idx;
            }
          }
        }
        r.output[o] = best;
        r.argmax[static_cast<std::size_t>(o)] = best_idx;
      }
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool_backward(const std::vector<std::int64_t>& argmax,
                                const std::vector<int>& input_shape,
                                const Tensor<Scalar>& grad_out) {
  if (argmax.size() != static_cast<std::size_t>(grad_out.size())) {
    throw Error("maxpool_backward: argmax size " + std::to_string(argmax.size()) +
                " vs grad_out " + shape_string(grad_out.shape()));
  }
  Tensor<Scalar> grad_in(input_shape);
  for (std::int64_t o = 0; o < grad_out.size(); ++o) {
    grad_in[argmax[static_cast<std::size_t>(o)]] += grad_out[o];
  }
  return grad_in;
}

/// Nearest-neighbor 2x spatial replication.
template <typename Scalar>
Tensor<Scalar> upsample2x_forward(const Tensor<Scalar>& input) {
  if (input.rank() != 3) {
    throw Error("upsample2x: input must be CxHxW, got " + shape_string(input.shape()));
  }
  const int c_n = input.extent(0), in_h = input.extent(1), in_w = input.extent(2);
  Tensor<Scalar> out({c_n, 2 * in_h, 2 * in_w});
  for (int c = 0; c < c_n; ++c) {
    for (int y = 0; y < 2 * in_h; ++y) {
      const Scalar* src = input.data() +
                          (static_cast<std::int64_t>(c) * in_h + y / 2) * in_w;
      Scalar* dst = out.data() + (static_cast<std::int64_t>(c) * 2 * in_h + y) * 2 * in_w;
      for (int x = 0; x < in_w; ++x) {
        dst[2 * x] = src[x];
        dst[2 * x + 1] = src[x];
      }
    }
  }
  return out;
}

/// Sums each 2x2 block of grad_out into the corresponding grad_in cell.
template <typename Scalar>
Tensor<Scalar> upsample2x_backward(const Tensor<Scalar>& grad_out) {
  if (grad_out.rank() != 3 || grad_out.extent(1) % 2 != 0 || grad_out.extent(2) % 2 != 0) {
    throw Error("upsample2x_backward: grad_out must be Cx2Hx2W, got " +
                shape_string(grad_out.shape()));
  }
  const int c_n = grad_out.extent(0);
  const int in_h = grad_out.extent(1) / 2, in_w = grad_out.extent(2) / 2;
  Tensor<Scalar> grad_in({c_n, in_h, in_w});
  for (int c = 0; c < c_n; ++c) {
    for (int y = 0; y < 2 * in_h; ++y) {
      const Scalar* src = grad_out.data() +
                          (static_cast<std::int64_t>(c) * 2 * in_h + y) * 2 * in_w;
      Scalar* dst = grad_in.data() + (static_cast<std::int64_t>(c) * in_h + y / 2) * in_w;
      for (int x = 0; x < 2 * in_w; ++x) dst[x / 2] += src[x];
    }
  }
  return grad_in;
}

/// Channel-dimension concatenation in argument order.
template <typename Scalar>
Tensor<Scalar> concat_channels(const std::vector<const Tensor<Scalar>*>& inputs) {
  if (inputs.empty()) throw Error("concat_channels: no inputs");
  const int h = inputs[0]->extent(1), w = inputs[0]->extent(2);
  int channels = 0;
  for (const auto* t : inputs) {
    if (t->rank() != 3) {
      throw Error("concat_channels: inputs must be CxHxW, got " + shape_string(t->shape()));
    }
    if (t->extent(1) != h || t->extent(2) != w) {
      throw Error("concat_channels: spatial mismatch " + shape_string(t->shape()) + " vs " +
                  shape_string(inputs[0]->shape()));
    }
    channels += t->extent(0);
  }
  Tensor<Scalar> out({channels, h, w});
  Scalar* dst = out.data();
  for (const auto* t : inputs) {
    std::copy(t->data(), t->data() + t->size(), dst);
    dst += t->size();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const std::vector<Tensor<Scalar>>& inputs) {
  std::vector<const Tensor<Scalar>*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& t : inputs) ptrs.push_back(&t);
  return concat_channels(ptrs);
}

/// Backward of concat_channels: splits grad at the channel offsets.
template <typename Scalar>
std::vector<Tensor<Scalar>> split_channels(const Tensor<Scalar>& grad,
                                           const std::vector<int>& channel_counts) {
  if (grad.rank() != 3) {
    throw Error("split_channels: grad must be CxHxW, got " + shape_string(grad.shape()));
  }
  int total = 0;
  for (int c : channel_counts) total += c;
  if (total != grad.extent(0)) {
    throw Error("split_channels: channel counts sum to " + std::to_string(total) +
                " but grad has " + std::to_string(grad.extent(0)) + " channels");
  }
  std::vector<Tensor<Scalar>> parts;
  parts.reserve(channel_counts.size());
  const Scalar* src = grad.data();
  for (int c : channel_counts) {
    Tensor<Scalar> part({c, grad.extent(1), grad.extent(2)});
    std::copy(src, src + part.size(), part.data());
    src += part.size();
    parts.push_back(std::move(part));
  }
  return parts;
}

}  // namespace yolocam
