// Copyright 2026 The mtsplit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mtsplit/nn/layers.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "mtsplit/error.h"

namespace mtsplit::nn {
namespace {

using RowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void RequireRank(const Tensor& t, int rank, const char* layer) {
  Require(t.ndim() == rank, ErrorKind::kConfig,
          std::string(layer) + " expects a rank-" + std::to_string(rank) +
              " input, got " + ShapeToString(t.shape()));
}

Tensor UniformInit(Shape shape, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::RandomUniform(std::move(shape), rng, -bound, bound);
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride,
               std::mt19937_64& rng, bool bias)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(kernel / 2),
      has_bias_(bias) {
  Require(in_channels > 0 && out_channels > 0 && kernel > 0 && stride > 0,
          ErrorKind::kConfig, "conv2d dimensions must be positive");
  const int fan_in = in_channels * kernel * kernel;
  weight_ = Parameter("weight",
                      UniformInit({out_channels, in_channels, kernel, kernel},
                                  fan_in, rng));
  bias_ = Parameter("bias", has_bias_ ? UniformInit({out_channels}, fan_in, rng)
                                      : Tensor({out_channels}));
}

Shape Conv2d::OutputShape(const Shape& input) const {
  Require(input.size() == 3 && input[0] == in_channels_, ErrorKind::kConfig,
          "conv2d expects " + std::to_string(in_channels_) +
              " input channels, got " + ShapeToString(input));
  return {out_channels_, OutSize(input[1]), OutSize(input[2])};
}

std::string Conv2d::Describe() const {
  return "conv" + std::to_string(kernel_) + "x" + std::to_string(kernel_) +
         "(" + std::to_string(in_channels_) + "->" +
         std::to_string(out_channels_) + ",s" + std::to_string(stride_) + ")";
}

void Conv2d::CollectParameters(const std::string& prefix,
                               std::vector<Parameter*>& out) {
  weight_.name = prefix + "weight";
  out.push_back(&weight_);
  if (has_bias_) {
    bias_.name = prefix + "bias";
    out.push_back(&bias_);
  }
}

Tensor Conv2d::Forward(const Tensor& input) {
  RequireRank(input, 4, "conv2d");
  Require(input.dim(1) == in_channels_, ErrorKind::kConfig,
          "conv2d channel mismatch: expected " + std::to_string(in_channels_) +
              ", got " + ShapeToString(input.shape()));
  const int n = input.dim(0), h = input.dim(2), w = input.dim(3);
  const int ho = OutSize(h), wo = OutSize(w);
  Require(ho > 0 && wo > 0, ErrorKind::kConfig, "conv2d input too small");
  input_shape_ = input.shape();
  const int k_rows = in_channels_ * kernel_ * kernel_;
  const int positions = ho * wo;
  Tensor output({n, out_channels_, ho, wo});
  ConstMatrixMap weight(weight_.value.data(), out_channels_, k_rows);
  columns_.assign(static_cast<std::size_t>(n), Tensor());
  for (int s = 0; s < n; ++s) {
    const float* x = input.data() + static_cast<std::size_t>(s) * in_channels_ * h * w;
    Tensor& col = columns_[s];
    if (Pointwise()) {
      col = Tensor({k_rows, positions},
                   std::vector<float>(x, x + static_cast<std::size_t>(k_rows) * positions));
    } else {
      col = Tensor({k_rows, positions});
      float* c = col.data();
      for (int ci = 0; ci < in_channels_; ++ci) {
        for (int ki = 0; ki < kernel_; ++ki) {
          for (int kj = 0; kj < kernel_; ++kj) {
            float* row = c + ((ci * kernel_ + ki) * kernel_ + kj) * positions;
            for (int oh = 0; oh < ho; ++oh) {
              const int ih = oh * stride_ - pad_ + ki;
              for (int ow = 0; ow < wo; ++ow) {
                const int iw = ow * stride_ - pad_ + kj;
                row[oh * wo + ow] = (ih >= 0 && ih < h && iw >= 0 && iw < w)
                                        ? x[(ci * h + ih) * w + iw]
                                        : 0.0f;
              }
            }
          }
        }
      }
    }
    MatrixMap out(output.data() + static_cast<std::size_t>(s) * out_channels_ * positions,
                  out_channels_, positions);
    out.noalias() = weight * ConstMatrixMap(col.data(), k_rows, positions);
    if (has_bias_) {
      for (int co = 0; co < out_channels_; ++co) {
        out.row(co).array() += bias_.value[co];
      }
    }
  }
  return output;
}

Tensor Conv2d::Backward(const Tensor& grad_output) {
  const int n = input_shape_[0], h = input_shape_[2], w = input_shape_[3];
  const int ho = OutSize(h), wo = OutSize(w);
  const int k_rows = in_channels_ * kernel_ * kernel_;
  const int positions = ho * wo;
  Require(grad_output.shape() == Shape({n, out_channels_, ho, wo}),
          ErrorKind::kConfig, "conv2d backward shape mismatch");
  Tensor grad_input(input_shape_);
  ConstMatrixMap weight(weight_.value.data(), out_channels_, k_rows);
  MatrixMap grad_weight(weight_.grad.data(), out_channels_, k_rows);
  Tensor dcol({k_rows, positions});
  for (int s = 0; s < n; ++s) {
    ConstMatrixMap dy(grad_output.data() + static_cast<std::size_t>(s) * out_channels_ * positions,
                      out_channels_, positions);
    ConstMatrixMap col(columns_[s].data(), k_rows, positions);
    grad_weight.noalias() += dy * col.transpose();
    if (has_bias_) {
      for (int co = 0; co < out_channels_; ++co) bias_.grad[co] += dy.row(co).sum();
    }
    float* dx = grad_input.data() + static_cast<std::size_t>(s) * in_channels_ * h * w;
    if (Pointwise()) {
      MatrixMap(dx, k_rows, positions).noalias() = weight.transpose() * dy;
      continue;
    }
    MatrixMap(dcol.data(), k_rows, positions).noalias() = weight.transpose() * dy;
    const float* c = dcol.data();
    for (int ci = 0; ci < in_channels_; ++ci) {
      for (int ki = 0; ki < kernel_; ++ki) {
        for (int kj = 0; kj < kernel_; ++kj) {
          const float* row = c + ((ci * kernel_ + ki) * kernel_ + kj) * positions;
          for (int oh = 0; oh < ho; ++oh) {
            const int ih = oh * stride_ - pad_ + ki;
            if (ih < 0 || ih >= h) continue;
            for (int ow = 0; ow < wo; ++ow) {
              const int iw = ow * stride_ - pad_ + kj;
              if (iw < 0 || iw >= w) continue;
              dx[(ci * h + ih) * w + iw] += row[oh * wo + ow];
            }
          }
        }
      }
    }
  }
  return grad_input;
}

// ---------------------------------------------------------------- GroupNorm

GroupNorm::GroupNorm(int groups, int channels, float eps)
    : groups_(groups),
      channels_(channels),
      eps_(eps),
      gamma_("gamma", Tensor({channels}, 1.0f)),
      beta_("beta", Tensor({channels})) {
  Require(groups > 0 && channels % groups == 0, ErrorKind::kConfig,
          "group norm: channels must be divisible by groups");
}

std::string GroupNorm::Describe() const {
  return "group_norm(" + std::to_string(groups_) + "," +
         std::to_string(channels_) + ")";
}

void GroupNorm::CollectParameters(const std::string& prefix,
                                  std::vector<Parameter*>& out) {
  gamma_.name = prefix + "gamma";
  beta_.name = prefix + "beta";
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

Tensor GroupNorm::Forward(const Tensor& input) {
  RequireRank(input, 4, "group_norm");
  Require(input.dim(1) == channels_, ErrorKind::kConfig,
          "group norm channel mismatch");
  const int n = input.dim(0);
  const std::size_t hw = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  const int per_group = channels_ / groups_;
  const std::size_t group_size = per_group * hw;
  normalized_ = Tensor(input.shape());
  inv_std_.assign(static_cast<std::size_t>(n) * groups_, 0.0f);
  Tensor output(input.shape());
  for (int s = 0; s < n; ++s) {
    for (int g = 0; g < groups_; ++g) {
      const std::size_t base = (static_cast<std::size_t>(s) * channels_ + g * per_group) * hw;
      const float* x = input.data() + base;
      double mean = 0.0;
      for (std::size_t i = 0; i < group_size; ++i) mean += x[i];
      mean /= static_cast<double>(group_size);
      double var = 0.0;
      for (std::size_t i = 0; i < group_size; ++i) {
        const double d = x[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(group_size);
      const float inv_std = static_cast<float>(1.0 / std::sqrt(var + eps_));
      inv_std_[s * groups_ + g] = inv_std;
      float* xhat = normalized_.data() + base;
      float* y = output.data() + base;
      for (int c = 0; c < per_group; ++c) {
        const int channel = g * per_group + c;
        const float gamma = gamma_.value[channel], beta = beta_.value[channel];
        for (std::size_t i = 0; i < hw; ++i) {
          const std::size_t j = c * hw + i;
          xhat[j] = static_cast<float>((x[j] - mean) * inv_std);
          y[j] = gamma * xhat[j] + beta;
        }
      }
    }
  }
  return output;
}

Tensor GroupNorm::Backward(const Tensor& grad_output) {
  const Shape& shape = normalized_.shape();
  Require(grad_output.shape() == shape, ErrorKind::kConfig,
          "group norm backward shape mismatch");
  const int n = shape[0];
  const std::size_t hw = static_cast<std::size_t>(shape[2]) * shape[3];
  const int per_group = channels_ / groups_;
  const double group_size = static_cast<double>(per_group * hw);
  Tensor grad_input(shape);
  for (int s = 0; s < n; ++s) {
    for (int g = 0; g < groups_; ++g) {
      const std::size_t base = (static_cast<std::size_t>(s) * channels_ + g * per_group) * hw;
      const float* dy = grad_output.data() + base;
      const float* xhat = normalized_.data() + base;
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int c = 0; c < per_group; ++c) {
        const int channel = g * per_group + c;
        const float gamma = gamma_.value[channel];
        double dgamma = 0.0, dbeta = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
          const std::size_t j = c * hw + i;
          dgamma += static_cast<double>(dy[j]) * xhat[j];
          dbeta += dy[j];
          const double dxhat = static_cast<double>(dy[j]) * gamma;
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat[j];
        }
        gamma_.grad[channel] += static_cast<float>(dgamma);
        beta_.grad[channel] += static_cast<float>(dbeta);
      }
      const double inv_std = inv_std_[s * groups_ + g];
      float* dx = grad_input.data() + base;
      for (int c = 0; c < per_group; ++c) {
        const float gamma = gamma_.value[g * per_group + c];
        for (std::size_t i = 0; i < hw; ++i) {
          const std::size_t j = c * hw + i;
          const double dxhat = static_cast<double>(dy[j]) * gamma;
          dx[j] = static_cast<float>(
              inv_std / group_size *
              (group_size * dxhat - sum_dxhat - xhat[j] * sum_dxhat_xhat));
        }
      }
    }
  }
  return grad_input;
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::Forward(const Tensor& input) {
  output_ = input;
  for (float& v : output_.values()) v = v > 0.0f ? v : 0.0f;
  return output_;
}

Tensor ReLU::Backward(const Tensor& grad_output) {
  Tensor g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (output_[i] <= 0.0f) g[i] = 0.0f;
  }
  return g;
}

// ---------------------------------------------------------------- Sigmoid

Tensor Sigmoid::Forward(const Tensor& input) {
  output_ = input;
  for (float& v : output_.values()) v = 1.0f / (1.0f + std::exp(-v));
  return output_;
}

Tensor Sigmoid::Backward(const Tensor& grad_output) {
  Tensor g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] *= output_[i] * (1.0f - output_[i]);
  }
  return g;
}

// ---------------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::Forward(const Tensor& input) {
  RequireRank(input, 4, "global_avg_pool");
  input_shape_ = input.shape();
  const int n = input.dim(0), c = input.dim(1);
  const std::size_t hw = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  Tensor out({n, c});
  for (int i = 0; i < n * c; ++i) {
    double s = 0.0;
    const float* x = input.data() + i * hw;
    for (std::size_t j = 0; j < hw; ++j) s += x[j];
    out[i] = static_cast<float>(s / static_cast<double>(hw));
  }
  return out;
}

Tensor GlobalAvgPool::Backward(const Tensor& grad_output) {
  Tensor g(input_shape_);
  const std::size_t hw = static_cast<std::size_t>(input_shape_[2]) * input_shape_[3];
  const float scale = 1.0f / static_cast<float>(hw);
  for (std::size_t i = 0; i < grad_output.size(); ++i) {
    std::fill_n(g.data() + i * hw, hw, grad_output[i] * scale);
  }
  return g;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, std::mt19937_64& rng)
    : in_features_(in_features),
      out_features_(out_features),
      weight_("weight", UniformInit({out_features, in_features}, in_features, rng)),
      bias_("bias", UniformInit({out_features}, in_features, rng)) {
  Require(in_features > 0 && out_features > 0, ErrorKind::kConfig,
          "linear dimensions must be positive");
}

Shape Linear::OutputShape(const Shape& input) const {
  Require(input.size() == 1 && input[0] == in_features_, ErrorKind::kConfig,
          "linear expects " + std::to_string(in_features_) + " features");
  return {out_features_};
}

std::string Linear::Describe() const {
  return "linear(" + std::to_string(in_features_) + "->" +
         std::to_string(out_features_) + ")";
}

void Linear::CollectParameters(const std::string& prefix,
                               std::vector<Parameter*>& out) {
  weight_.name = prefix + "weight";
  bias_.name = prefix + "bias";
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Tensor Linear::Forward(const Tensor& input) {
  RequireRank(input, 2, "linear");
  Require(input.dim(1) == in_features_, ErrorKind::kConfig,
          "linear feature mismatch");
  input_ = input;
  const int n = input.dim(0);
  Tensor out({n, out_features_});
  MatrixMap y(out.data(), n, out_features_);
  y.noalias() = ConstMatrixMap(input.data(), n, in_features_) *
                ConstMatrixMap(weight_.value.data(), out_features_, in_features_)
                    .transpose();
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < out_features_; ++o) y(i, o) += bias_.value[o];
  }
  return out;
}

Tensor Linear::Backward(const Tensor& grad_output) {
  const int n = input_.dim(0);
  Require(grad_output.shape() == Shape({n, out_features_}), ErrorKind::kConfig,
          "linear backward shape mismatch");
  ConstMatrixMap dy(grad_output.data(), n, out_features_);
  ConstMatrixMap x(input_.data(), n, in_features_);
  MatrixMap(weight_.grad.data(), out_features_, in_features_).noalias() +=
      dy.transpose() * x;
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < out_features_; ++o) bias_.grad[o] += dy(i, o);
  }
  Tensor grad_input({n, in_features_});
  MatrixMap(grad_input.data(), n, in_features_).noalias() =
      dy * ConstMatrixMap(weight_.value.data(), out_features_, in_features_);
  return grad_input;
}

// ---------------------------------------------------------------- Upsample

Upsample::Upsample(int factor) : factor_(factor) {
  Require(factor >= 1, ErrorKind::kConfig, "upsample factor must be >= 1");
}

Shape Upsample::OutputShape(const Shape& input) const {
  return {input[0], input[1] * factor_, input[2] * factor_};
}

std::string Upsample::Describe() const {
  return "upsample_x" + std::to_string(factor_);
}

Tensor Upsample::Forward(const Tensor& input) {
  RequireRank(input, 4, "upsample");
  input_shape_ = input.shape();
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int ho = h * factor_, wo = w * factor_;
  Tensor out({n, c, ho, wo});
  for (int p = 0; p < n * c; ++p) {
    const float* x = input.data() + static_cast<std::size_t>(p) * h * w;
    float* y = out.data() + static_cast<std::size_t>(p) * ho * wo;
    for (int i = 0; i < ho; ++i) {
      for (int j = 0; j < wo; ++j) y[i * wo + j] = x[(i / factor_) * w + j / factor_];
    }
  }
  return out;
}

Tensor Upsample::Backward(const Tensor& grad_output) {
  const int n = input_shape_[0], c = input_shape_[1], h = input_shape_[2],
            w = input_shape_[3];
  const int ho = h * factor_, wo = w * factor_;
  Tensor g(input_shape_);
  for (int p = 0; p < n * c; ++p) {
    const float* dy = grad_output.data() + static_cast<std::size_t>(p) * ho * wo;
    float* dx = g.data() + static_cast<std::size_t>(p) * h * w;
    for (int i = 0; i < ho; ++i) {
      for (int j = 0; j < wo; ++j) dx[(i / factor_) * w + j / factor_] += dy[i * wo + j];
    }
  }
  return g;
}

}  // namespace mtsplit::nn
