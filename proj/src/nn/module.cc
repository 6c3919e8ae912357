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

#include "mtsplit/nn/module.h"

#include <algorithm>
#include <cstring>

#include "mtsplit/error.h"

namespace mtsplit::nn {

std::vector<Parameter*> Module::Parameters(const std::string& prefix) {
  std::vector<Parameter*> out;
  CollectParameters(prefix, out);
  return out;
}

void Module::ZeroGrad() {
  for (Parameter* p : Parameters()) p->grad.Fill(0.0f);
}

std::size_t Module::ParameterCount() { return TotalSize(Parameters()); }

Sequential::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& layer : other.layers_) layers_.push_back(layer->Clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

void Sequential::Add(std::unique_ptr<Module> module) {
  layers_.push_back(std::move(module));
}

Sequential Sequential::SplitAt(std::size_t index) {
  Require(index <= layers_.size(), ErrorKind::kConfig,
          "split index past end of sequential");
  Sequential tail;
  for (std::size_t i = index; i < layers_.size(); ++i) {
    tail.layers_.push_back(std::move(layers_[i]));
  }
  layers_.resize(index);
  return tail;
}

Tensor Sequential::Forward(const Tensor& input) {
  Tensor x = input;
  for (auto& layer : layers_) x = layer->Forward(x);
  return x;
}

Tensor Sequential::Backward(const Tensor& grad_output) {
  Tensor g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->Backward(g);
  }
  return g;
}

Shape Sequential::OutputShape(const Shape& input) const {
  Shape s = input;
  for (const auto& layer : layers_) s = layer->OutputShape(s);
  return s;
}

std::string Sequential::Describe() const {
  std::string out = "sequential[";
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i) out += ", ";
    out += layers_[i]->Describe();
  }
  return out + "]";
}

void Sequential::CollectParameters(const std::string& prefix,
                                   std::vector<Parameter*>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->CollectParameters(prefix + std::to_string(i) + ".", out);
  }
}

std::size_t TotalSize(const std::vector<Parameter*>& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

std::vector<float> FlattenGrads(const std::vector<Parameter*>& params) {
  std::vector<float> flat;
  flat.reserve(TotalSize(params));
  for (const Parameter* p : params) {
    flat.insert(flat.end(), p->grad.storage().begin(), p->grad.storage().end());
  }
  return flat;
}

void AssignGrads(const std::vector<Parameter*>& params,
                 const std::vector<float>& flat) {
  Require(flat.size() == TotalSize(params), ErrorKind::kConfig,
          "flat gradient length does not match parameter set");
  std::size_t offset = 0;
  for (Parameter* p : params) {
    std::copy_n(flat.begin() + offset, p->grad.size(), p->grad.data());
    offset += p->grad.size();
  }
}

std::vector<Tensor> SnapshotValues(const std::vector<Parameter*>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

void RestoreValues(const std::vector<Parameter*>& params,
                   const std::vector<Tensor>& values) {
  Require(params.size() == values.size(), ErrorKind::kConfig,
          "snapshot does not match parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

std::uint64_t HashValues(const std::vector<Parameter*>& params) {
  std::uint64_t h = 1469598103934665603ull;
  for (const Parameter* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->value.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace mtsplit::nn
