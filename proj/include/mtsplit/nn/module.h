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

#ifndef MTSPLIT_NN_MODULE_H_
#define MTSPLIT_NN_MODULE_H_

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mtsplit/tensor.h"

namespace mtsplit::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
};

// A differentiable layer. Forward caches whatever Backward needs, so every
// Backward call pairs with the most recent Forward on the same instance.
// Backward accumulates into parameter gradients and returns the gradient with
// respect to the forward input.
class Module {
 public:
  virtual ~Module() = default;

  virtual Tensor Forward(const Tensor& input) = 0;
  virtual Tensor Backward(const Tensor& grad_output) = 0;

  // Per-sample output shape for a per-sample input shape (batch dim omitted).
  virtual Shape OutputShape(const Shape& input) const = 0;
  virtual std::unique_ptr<Module> Clone() const = 0;
  virtual std::string Describe() const = 0;

  // Appends this module's parameters, names prefixed with `prefix`.
  virtual void CollectParameters(const std::string& prefix,
                                 std::vector<Parameter*>& out) {
    (void)prefix;
    (void)out;
  }

  std::vector<Parameter*> Parameters(const std::string& prefix = "");
  void ZeroGrad();
  std::size_t ParameterCount();
};

template <typename Derived>
class ClonableModule : public Module {
 public:
  std::unique_ptr<Module> Clone() const override {
    return std::make_unique<Derived>(static_cast<const Derived&>(*this));
  }
};

// Ordered composition. Copying deep-clones the children.
class Sequential final : public Module {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void Add(std::unique_ptr<Module> module);
  template <typename T, typename... Args>
  T& Emplace(Args&&... args) {
    auto module = std::make_unique<T>(std::forward<Args>(args)...);
    T& ref = *module;
    Add(std::move(module));
    return ref;
  }

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Module& layer(std::size_t i) { return *layers_[i]; }
  const Module& layer(std::size_t i) const { return *layers_[i]; }

  // Splits off layers [index, end) into a new Sequential.
  Sequential SplitAt(std::size_t index);

  Tensor Forward(const Tensor& input) override;
  Tensor Backward(const Tensor& grad_output) override;
  Shape OutputShape(const Shape& input) const override;
  std::unique_ptr<Module> Clone() const override {
    return std::make_unique<Sequential>(*this);
  }
  std::string Describe() const override;
  void CollectParameters(const std::string& prefix,
                         std::vector<Parameter*>& out) override;

 private:
  std::vector<std::unique_ptr<Module>> layers_;
};

// Flattens parameter gradients into one vector in collection order.
std::vector<float> FlattenGrads(const std::vector<Parameter*>& params);
// Inverse of FlattenGrads: overwrites the gradients.
void AssignGrads(const std::vector<Parameter*>& params,
                 const std::vector<float>& flat);
std::size_t TotalSize(const std::vector<Parameter*>& params);

// Copies of parameter values, used for best-model snapshots and freeze
// checks.
std::vector<Tensor> SnapshotValues(const std::vector<Parameter*>& params);
void RestoreValues(const std::vector<Parameter*>& params,
                   const std::vector<Tensor>& values);
// FNV-1a over the raw parameter bytes.
std::uint64_t HashValues(const std::vector<Parameter*>& params);

}  // namespace mtsplit::nn

#endif  // MTSPLIT_NN_MODULE_H_
