// Copyright 2026 The hyperhier Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The toy model: an affine encoder producing origin-tangent embeddings, a
// Euclidean linear classifier over the leaf classes, and the leaf proxies.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hyperhier/kernels.hpp"
#include "hyperhier/proxy.hpp"

namespace hyperhier {

// v = W^T x + b, W is feature_dim x embed_dim.
struct Encoder {
  Matrix weight;
  Vec bias;

  std::size_t feature_dim() const { return weight.rows; }
  std::size_t embed_dim() const { return weight.cols; }
  Vec apply(std::span<const double> x) const;
};

// logits = H v + b, H is num_classes x embed_dim.
struct ClassifierHead {
  Matrix weight;
  Vec bias;

  Vec apply(std::span<const double> v) const;
};

// One labeled feature vector; label is a class id (negative for samples
// outside the known classes).
struct Sample {
  Vec features;
  int label = -1;
};

struct Model {
  Encoder encoder;
  ClassifierHead head;
  ProxyParams proxies;
};

struct ModelInit {
  std::size_t feature_dim = 0;
  std::size_t embed_dim = 0;
  std::size_t num_classes = 0;
  double encoder_scale = 0.1;  // std of W entries times sqrt(feature_dim)
  double head_scale = 0.1;
  double proxy_scale = 0.1;
};

Model init_model(const Hierarchy& h, const ModelInit& init, std::uint64_t seed);

// Visits every trainable scalar in a fixed order: encoder weight, encoder
// bias, head weight, head bias, leaf tangents (class-major).
void for_each_parameter(Model& m, const std::function<void(double&)>& fn);
std::size_t parameter_count(const Model& m);
Vec flatten(const Model& m);
void unflatten(std::span<const double> flat, Model& m);

}  // namespace hyperhier
