/*
 * Copyright 2026 The FairLens Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "fairlens/error.hpp"

namespace fairlens {

// Embeddings (one row per sample) paired with one protected-attribute label
// per sample.
struct RepresentationSet {
  Eigen::MatrixXd representations;
  std::vector<int> attributes;
  std::vector<std::string> attribute_names;

  Eigen::Index size() const { return representations.rows(); }
  Eigen::Index dim() const { return representations.cols(); }
  int num_classes() const { return static_cast<int>(attribute_names.size()); }

  void validate() const {
    if (representations.rows() < 2) throw DataError("representation set needs n >= 2 rows");
    if (representations.cols() < 1) throw DataError("representation set needs d >= 1 columns");
    if (static_cast<Eigen::Index>(attributes.size()) != representations.rows()) {
      throw DimensionError("attribute count " + std::to_string(attributes.size()) +
                           " != representation rows " +
                           std::to_string(representations.rows()));
    }
    if (attribute_names.empty()) throw DataError("representation set has no attribute classes");
    const int m = num_classes();
    for (std::size_t i = 0; i < attributes.size(); ++i) {
      if (attributes[i] < 0 || attributes[i] >= m) {
        throw DataError("attribute " + std::to_string(attributes[i]) + " at row " +
                        std::to_string(i) + " outside [0, " + std::to_string(m) + ")");
      }
    }
    if (!representations.allFinite()) throw DataError("representations contain non-finite values");
  }

  // Number of distinct attribute values that actually occur.
  int observed_classes() const {
    std::vector<bool> seen(attribute_names.size(), false);
    for (int z : attributes) {
      if (z >= 0 && z < num_classes()) seen[z] = true;
    }
    return static_cast<int>(std::count(seen.begin(), seen.end(), true));
  }
};

// Builds a set, naming classes "0".."m-1" when names are not supplied. The
// class count is the larger of the name count and max(label) + 1.
inline RepresentationSet make_representation_set(Eigen::MatrixXd representations,
                                                 std::vector<int> attributes,
                                                 std::vector<std::string> names = {}) {
  RepresentationSet set;
  set.representations = std::move(representations);
  set.attributes = std::move(attributes);
  int m = static_cast<int>(names.size());
  for (int z : set.attributes) m = std::max(m, z + 1);
  for (int i = static_cast<int>(names.size()); i < m; ++i) names.push_back(std::to_string(i));
  set.attribute_names = std::move(names);
  set.validate();
  return set;
}

}  // namespace fairlens
