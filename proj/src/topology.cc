/* Copyright 2026 The gradsync Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "gradsync/topology.h"

#include <string>

namespace gradsync::collectives {

Topology::Topology(int workers, int group_size)
    : workers_(workers), group_size_(group_size) {
  if (workers < 1) {
    throw TopologyError("worker count must be >= 1, got " + std::to_string(workers));
  }
  if (group_size < 1) {
    throw TopologyError("group size must be >= 1, got " + std::to_string(group_size));
  }
  if (workers % group_size != 0) {
    throw TopologyError("group size " + std::to_string(group_size) +
                        " does not divide worker count " + std::to_string(workers));
  }
}

std::vector<int> Topology::group_members(int group) const {
  std::vector<int> members(static_cast<std::size_t>(group_size_));
  for (int i = 0; i < group_size_; ++i) members[i] = group * group_size_ + i;
  return members;
}

std::vector<int> Topology::masters() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(group_count()));
  for (int g = 0; g < group_count(); ++g) out.push_back(master_of_group(g));
  return out;
}

}  // namespace gradsync::collectives
