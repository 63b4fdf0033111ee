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

#ifndef GRADSYNC_TOPOLOGY_H_
#define GRADSYNC_TOPOLOGY_H_

#include <stdexcept>
#include <vector>

namespace gradsync::collectives {

class TopologyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Best measured group size on the 1024-GPU cluster.
inline constexpr int kDefaultGroupSize = 16;

// p workers split into p/k contiguous groups of k. The lowest rank of each
// group is its master.
class Topology {
 public:
  // Throws TopologyError unless p >= 1, k >= 1 and k divides p.
  Topology(int workers, int group_size);

  int workers() const { return workers_; }
  int group_size() const { return group_size_; }
  int group_count() const { return workers_ / group_size_; }

  int group_of(int rank) const { return rank / group_size_; }
  int master_of_group(int group) const { return group * group_size_; }
  bool is_master(int rank) const { return rank % group_size_ == 0; }
  bool same_group(int a, int b) const { return group_of(a) == group_of(b); }

  std::vector<int> group_members(int group) const;
  std::vector<int> masters() const;

 private:
  int workers_;
  int group_size_;
};

}  // namespace gradsync::collectives

#endif  // GRADSYNC_TOPOLOGY_H_
