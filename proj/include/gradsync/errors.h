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

#ifndef GRADSYNC_ERRORS_H_
#define GRADSYNC_ERRORS_H_

#include <stdexcept>

namespace gradsync {

// A caller broke a documented precondition (mismatched lengths, a batch
// that is too small, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace gradsync

#endif  // GRADSYNC_ERRORS_H_
