/* Copyright 2026 The rescomp Authors. All Rights Reserved.

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

#ifndef RESCOMP_IO_ERROR_HPP_
#define RESCOMP_IO_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace rescomp {

// Unreadable or unwritable file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bitstream or checkpoint that fails structural validation.
class CorruptStreamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rescomp

#endif  // RESCOMP_IO_ERROR_HPP_
