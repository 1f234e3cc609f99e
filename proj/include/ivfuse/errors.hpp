/* SPDX-FileCopyrightText: 2026 the ivfuse authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <stdexcept>
#include <string>

namespace ivfuse {

/// Tensor/layer dimensions do not line up.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// NaN or Inf encountered where finite values are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A file's contents violate its declared format.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Underlying read/write failed (missing file, truncation, unwritable path).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ivfuse
