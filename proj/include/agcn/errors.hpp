#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agcn {

// Base class for recoverable failures raised by this library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid run configuration: bad option value, missing path, inconsistent
// combination of options.
struct config_error : error {
  using error::error;
};

// Malformed or inconsistent input data: embedding/dataset/graph files,
// checkpoints, empty evaluation sets.
struct input_error : error {
  using error::error;
};

// Training aborted because the loss became non-finite.
struct divergence_error : error {
  divergence_error(std::size_t epoch_, std::size_t step_, const std::string& msg)
      : error(msg), epoch(epoch_), step(step_) {}
  std::size_t epoch = 0;
  std::size_t step = 0;
};

}  // namespace agcn
