#pragma once

#include <stdexcept>
#include <string>

namespace mwcnn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape contract violations. The message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Malformed files (BDF/MWER/MWDS/MWNW/CSV). Exit code 2 at the CLI.
struct ParseError : Error {
  using Error::Error;
};

// Bad user input: missing paths, invalid config values, impossible requests.
// Exit code 2 at the CLI.
struct InputError : Error {
  using Error::Error;
};

// Weights file does not match the configured architecture. Exit code 3.
struct FingerprintError : Error {
  using Error::Error;
};

// Loss went non-finite during training; message names epoch and batch.
struct TrainingDiverged : Error {
  using Error::Error;
};

}  // namespace mwcnn
