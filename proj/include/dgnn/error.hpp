#ifndef DGNN_ERROR_HPP
#define DGNN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dgnn {

/// Tensor/operator shape mismatch.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

/// Invalid argument value (probabilities, counts, hyperparameters).
struct ParamError : std::runtime_error {
    explicit ParamError(const std::string& msg) : std::runtime_error("parameter error: " + msg) {}
};

/// Malformed dataset or config file contents.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

/// Filesystem failures (missing file, unwritable output).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

/// Training loss became non-finite; carries the epoch it happened at.
struct TrainingDiverged : std::runtime_error {
    int epoch;
    explicit TrainingDiverged(int epoch_)
        : std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch_)),
          epoch(epoch_) {}
};

/// Bad experiment configuration (unknown keys, invalid combinations).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

}  // namespace dgnn

#endif
