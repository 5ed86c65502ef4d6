#pragma once

#include <stdexcept>
#include <string>

namespace outpaint {

// Error classes map 1:1 to CLI exit codes, see cli.hpp.
struct IngestError : std::runtime_error {
  explicit IngestError(const std::string& m) : std::runtime_error(m) {}
};
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& m) : std::runtime_error(m) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};
struct MaskError : std::runtime_error {
  explicit MaskError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericsError : std::runtime_error {
  explicit NumericsError(const std::string& m) : std::runtime_error(m) {}
};
struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& m) : std::runtime_error(m) {}
};
struct ProvenanceError : std::runtime_error {
  explicit ProvenanceError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace outpaint
