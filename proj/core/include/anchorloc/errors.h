#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace anchorloc {

// Base class for every error raised by the library. Per-frame localization
// failures are reported as data, not through these exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `offset` is the byte offset (binary files) or the
// 1-based line number (text files) at which parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyImage : public Error {
 public:
  using Error::Error;
};

class InsufficientFrames : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class EmptyDatabase : public Error {
 public:
  using Error::Error;
};

class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};

class InsufficientCorrespondences : public Error {
 public:
  using Error::Error;
};

class EmptyView : public Error {
 public:
  using Error::Error;
};

class MissingGroundTruth : public Error {
 public:
  explicit MissingGroundTruth(std::vector<std::int64_t> missing_ids);
  const std::vector<std::int64_t>& missing_ids() const { return missing_ids_; }

 private:
  std::vector<std::int64_t> missing_ids_;
};

// Raised by the pipeline orchestrator; wraps the failing stage's error.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace anchorloc
