#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tiertrack {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A text record that could not be parsed. Line numbers are 1-based.
class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class MissingEmbedding : public Error {
 public:
  using Error::Error;
};

class SingularInnovation : public Error {
 public:
  using Error::Error;
};

class FrameOrderViolation : public Error {
 public:
  using Error::Error;
};

class EmptyGroundTruth : public Error {
 public:
  EmptyGroundTruth() : Error("ground truth contains no evaluable boxes") {}
};

class EmptyTrack : public Error {
 public:
  EmptyTrack() : Error("track has no logits") {}
};

class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

}  // namespace tiertrack
