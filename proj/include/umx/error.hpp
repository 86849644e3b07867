#pragma once

#include <stdexcept>
#include <string>

namespace umx {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownBenchmark : Error {
  explicit UnknownBenchmark(const std::string& name)
      : Error("unknown benchmark: " + name) {}
};

struct InvalidConfig : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct EmptySeries : Error {
  EmptySeries() : Error("empty series") {}
};

struct TooFewLayers : Error {
  TooFewLayers() : Error("need at least 2 layers") {}
};

struct TooFewRuns : Error {
  TooFewRuns() : Error("need at least 2 runs") {}
};

struct MixedModels : Error {
  using Error::Error;
};

struct HintMismatch : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct Divergence : Error {
  using Error::Error;
};

struct EmptyTrace : Error {
  EmptyTrace() : Error("trace has no records") {}
};

struct EmptyTruth : Error {
  EmptyTruth() : Error("empty truth sequence") {}
};

struct MissingCheckpoint : Error {
  using Error::Error;
};

}  // namespace umx
