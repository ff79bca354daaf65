#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dpdiag {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid value at construction or call time (non-finite loss, empty input,
// bad spec dimensions, ...).
struct ValidationError : Error {
  using Error::Error;
};

// Vectors that must share a dimension do not.
struct DimensionMismatchError : Error {
  using Error::Error;
};

// A gradient whose L2 norm is below the zero-direction threshold has no
// usable direction; callers must exclude the affected pair.
struct ZeroNormGradientError : Error {
  using Error::Error;
};

// Direction consistency needs at least two workers.
struct FewerThanTwoWorkersError : Error {
  using Error::Error;
};

// Sketches with different seed, width, or source dimension are not comparable.
struct IncompatibleSketchError : Error {
  using Error::Error;
};

// A run must stop: a non-finite loss or gradient was produced. Carries the
// step at which the failure occurred.
struct HaltRunError : Error {
  HaltRunError(int64_t failed_step, const std::string& what)
      : Error(what), step(failed_step) {}
  int64_t step;
};

// Configuration file problems (parse errors, unknown keys, invalid values).
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem failures, annotated with the offending path.
struct IoError : Error {
  using Error::Error;
};

struct UnknownSchemaVersionError : Error {
  using Error::Error;
};

// A log line that cannot be interpreted; carries its 1-based line number.
struct MalformedLineError : Error {
  MalformedLineError(size_t line_number, const std::string& what)
      : Error(what), line(line_number) {}
  size_t line;
};

// The same (step, rank) cell appears more than once in a log.
struct DuplicateCellError : Error {
  using Error::Error;
};

struct NoCompleteStepsError : Error {
  using Error::Error;
};

struct EmptyInputError : Error {
  using Error::Error;
};

// Summaries cover different step counts and truncation was not requested.
struct StepCountMismatchError : Error {
  using Error::Error;
};

}  // namespace dpdiag
