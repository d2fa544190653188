// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace hyperflow {

// Error taxonomy shared across the library. The CLI maps UsageError to
// exit code 1 and every other Error to exit code 2.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class TruncationError : public Error { public: using Error::Error; };
class DataError : public Error { public: using Error::Error; };
class DimensionError : public Error { public: using Error::Error; };
class InputError : public Error { public: using Error::Error; };
class FeasibilityError : public Error { public: using Error::Error; };
class DegenerateError : public Error { public: using Error::Error; };
class RankError : public Error { public: using Error::Error; };
class TrainingError : public Error { public: using Error::Error; };
class StateError : public Error { public: using Error::Error; };
class UsageError : public Error { public: using Error::Error; };
class IntegrityError : public Error { public: using Error::Error; };

// Shortest round-trip decimal form of a double. Used everywhere a double
// is written to a text artifact so that re-running a pipeline produces
// byte-identical files.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace hyperflow
