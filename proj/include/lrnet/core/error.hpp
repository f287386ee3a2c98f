#pragma once

#include <stdexcept>
#include <string>

namespace lrnet {

/// Base of every error raised by the engine. Each subclass names one failure
/// category so callers (and the CLI) can map it to a diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define LRNET_DECLARE_ERROR(Name)                                  \
  class Name : public Error {                                      \
   public:                                                         \
    using Error::Error;                                            \
    const char* kind() const noexcept override { return #Name; }   \
  };

LRNET_DECLARE_ERROR(ShapeError)
LRNET_DECLARE_ERROR(ConfigError)
LRNET_DECLARE_ERROR(GraphError)
LRNET_DECLARE_ERROR(NumericError)
LRNET_DECLARE_ERROR(DataError)
LRNET_DECLARE_ERROR(FormatError)
LRNET_DECLARE_ERROR(IntegrityError)
LRNET_DECLARE_ERROR(FetchError)
LRNET_DECLARE_ERROR(IOError)

#undef LRNET_DECLARE_ERROR

}  // namespace lrnet
