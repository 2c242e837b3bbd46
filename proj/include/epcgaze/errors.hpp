#pragma once

#include <stdexcept>
#include <string>

namespace epcgaze {

// Every failure carries a stable class name so the CLI can print a
// machine-parsable one-liner.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define EPCGAZE_DEFINE_ERROR(Name)                                           \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

EPCGAZE_DEFINE_ERROR(InvalidInput);
EPCGAZE_DEFINE_ERROR(DimensionMismatch);
EPCGAZE_DEFINE_ERROR(SingularSystem);
EPCGAZE_DEFINE_ERROR(NonFiniteUpdate);
EPCGAZE_DEFINE_ERROR(UnknownSubject);
EPCGAZE_DEFINE_ERROR(TooFewSamples);
EPCGAZE_DEFINE_ERROR(ConfigError);
EPCGAZE_DEFINE_ERROR(IoError);
EPCGAZE_DEFINE_ERROR(FormatError);

#undef EPCGAZE_DEFINE_ERROR

}  // namespace epcgaze
