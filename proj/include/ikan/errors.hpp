#pragma once

#include <stdexcept>
#include <string>

namespace ikan {

// Every failure the library reports derives from Error; kind() is the class
// name the CLI prints before exiting nonzero.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

#define IKAN_DEFINE_ERROR(Name)                                         \
    class Name : public Error {                                         \
    public:                                                             \
        using Error::Error;                                             \
        const char* kind() const noexcept override { return #Name; }    \
    };

IKAN_DEFINE_ERROR(DimensionError)
IKAN_DEFINE_ERROR(RangeError)
IKAN_DEFINE_ERROR(LabelError)
IKAN_DEFINE_ERROR(StateError)
IKAN_DEFINE_ERROR(EmptyDataError)
IKAN_DEFINE_ERROR(NumericError)
IKAN_DEFINE_ERROR(WindowTooShortError)
IKAN_DEFINE_ERROR(TaskRangeError)
IKAN_DEFINE_ERROR(CapacityError)
IKAN_DEFINE_ERROR(AmbiguityError)
IKAN_DEFINE_ERROR(UnknownTaskError)
IKAN_DEFINE_ERROR(FormatError)
IKAN_DEFINE_ERROR(SchemaError)
IKAN_DEFINE_ERROR(ConfigError)
IKAN_DEFINE_ERROR(IoError)
IKAN_DEFINE_ERROR(TrainingDivergedError)

#undef IKAN_DEFINE_ERROR

}  // namespace ikan
