#pragma once

#include <stdexcept>
#include <string>

namespace scenegen {

// Floating point type used for all tensor math. Tests and training default to
// fp64; build with -DSCENEGEN_REAL_FLOAT for fp32 storage.
#ifdef SCENEGEN_REAL_FLOAT
using real = float;
#else
using real = double;
#endif

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RegistrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace scenegen

#define SG_CHECK(cond, msg)                               \
    do {                                                  \
        if (!(cond)) throw ::scenegen::ContractError(msg); \
    } while (0)

#define SG_CHECK_SHAPE(cond, msg)                       \
    do {                                                \
        if (!(cond)) throw ::scenegen::ShapeError(msg); \
    } while (0)
