#ifndef CASCADE_LAB_ERRORS_HPP
#define CASCADE_LAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cascade_lab {

/// Precondition violated by a caller-supplied argument.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// An enumeration or outcome space exceeds its configured cap.
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operation requested on an object in the wrong state (e.g. fitting a
/// geometric bound to a profile that is not satisfied).
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

/// A weight law lacks the moment or exponent an engine needs.
struct UnsupportedLawError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Neither a plateau nor geometric growth can be resolved from the data.
struct InconclusiveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace cascade_lab

#endif // CASCADE_LAB_ERRORS_HPP
