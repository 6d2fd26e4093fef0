#pragma once

#include <stdexcept>
#include <string>

namespace rvc {

/// Base of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input (dimensions, probabilities, parameters).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// The chain structure does not support the requested quantity
/// (e.g. a relative value for a multichain policy).
class UnsupportedStructure : public Error {
public:
    using Error::Error;
};

/// Exhaustive enumeration would exceed the configured cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// The question has no unique answer (e.g. decomposing against equivalent r and V).
class IllPosed : public Error {
public:
    using Error::Error;
};

/// An analysis that needs a unique optimal policy found ties.
class NonUniqueOptimum : public Error {
public:
    using Error::Error;
};

} // namespace rvc
