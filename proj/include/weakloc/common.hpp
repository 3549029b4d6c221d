#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace weakloc {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Malformed or inconsistent input data (file formats, cross references,
/// constraint violations). The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure (factorization breakdown, non-finite values).
/// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace weakloc
