#pragma once

#include <stdexcept>
#include <string>

namespace logicloom {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input files, schemas and configuration.
class InputError : public Error {
public:
    using Error::Error;
};

/// Failure reported by (or while talking to) a generative model.
class ModelError : public Error {
public:
    using Error::Error;
};

}  // namespace logicloom
