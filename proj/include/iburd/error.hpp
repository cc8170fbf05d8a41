#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iburd {

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

/// Raised when caller-supplied arguments violate an operation's contract.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations (or produced non-finite values).
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::size_t iterations, double final_residual)
        : Error(what), iterations_(iterations), final_residual_(final_residual) {}

    std::size_t iterations() const noexcept { return iterations_; }
    double final_residual() const noexcept { return final_residual_; }

private:
    std::size_t iterations_;
    double final_residual_;
};

/// Errors tied to one named tensor of a weight archive.
class TensorError : public Error {
public:
    TensorError(const std::string& what, std::string tensor)
        : Error(what), tensor_(std::move(tensor)) {}
    const std::string& tensor() const noexcept { return tensor_; }

private:
    std::string tensor_;
};

class MissingTensorError : public TensorError {
public:
    using TensorError::TensorError;
};

class ShapeMismatchError : public TensorError {
public:
    using TensorError::TensorError;
};

class ChecksumError : public TensorError {
public:
    using TensorError::TensorError;
};

}  // namespace iburd
