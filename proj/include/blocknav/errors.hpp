#pragma once

#include <stdexcept>
#include <string>

namespace blocknav {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input data failed validation (bad world file, bad dataset, label mismatch).
/// The CLI maps this family to exit code 2.
class DataError : public Error {
public:
  using Error::Error;
};

class MalformedGraph : public DataError {
public:
  using DataError::DataError;
};

class SchemaViolation : public DataError {
public:
  using DataError::DataError;
};

class DatasetWorldMismatch : public DataError {
public:
  using DataError::DataError;
};

class LabelLengthMismatch : public DataError {
public:
  using DataError::DataError;
};

class UnknownNode : public Error {
public:
  using Error::Error;
};

class NoForwardEdge : public Error {
public:
  using Error::Error;
};

class GenerationFailed : public Error {
public:
  using Error::Error;
};

class RouteFailed : public Error {
public:
  using Error::Error;
};

class ShapeMismatch : public Error {
public:
  using Error::Error;
};

class EmptySequence : public Error {
public:
  using Error::Error;
};

class NotScalarRoot : public Error {
public:
  using Error::Error;
};

class AllMasked : public Error {
public:
  using Error::Error;
};

} // namespace blocknav
