#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dlqg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix does not have the shape implied by the block dimensions.
class DimensionError : public Error {
 public:
  DimensionError(std::string matrix, const std::string& what)
      : Error("dimension error in " + matrix + ": " + what), matrix_(std::move(matrix)) {}
  const std::string& matrix() const noexcept { return matrix_; }

 private:
  std::string matrix_;
};

/// A matrix that must be positive (semi)definite is not.
class DefinitenessError : public Error {
 public:
  using Error::Error;
};

/// A matrix expected to be Schur stable has spectral radius >= 1.
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, double radius)
      : Error(what + " (spectral radius " + std::to_string(radius) + ")"), detail_(what), radius_(radius) {}
  double radius() const noexcept { return radius_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  double radius_;
};

/// An iterative solver stopped without meeting its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual, std::vector<double> history = {})
      : Error(what + " (last residual " + std::to_string(last_residual) + ")"),
        detail_(what),
        last_residual_(last_residual),
        history_(std::move(history)) {}
  double last_residual() const noexcept { return last_residual_; }
  /// Step sizes of an outer iteration, oldest first. Empty for inner solvers.
  const std::vector<double>& history() const noexcept { return history_; }
  /// Message without the residual suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  double last_residual_;
  std::vector<double> history_;
};

/// The problem instance failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed problem or controller file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed. Wraps the stage label around the underlying message.
class StageError : public Error {
 public:
  enum class Kind { validation, solver, io };

  StageError(std::string stage, Kind kind, const std::string& what)
      : Error("stage \"" + stage + "\": " + what), stage_(std::move(stage)), kind_(kind) {}
  const std::string& stage() const noexcept { return stage_; }
  Kind kind() const noexcept { return kind_; }

 private:
  std::string stage_;
  Kind kind_;
};

}  // namespace dlqg
