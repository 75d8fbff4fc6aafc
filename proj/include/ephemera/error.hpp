#pragma once

#include <stdexcept>
#include <string>

namespace ephemera {

// Every failure raised by the library carries the module it originated from so
// the CLI can report "module: message" without extra bookkeeping.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("market_data", "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error("market_data", what) {}
};

class EmptyInputError : public Error {
 public:
  explicit EmptyInputError(const std::string& what) : Error("market_data", what) {}
};

class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& what) : Error("market_data", what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(std::string module, const std::string& what)
      : Error(std::move(module), what) {}
};

class WindowError : public Error {
 public:
  explicit WindowError(const std::string& what) : Error("market_data", what) {}
};

class FitError : public Error {
 public:
  explicit FitError(const std::string& what) : Error("predictor", what) {}
};

class ImportError : public Error {
 public:
  explicit ImportError(const std::string& what) : Error("predictor", what) {}
};

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& what) : Error("predictor", what) {}
};

class SimulationError : public Error {
 public:
  explicit SimulationError(const std::string& what) : Error("trade_engine", what) {}
};

class AttackError : public Error {
 public:
  explicit AttackError(const std::string& what) : Error("attack", what) {}
};

class ReportError : public Error {
 public:
  explicit ReportError(const std::string& what) : Error("report", what) {}
};

}  // namespace ephemera
