#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace confcal {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kTransportError = 2,
  kInvariantViolation = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kInvariantViolation; }
};

// Bad or missing user input: malformed files, invalid arguments, empty data.
class InputError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kInputError; }
};

class EmptyInputError : public InputError {
 public:
  explicit EmptyInputError(const std::string& what)
      : InputError("empty input: " + what) {}
};

// A scripted agent was asked for an entry its fixture table does not hold.
class FixtureGapError : public InputError {
 public:
  using InputError::InputError;
};

class TransportError : public Error {
 public:
  TransportError(std::string agent, const std::string& what)
      : Error("agent '" + agent + "': " + what), agent_(std::move(agent)) {}
  const std::string& agent() const noexcept { return agent_; }
  ExitCode exit_code() const noexcept override { return ExitCode::kTransportError; }

 private:
  std::string agent_;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public InvariantError {
 public:
  explicit DivergenceError(int epoch)
      : InvariantError("training diverged (non-finite loss) at epoch " +
                       std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace confcal
