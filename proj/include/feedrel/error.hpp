#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace feedrel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ChannelFault {
  kDegenerateDimensions,
  kNegativeEntry,
  kRowSum,
  kNegativeCost,
  kNoZeroCostLetter,
  kUnreachableOutput,
  kNonFinite,
};

const char* to_string(ChannelFault fault);

class ChannelError : public Error {
 public:
  ChannelError(ChannelFault fault, const std::string& what)
      : Error(what), fault_(fault) {}
  ChannelFault fault() const noexcept { return fault_; }

 private:
  ChannelFault fault_;
};

/// A precondition on a numeric argument was violated (rate above capacity,
/// cost outside the curve, ...). `limit` carries the relevant bound.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double limit)
      : Error(what), limit_(limit) {}
  double limit() const noexcept { return limit_; }

 private:
  double limit_;
};

/// Some D_k is infinite; the finite-exponent machinery does not apply.
class ZeroErrorRegime : public Error {
 public:
  using Error::Error;
};

/// The phase split lies outside the feasible interval for (r, p).
class InfeasibleSplit : public Error {
 public:
  InfeasibleSplit(const std::string& what, double lo, double hi)
      : Error(what), lo_(lo), hi_(hi) {}
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_, hi_;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> best_phi,
              double best_value, double gap)
      : Error(what),
        best_phi_(std::move(best_phi)),
        best_value_(best_value),
        gap_(gap) {}
  const std::vector<double>& best_phi() const noexcept { return best_phi_; }
  double best_value() const noexcept { return best_value_; }
  double gap() const noexcept { return gap_; }

 private:
  std::vector<double> best_phi_;
  double best_value_;
  double gap_;
};

/// Requested message set exceeds the configured desk-scale cap.
class CodeSizeError : public Error {
 public:
  CodeSizeError(const std::string& what, double messages, double cap)
      : Error(what), messages_(messages), cap_(cap) {}
  double messages() const noexcept { return messages_; }
  double cap() const noexcept { return cap_; }

 private:
  double messages_, cap_;
};

/// A transcript cannot have been produced by the code it is replayed against.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace feedrel
