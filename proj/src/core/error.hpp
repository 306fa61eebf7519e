#pragma once

#include <stdexcept>
#include <string>

namespace structfact {

enum class ErrorCode {
  InvalidArgument,
  MissingFile,
  ParseFailure,
  RaggedRows,
  IoFailure,
  NonFiniteInput,
  ConvergenceFailure,
  RankDeficient,
  InvalidOrder,
  DomainFailure,
  InsufficientSample,
  AllEigenvaluesFloored,
  NotOrthonormal,
  DegenerateSpectrum,
  DegenerateDraw,
};

// Carries a machine-readable code plus up to two integer details
// (row/column for parse failures, effective rank, failing origin, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, long detail_a = -1, long detail_b = -1)
      : std::runtime_error(std::move(message)), code_(code), detail_a_(detail_a), detail_b_(detail_b) {}

  ErrorCode code() const { return code_; }
  long detail_a() const { return detail_a_; }
  long detail_b() const { return detail_b_; }

 private:
  ErrorCode code_;
  long detail_a_;
  long detail_b_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message,
                               long detail_a = -1, long detail_b = -1) {
  throw Error(code, message, detail_a, detail_b);
}

}  // namespace structfact
