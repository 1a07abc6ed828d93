#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace graphtomo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// bad input: malformed files, inconsistent shapes, out-of-range indices
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DegenerateSpectrum : public Error {
 public:
  using Error::Error;
};

class SingularResolvent : public Error {
 public:
  using Error::Error;
};

// Failures inside a reconstruction recursion. The driver stamps the
// infection step (-1 = boundary initialisation) before rethrowing.
class ReconstructionError : public Error {
 public:
  using Error::Error;
  int step() const { return step_; }
  void set_step(int s) { step_ = s; }

 private:
  int step_ = -1;
};

class NotTomographable : public ReconstructionError {
 public:
  using ReconstructionError::ReconstructionError;
};
class NegativeSquare : public ReconstructionError {
 public:
  using ReconstructionError::ReconstructionError;
};
class ComplexResidue : public ReconstructionError {
 public:
  using ReconstructionError::ReconstructionError;
};
class VanishingCoupling : public ReconstructionError {
 public:
  using ReconstructionError::ReconstructionError;
};
class VanishingDiagonal : public ReconstructionError {
 public:
  using ReconstructionError::ReconstructionError;
};
class VanishingBracket : public ReconstructionError {
 public:
  using ReconstructionError::ReconstructionError;
};
class ImaginaryResidue : public ReconstructionError {
 public:
  using ReconstructionError::ReconstructionError;
};

// spectral extraction
class NoRealRoot : public Error {
 public:
  using Error::Error;
};
class AmbiguousRoot : public Error {
 public:
  AmbiguousRoot(const std::string& what, std::vector<double> candidates)
      : Error(what), candidates_(std::move(candidates)) {}
  const std::vector<double>& candidates() const { return candidates_; }

 private:
  std::vector<double> candidates_;
};
class RankDeficient : public Error {
 public:
  using Error::Error;
};
class PoorFit : public Error {
 public:
  using Error::Error;
};

// metrology
class BoundStateDetected : public Error {
 public:
  using Error::Error;
};
class DenominatorUnderflow : public Error {
 public:
  using Error::Error;
};
class DimensionCapExceeded : public Error {
 public:
  using Error::Error;
};
class BothBranchesSaturated : public Error {
 public:
  using Error::Error;
};

class ExcessiveFailures : public Error {
 public:
  using Error::Error;
};

}  // namespace graphtomo
