#pragma once

#include <stdexcept>
#include <string>

namespace drest {

// Base for every error raised by the library. Callers that only need to know
// "the fit or estimator failed" catch this; the subclasses carry the reason.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Design matrix (possibly after weighting or row selection) is rank deficient.
class SingularDesign : public Error {
 public:
  using Error::Error;
};

// Iterative fit hit its iteration cap, or diverged (e.g. logistic separation).
class NonConvergence : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

// A respondent carries a nonpositive or non-finite propensity.
class InvalidWeight : public Error {
 public:
  using Error::Error;
};

class UndefinedEstimator : public Error {
 public:
  using Error::Error;
};

class NoRoot : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

}  // namespace drest
