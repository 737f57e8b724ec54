#pragma once

#include <stdexcept>
#include <string>

namespace overlap {

// Root of every error raised by the library. Callers that only want to report
// failures can catch this; tests and the CLI catch the concrete kinds.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define OVERLAP_DEFINE_ERROR(Name)          \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

// activation
OVERLAP_DEFINE_ERROR(DomainError);
OVERLAP_DEFINE_ERROR(SmoothnessError);
OVERLAP_DEFINE_ERROR(OverlapError);
OVERLAP_DEFINE_ERROR(BlendError);

// gradflow
OVERLAP_DEFINE_ERROR(StepFailure);
OVERLAP_DEFINE_ERROR(UnsupportedActivation);
OVERLAP_DEFINE_ERROR(NotConverged);
OVERLAP_DEFINE_ERROR(UnstableDirection);

// minima
OVERLAP_DEFINE_ERROR(DerivativeZero);

// limits
OVERLAP_DEFINE_ERROR(RangeError);
OVERLAP_DEFINE_ERROR(BracketFailure);

// recipes
OVERLAP_DEFINE_ERROR(EqualOutputWeights);
OVERLAP_DEFINE_ERROR(NonConvergence);
OVERLAP_DEFINE_ERROR(ZeroOutputWeight);
OVERLAP_DEFINE_ERROR(LimitMismatch);
OVERLAP_DEFINE_ERROR(ConstraintFailure);
OVERLAP_DEFINE_ERROR(NoCrossing);

// cli / io
OVERLAP_DEFINE_ERROR(ConfigError);
OVERLAP_DEFINE_ERROR(EmptyInput);

// violated operation precondition that has no dedicated kind
OVERLAP_DEFINE_ERROR(PreconditionError);

#undef OVERLAP_DEFINE_ERROR

}  // namespace overlap
