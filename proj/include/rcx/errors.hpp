#pragma once

#include <stdexcept>
#include <string>

namespace rcx {

// Every rejected input or broken precondition surfaces as a typed error
// deriving from Error; nothing is silently defaulted.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define RCX_ERROR_TYPE(Name)                \
  struct Name : Error {                     \
    using Error::Error;                     \
  }

// core
RCX_ERROR_TYPE(MissingFeature);
RCX_ERROR_TYPE(UnlabeledFrame);
RCX_ERROR_TYPE(TooFewRows);

// ingest
RCX_ERROR_TYPE(MalformedRow);
RCX_ERROR_TYPE(NonMonotonicTime);
RCX_ERROR_TYPE(PixelOverflow);
RCX_ERROR_TYPE(DuplicateFrame);
RCX_ERROR_TYPE(MissingAnswer);
RCX_ERROR_TYPE(OutOfRange);
RCX_ERROR_TYPE(WrongVoteCount);
RCX_ERROR_TYPE(NoRoadWithin);

// features
RCX_ERROR_TYPE(DegenerateTrip);
RCX_ERROR_TYPE(EmptySegment);
RCX_ERROR_TYPE(NonPositiveLimit);
RCX_ERROR_TYPE(EmptyMatrix);
RCX_ERROR_TYPE(UnknownLevel);
RCX_ERROR_TYPE(NotFitted);

// kde
RCX_ERROR_TYPE(OutOfProjectionRange);
RCX_ERROR_TYPE(EmptyBBox);
RCX_ERROR_TYPE(DegenerateRange);
RCX_ERROR_TYPE(OutOfScale);

// neural
RCX_ERROR_TYPE(DimMismatch);
RCX_ERROR_TYPE(ShapeError);
RCX_ERROR_TYPE(NaNLoss);
RCX_ERROR_TYPE(BadEpoch);
RCX_ERROR_TYPE(InvalidConfig);

// models
RCX_ERROR_TYPE(EmptyTrainSet);
RCX_ERROR_TYPE(SubsetTooLarge);

// eval
RCX_ERROR_TYPE(LengthMismatch);
RCX_ERROR_TYPE(NoDiscordantPairs);

#undef RCX_ERROR_TYPE

}  // namespace rcx
