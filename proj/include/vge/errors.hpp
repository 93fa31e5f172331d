#pragma once

#include <stdexcept>
#include <string>

namespace vge {

// Base class for every typed error thrown by this library. Callers that do
// not care about the exact failure can catch vge::Error; tests and the CLI
// catch the concrete types.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define VGE_DEFINE_ERROR(NAME)                                   \
  class NAME : public Error {                                    \
   public:                                                       \
    explicit NAME(const std::string& what = #NAME) : Error(what) {} \
  }

// schema
VGE_DEFINE_ERROR(MalformedJson);
VGE_DEFINE_ERROR(UnknownDimension);
VGE_DEFINE_ERROR(EmptyPrompt);
VGE_DEFINE_ERROR(MissingReferenceImage);

// flowcore
VGE_DEFINE_ERROR(DimensionMismatch);
VGE_DEFINE_ERROR(FrameTooSmall);
VGE_DEFINE_ERROR(InsufficientCorners);
VGE_DEFINE_ERROR(DegenerateConfiguration);
VGE_DEFINE_ERROR(PointAtInfinity);

// temporal tools
VGE_DEFINE_ERROR(EmptyInput);
VGE_DEFINE_ERROR(NonFiniteInput);
VGE_DEFINE_ERROR(TooFewFrames);
VGE_DEFINE_ERROR(EmptyGrid);
VGE_DEFINE_ERROR(EmptyTable);
VGE_DEFINE_ERROR(LengthMismatch);
VGE_DEFINE_ERROR(BackendFailure);

// agent
VGE_DEFINE_ERROR(BackendUnavailable);
VGE_DEFINE_ERROR(StructuringFailed);
VGE_DEFINE_ERROR(ExpansionFailed);
VGE_DEFINE_ERROR(EmptyVideo);
VGE_DEFINE_ERROR(NoActiveDimensions);
VGE_DEFINE_ERROR(MalformedOutput);
VGE_DEFINE_ERROR(MissingDimension);
VGE_DEFINE_ERROR(DuplicateDimension);
VGE_DEFINE_ERROR(UnknownAnswer);
VGE_DEFINE_ERROR(JudgingFailed);

// alignment
VGE_DEFINE_ERROR(EmptyJoin);
VGE_DEFINE_ERROR(MismatchedSets);
VGE_DEFINE_ERROR(UnknownFormat);

// cli / io
VGE_DEFINE_ERROR(MissingManifest);
VGE_DEFINE_ERROR(MissingFrame);
VGE_DEFINE_ERROR(UnsupportedFormat);
VGE_DEFINE_ERROR(ConfigError);
VGE_DEFINE_ERROR(IoError);

#undef VGE_DEFINE_ERROR

}  // namespace vge
