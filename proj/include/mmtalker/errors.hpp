#pragma once

#include <stdexcept>
#include <string>

namespace mmtalker {

// Base class for all domain errors raised by the library. The CLI maps
// these to exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define MMTALKER_DEFINE_ERROR(NAME)                                        \
    class NAME : public Error {                                            \
    public:                                                                \
        explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
    }

// mesh
MMTALKER_DEFINE_ERROR(ParseError);
MMTALKER_DEFINE_ERROR(NonTriangular);
MMTALKER_DEFINE_ERROR(IoError);
MMTALKER_DEFINE_ERROR(NonManifoldEdge);
MMTALKER_DEFINE_ERROR(IsolatedVertex);
MMTALKER_DEFINE_ERROR(IndexOutOfRange);
MMTALKER_DEFINE_ERROR(MissingField);

// uv parameterization
MMTALKER_DEFINE_ERROR(TopologyNotDisk);
MMTALKER_DEFINE_ERROR(SolverDidNotConverge);
MMTALKER_DEFINE_ERROR(NotInChart);
MMTALKER_DEFINE_ERROR(ArityMismatch);

// sampling
MMTALKER_DEFINE_ERROR(NegativeAlpha);
MMTALKER_DEFINE_ERROR(NonPositiveSigma);
MMTALKER_DEFINE_ERROR(EmptyKeypoints);
MMTALKER_DEFINE_ERROR(TooFewSamples);
MMTALKER_DEFINE_ERROR(AllCollinear);
MMTALKER_DEFINE_ERROR(DuplicatePoints);
MMTALKER_DEFINE_ERROR(EmptySamples);
MMTALKER_DEFINE_ERROR(LengthMismatch);

// encoding / tensors
MMTALKER_DEFINE_ERROR(FormatError);
MMTALKER_DEFINE_ERROR(NonFiniteValue);
MMTALKER_DEFINE_ERROR(DomainError);
MMTALKER_DEFINE_ERROR(ShapeMismatch);

// training
MMTALKER_DEFINE_ERROR(NonFiniteLoss);
MMTALKER_DEFINE_ERROR(EpsNonPositive);
MMTALKER_DEFINE_ERROR(SizeTooSmall);

// metrics
MMTALKER_DEFINE_ERROR(EmptyMask);
MMTALKER_DEFINE_ERROR(TooFewFrames);
MMTALKER_DEFINE_ERROR(TopologyMismatch);

#undef MMTALKER_DEFINE_ERROR

}  // namespace mmtalker
