#pragma once

#include <stdexcept>
#include <string>

namespace esgkg {

// Domain error types. Each maps to one failure mode of the pipeline so
// callers can catch precisely instead of pattern-matching message strings.

#define ESGKG_DEFINE_ERROR(Name)                            \
  struct Name : std::runtime_error {                        \
    explicit Name(const std::string& what)                  \
        : std::runtime_error(std::string(#Name ": ") + what) {} \
  }

// corpus ingest
ESGKG_DEFINE_ERROR(UnreadableFile);
ESGKG_DEFINE_ERROR(UnsupportedMedia);

// inference clients
ESGKG_DEFINE_ERROR(ServiceUnavailable);
ESGKG_DEFINE_ERROR(ResponseTooLong);

// semantic search
ESGKG_DEFINE_ERROR(DimensionMismatch);
ESGKG_DEFINE_ERROR(ZeroVector);
ESGKG_DEFINE_ERROR(EmptyCorpus);

// triple extraction
ESGKG_DEFINE_ERROR(MalformedResponse);

// consolidation
ESGKG_DEFINE_ERROR(UnmappedLabel);

// graph analytics
ESGKG_DEFINE_ERROR(AllZero);
ESGKG_DEFINE_ERROR(UnknownNode);
ESGKG_DEFINE_ERROR(CardinalityExceedsPool);
ESGKG_DEFINE_ERROR(DegenerateInput);

// score interpretation
ESGKG_DEFINE_ERROR(EmptyGrid);
ESGKG_DEFINE_ERROR(ColumnMismatch);
ESGKG_DEFINE_ERROR(EmptyCohort);
ESGKG_DEFINE_ERROR(ZeroVariance);
ESGKG_DEFINE_ERROR(TooFewSamples);
ESGKG_DEFINE_ERROR(MissingRecord);
ESGKG_DEFINE_ERROR(UnmappablePillar);

// pipeline
ESGKG_DEFINE_ERROR(MissingArtifact);
ESGKG_DEFINE_ERROR(ConfigInvalid);

#undef ESGKG_DEFINE_ERROR

}  // namespace esgkg
