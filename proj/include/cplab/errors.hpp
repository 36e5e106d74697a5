#pragma once

#include <stdexcept>
#include <string>

namespace cplab {

// Base for everything thrown on purpose by this library. Callers that just
// want "did it work" can catch this one type.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad argument values: non-finite samples, out-of-range rates, empty inputs.
struct InvalidInputError : Error {
    using Error::Error;
};

// Structurally impossible configuration (K < 1, delta_t out of range, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Tensor/video dimensions that do not match what an operation needs.
struct ShapeError : Error {
    using Error::Error;
};

// Pearson correlation of a constant sequence has no defined value.
struct UndefinedCorrelationError : Error {
    using Error::Error;
};

// A spectrum with no mass where a peak was required.
struct NoPeakError : Error {
    using Error::Error;
};

// Window too short for the requested frequency analysis.
struct ResolutionError : Error {
    using Error::Error;
};

// Not enough samples/peaks to compute a statistic.
struct InsufficientDataError : Error {
    using Error::Error;
};

// Zero power in every band of interest (e.g. metronomic inter-beat series).
struct DegenerateVariabilityError : Error {
    using Error::Error;
};

// A labeled record was promised but the label is absent, or vice versa.
struct MissingLabelError : Error {
    using Error::Error;
};

// HR profile outside [40, 250] bpm or changing faster than physiology allows.
struct InvalidProfileError : Error {
    using Error::Error;
};

// Landmark set that cannot define a crop (zero vertical range, out of frame).
struct InvalidLandmarksError : Error {
    using Error::Error;
};

// GT traces too short to absorb the requested desynchronization.
struct MarginError : Error {
    using Error::Error;
};

// Anything wrong with bytes on disk: bad magic, truncated payload, version
// mismatch, malformed header. The message names the offending field.
struct FormatError : Error {
    using Error::Error;
};

// Mixed incompatible inputs (e.g. GT spectra supplied for an unlabeled video).
struct ConsistencyError : Error {
    using Error::Error;
};

// Training produced a non-finite loss; message says at which step and term.
struct TrainingDivergedError : Error {
    using Error::Error;
};

// Filesystem trouble distinct from format trouble.
struct IoError : Error {
    using Error::Error;
};

}  // namespace cplab
