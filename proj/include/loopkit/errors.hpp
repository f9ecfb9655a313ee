#pragma once

#include <stdexcept>
#include <string>

namespace loopkit {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An operation received a cloud with zero points.
struct EmptyCloud : Error {
    using Error::Error;
};

/// A rotation left the small-angle regime required by the twist map.
struct RotationTooLarge : Error {
    using Error::Error;
};

/// A point configuration is rank-deficient (collinear or coincident).
struct DegenerateConfiguration : Error {
    using Error::Error;
};

/// Fewer points than the operation's minimum.
struct TooFewPoints : Error {
    using Error::Error;
};

/// Normals are required but absent.
struct MissingNormals : Error {
    using Error::Error;
};

/// A required input (features, poses, depth) is absent.
struct MissingData : Error {
    using Error::Error;
};

/// No correspondences found within the search distance.
struct NoCorrespondences : Error {
    using Error::Error;
};

/// The linear system has no unique solution (e.g. disconnected graph).
struct SingularSystem : Error {
    using Error::Error;
};

/// Not enough observations to constrain the unknowns.
struct InsufficientObservations : Error {
    using Error::Error;
};

/// Too few pose associations between two trajectories.
struct TooFewAssociations : Error {
    using Error::Error;
};

/// Malformed file content; carries the file position.
struct ParseError : Error {
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), path(path), line(line) {}
    std::string path;
    std::size_t line;
};

/// A file declares a property the reader cannot represent.
struct UnsupportedProperty : Error {
    using Error::Error;
};

}  // namespace loopkit
