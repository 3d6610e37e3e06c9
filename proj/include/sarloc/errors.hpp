#pragma once

#include <stdexcept>
#include <string>

namespace sarloc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SizingError : Error { using Error::Error; };          // impossible grid/tile dimensions
struct ValidationError : Error { using Error::Error; };      // input violates a stated invariant
struct FormatError : Error { using Error::Error; };          // unsupported or malformed file contents
struct CorruptionError : Error { using Error::Error; };      // payload and sidecar disagree
struct CapacityError : Error { using Error::Error; };        // not enough data to satisfy the request
struct DispatchError : Error { using Error::Error; };        // unknown kind/tag
struct StructuralError : Error { using Error::Error; };      // network layer shape mismatch
struct UsageError : Error { using Error::Error; };           // API called out of order
struct ModelError : Error { using Error::Error; };           // missing or unusable model
struct DegenerateBatchError : Error { using Error::Error; };
struct UndefinedMetricError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct InternalError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace sarloc
