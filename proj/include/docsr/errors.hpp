#pragma once

#include <stdexcept>
#include <string>

namespace docsr {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration value; the message names the offending field.
struct ConfigError : Error {
    using Error::Error;
};

// Tensor/image dimensions violate an operation's contract.
struct ShapeError : Error {
    using Error::Error;
};

// A caller broke a documented precondition (range declarations,
// component-set mismatches, scale-set mismatches, ...).
struct ContractError : Error {
    using Error::Error;
};

// Input image too small for the requested receptive field / window / crop.
struct InputTooSmallError : Error {
    using Error::Error;
};

// Manifest or dataset inconsistency (duplicate keys, missing files).
struct DataIntegrityError : Error {
    using Error::Error;
};

// DWA queried before two epochs of history exist.
struct InsufficientHistoryError : Error {
    using Error::Error;
};

// File-level failures (unreadable, malformed, checksum mismatch).
struct IoError : Error {
    using Error::Error;
};

// A non-finite loss aborted training; carries a diagnostic snapshot.
struct TrainingAborted : Error {
    TrainingAborted(const std::string& msg, int epoch, int batch)
        : Error(msg), epoch(epoch), batch(batch) {}
    int epoch;
    int batch;
};

}  // namespace docsr
