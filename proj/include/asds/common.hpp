#pragma once

#include <stdexcept>
#include <string>

namespace asds {

/// Invalid caller-supplied arguments: shape mismatches, out-of-range
/// indices, violated preconditions.
class ArgumentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or incompatible on-disk data (bad magic, truncation,
/// version mismatch). Messages carry the byte offset where known.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training could not proceed (diverged loss, degenerate data).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ArgumentError(msg);
}

} // namespace asds
