#pragma once

#include <stdexcept>
#include <string>

namespace gnet {

/// Raised when tensor shapes do not conform for an operation.
class shape_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A file could not be opened or read.
class load_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// On-disk content violates the expected format (bad line, non-monotone frames, ...).
class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cross-file or cross-record inconsistency in a dataset.
class consistency_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class split_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model or run configuration.
class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite values where finite ones are required.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class training_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gnet
