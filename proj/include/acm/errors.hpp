#pragma once

#include <stdexcept>
#include <string>

namespace acm {

/// Bad or truncated file contents (PGM/PPM headers, label files, ...).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument values (degenerate rects, empty inputs, ...).
class ParamError : public std::runtime_error {
public:
    explicit ParamError(const std::string& what) : std::runtime_error(what) {}
};

/// Model container problems: wrong magic, shape mismatch, truncation.
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

/// Training-sample mining failed for an image (no positives or no negatives).
class MiningError : public std::runtime_error {
public:
    explicit MiningError(const std::string& what) : std::runtime_error(what) {}
};

/// Training cannot proceed (single-class data, too few samples per class).
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

/// Evaluation cannot be computed (no ground truth, id mismatches).
class EvalError : public std::runtime_error {
public:
    explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace acm
