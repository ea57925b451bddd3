#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace swan {

// Shape disagreement between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Precondition on an argument value (empty input, non-positive count, ...).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Missing table, unknown scene, inconsistent model configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unknown feature name or inconsistent profile slot layout.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Metric evaluated on input where it is undefined (single-class AUC, all-zero Gini).
class MetricError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Non-finite loss during training; carries the offending batch index.
class TrainingError : public std::runtime_error {
public:
    TrainingError(std::size_t batch, const std::string& what)
        : std::runtime_error("batch " + std::to_string(batch) + ": " + what), batch_(batch) {}

    std::size_t batch() const noexcept { return batch_; }

private:
    std::size_t batch_;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::string file, std::size_t line, std::size_t column, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          file_(std::move(file)),
          line_(line),
          column_(column) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string file_;
    std::size_t line_;
    std::size_t column_;
};

}  // namespace swan
