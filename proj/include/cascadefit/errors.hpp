#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cascadefit {

// Base for every domain failure raised by the library. Argument validation
// uses std::invalid_argument directly.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IntegrationError : public Error {
public:
    using Error::Error;
};

// A Runge-Kutta step drove a compartment negative beyond the clamp tolerance.
class StiffnessError : public IntegrationError {
public:
    StiffnessError(std::string compartment, double time, double value);

    const std::string& compartment() const noexcept { return compartment_; }
    double time() const noexcept { return time_; }
    double value() const noexcept { return value_; }

private:
    std::string compartment_;
    double time_;
    double value_;
};

class DivergenceError : public IntegrationError {
public:
    explicit DivergenceError(double time);
    double time() const noexcept { return time_; }

private:
    double time_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& reason);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(std::string id);
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class ClockSkewError : public Error {
public:
    explicit ClockSkewError(std::vector<std::string> offenders);
    const std::vector<std::string>& offenders() const noexcept { return offenders_; }

private:
    std::vector<std::string> offenders_;
};

class DegenerateTargetError : public Error {
public:
    using Error::Error;
};

class FitFailedError : public Error {
public:
    using Error::Error;
};

class DegenerateTestError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace cascadefit
