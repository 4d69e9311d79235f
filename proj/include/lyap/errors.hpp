#pragma once

#include <stdexcept>
#include <string>

namespace lyap {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Non-finite evaluation while probing a field or potential.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Integration produced a non-finite state or left the 1e6 ball.
class BlowUpError : public Error {
public:
    BlowUpError(const std::string& what, double last_valid_time)
        : Error(what + " (last valid time " + std::to_string(last_valid_time) + ")"),
          last_valid_time_(last_valid_time) {}

    double last_valid_time() const noexcept { return last_valid_time_; }

private:
    double last_valid_time_;
};

/// The transversal flow approached Crit(f) or failed to converge under refinement.
class FlowError : public Error {
public:
    using Error::Error;
};

class CriticalPointError : public FlowError {
public:
    CriticalPointError(const std::string& what, double gradient_norm)
        : FlowError(what), gradient_norm_(gradient_norm) {}

    double gradient_norm() const noexcept { return gradient_norm_; }

private:
    double gradient_norm_;
};

class NewtonError : public Error {
public:
    using Error::Error;
};

class ChartError : public Error {
public:
    using Error::Error;
};

/// A point could not be expressed in tubular coordinates of the chart.
class TubeError : public Error {
public:
    using Error::Error;
};

class StencilError : public Error {
public:
    using Error::Error;
};

/// Family member integration failed; carries the member index.
class FamilyError : public Error {
public:
    FamilyError(const std::string& what, int member) : Error(what), member_(member) {}

    int member() const noexcept { return member_; }

private:
    int member_;
};

class CertificationError : public Error {
public:
    using Error::Error;
};

class ScenarioError : public Error {
public:
    ScenarioError(const std::string& what, std::string field = {}, int line = 0)
        : Error(what), field_(std::move(field)), line_(line) {}

    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }

private:
    std::string field_;
    int line_;
};

}  // namespace lyap
