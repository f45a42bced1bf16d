#pragma once

#include <stdexcept>
#include <string>

namespace homeostat {

// Invalid configuration or out-of-range argument. Carries the offending field
// name so the CLI can report it.
class ConfigError : public std::invalid_argument {
public:
	ConfigError(std::string field, const std::string &what)
		: std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

	const std::string &field() const noexcept { return field_; }

private:
	std::string field_;
};

// Argument outside the physical domain of a device equation.
class DomainError : public std::domain_error {
public:
	using std::domain_error::domain_error;
};

// Exponent exceeded the overflow cap: the parameter set is non-physical.
class NonPhysicalError : public std::overflow_error {
public:
	explicit NonPhysicalError(const std::string &what, double t = -1.0)
		: std::overflow_error(what), time_(t) {}

	// Simulation time at which the abort happened, or -1 outside a run.
	double time() const noexcept { return time_; }

private:
	double time_;
};

// A calibration target that no parameter value in range can reach.
class CalibrationError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

} // namespace homeostat
