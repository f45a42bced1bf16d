#pragma once

// Differential-pair integrator: a first-order log-domain low-pass on currents,
//
//   tau_s dI_syn/dt + I_syn = I_w I_gain / I_tau,   tau_s = C U_T / (kappa I_tau)
//
// with I_w the superposition of every afferent weight current.

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>
#include <vector>

#include "homeostat/device_models.hpp"
#include "homeostat/errors.hpp"

namespace homeostat {

enum class GainSource { agc, fixed };

struct DpiParams {
	double c_dpi = 1e-12;  // F
	double i_tau = 1e-11;  // A
	GainSource gain_source = GainSource::agc;
	double fixed_i_gain = 0.0;  // used when gain_source == fixed

	void validate() const
	{
		if (!(c_dpi > 0.0))
			throw ConfigError("dpi.c_dpi", "must be > 0");
		if (!(i_tau > 0.0))
			throw ConfigError("dpi.i_tau", "must be > 0");
		if (gain_source == GainSource::fixed && !(fixed_i_gain > 0.0))
			throw ConfigError("dpi.fixed_i_gain", "must be > 0 when gain_source is fixed");
	}
};

struct DpiState {
	double i_syn = 0.0;
	double t = 0.0;
};

// One piece of a piecewise-constant current: `current` holds from t_start until
// the next segment starts.
struct Segment {
	double t_start = 0.0;
	double current = 0.0;
};

struct DcInput {
	std::string label;
	std::vector<Segment> segments;  // sorted by t_start; zero before the first

	double at(double t) const
	{
		auto it = std::upper_bound(segments.begin(), segments.end(), t,
		                           [](double x, const Segment &s) { return x < s.t_start; });
		return it == segments.begin() ? 0.0 : std::prev(it)->current;
	}
};

// Rectangular weight-current pulses, one per presynaptic spike. Pulses of the
// same input that overlap add up.
struct SpikeInput {
	std::string label;
	double weight = 0.0;   // A
	double pulse = 1e-3;   // s
	std::vector<double> times;

	double at(double t) const
	{
		// windows [t_k, t_k + pulse) containing t
		auto last = std::upper_bound(times.begin(), times.end(), t);
		auto first = std::upper_bound(times.begin(), last, t - pulse);
		return weight * static_cast<double>(last - first);
	}
};

struct WeightDrive {
	std::vector<DcInput> dc_inputs;
	std::vector<SpikeInput> spike_inputs;

	void validate() const
	{
		for (const auto &in : dc_inputs) {
			const std::string f = "drive.dc[" + in.label + "]";
			for (std::size_t i = 0; i < in.segments.size(); ++i) {
				if (!(in.segments[i].current >= 0.0))
					throw ConfigError(f, "currents must be >= 0");
				if (!(in.segments[i].t_start >= 0.0))
					throw ConfigError(f, "segment times must be >= 0");
				if (i > 0 && !(in.segments[i].t_start > in.segments[i - 1].t_start))
					throw ConfigError(f, "segment times must be strictly increasing");
			}
		}
		for (const auto &in : spike_inputs) {
			const std::string f = "drive.spikes[" + in.label + "]";
			if (!(in.weight >= 0.0))
				throw ConfigError(f, "weight must be >= 0");
			if (!(in.pulse > 0.0))
				throw ConfigError(f, "pulse must be > 0");
			for (std::size_t i = 0; i < in.times.size(); ++i) {
				if (!(in.times[i] >= 0.0))
					throw ConfigError(f, "spike times must be >= 0");
				if (i > 0 && !(in.times[i] > in.times[i - 1]))
					throw ConfigError(f, "spike times must be strictly increasing");
			}
		}
	}

	// Every instant at which total_weight_current can jump, sorted, unique.
	std::vector<double> change_times() const
	{
		std::vector<double> out;
		for (const auto &in : dc_inputs)
			for (const auto &s : in.segments)
				out.push_back(s.t_start);
		for (const auto &in : spike_inputs)
			for (double t : in.times) {
				out.push_back(t);
				out.push_back(t + in.pulse);
			}
		std::sort(out.begin(), out.end());
		out.erase(std::unique(out.begin(), out.end()), out.end());
		return out;
	}
};

inline double tau_s(const DpiParams &p, const DeviceParams &d)
{
	return p.c_dpi * d.u_t / (d.kappa * p.i_tau);
}

inline double steady_state(double i_w, double i_gain, double i_tau)
{
	if (!(i_tau > 0.0))
		throw DomainError("i_tau must be > 0");
	return i_w * i_gain / i_tau;
}

inline double total_weight_current(const WeightDrive &w, double t)
{
	double sum = 0.0;
	for (const auto &in : w.dc_inputs)
		sum += in.at(t);
	for (const auto &in : w.spike_inputs)
		sum += in.at(t);
	return sum;
}

// Exact solution over dt for drive held constant on [t, t + dt].
inline DpiState step_exact(const DpiState &s, double i_w, double i_gain, const DpiParams &p,
                           const DeviceParams &d, double dt)
{
	const double ss = steady_state(i_w, i_gain, p.i_tau);
	const double decay = std::exp(-dt / tau_s(p, d));
	return {ss + (s.i_syn - ss) * decay, s.t + dt};
}

// Diagnostic node voltage for plotting next to V_THR. Not a circuit quantity
// the model integrates.
inline double v_syn_from_isyn(double i_syn, const DeviceParams &d)
{
	if (!(i_syn > 0.0))
		return d.v_dd;
	const double v = d.v_dd - (d.u_t / d.kappa) * std::log(i_syn / d.i0_gain);
	return std::clamp(v, 0.0, d.v_dd);
}

} // namespace homeostat
