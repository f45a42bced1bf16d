#pragma once

// Non-adaptive integrate-and-fire neuron with an absolute refractory period.
//
// The membrane variable is charge / c_mem, so only the product
// c_mem * delta_v (the charge per spike) matters for the firing rate:
//
//   f(I) = 1 / (t_ref + c_mem delta_v / (I - i_leak))     for I > i_leak

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "homeostat/errors.hpp"

namespace homeostat {

struct NeuronParams {
	// Defaults reproduce 100 Hz at 20 nA and 180 Hz at 40 nA.
	double c_mem = 1.7777777777777778e-10 / 0.3;  // F
	double delta_v = 0.3;                           // V
	double t_ref = 1.1111111111111111e-3;           // s
	double i_leak = 0.0;                            // A

	double charge_per_spike() const { return c_mem * delta_v; }

	void validate() const
	{
		if (!(c_mem > 0.0))
			throw ConfigError("neuron.c_mem", "must be > 0");
		if (!(delta_v > 0.0))
			throw ConfigError("neuron.delta_v", "must be > 0");
		if (!(t_ref >= 0.0))
			throw ConfigError("neuron.t_ref", "must be >= 0");
		if (!(i_leak >= 0.0))
			throw ConfigError("neuron.i_leak", "must be >= 0");
	}
};

struct NeuronState {
	double v_mem = 0.0;
	double refractory_until = 0.0;
	std::vector<double> spike_times;
};

// Advances the membrane over [t, t + dt] under a constant input current. The
// trajectory is linear between events, so threshold crossings are located
// exactly inside the window and several spikes per window are possible.
// Returns the number of spikes emitted; they are appended to s.spike_times.
inline std::size_t integrate(NeuronState &s, double i_in, const NeuronParams &p, double t, double dt)
{
	const double t_end = t + dt;
	const double net = i_in - p.i_leak;
	std::size_t emitted = 0;
	double now = std::max(t, s.refractory_until);

	while (now < t_end) {
		if (net <= 0.0) {
			s.v_mem = std::max(0.0, s.v_mem + net * (t_end - now) / p.c_mem);
			break;
		}
		const double to_threshold = (p.delta_v - s.v_mem) * p.c_mem / net;
		if (now + to_threshold > t_end) {
			s.v_mem += net * (t_end - now) / p.c_mem;
			break;
		}
		const double spike = now + to_threshold;
		s.spike_times.push_back(spike);
		++emitted;
		s.v_mem = 0.0;
		s.refractory_until = spike + p.t_ref;
		now = s.refractory_until;
	}
	return emitted;
}

inline double rate_model(double i_in, const NeuronParams &p)
{
	const double net = i_in - p.i_leak;
	if (!(net > 0.0))
		return 0.0;
	return 1.0 / (p.t_ref + p.charge_per_spike() / net);
}

struct RateCalibration {
	double t_ref;
	double charge;  // c_mem * delta_v (C)
};

// Solves 1/f = t_ref + Q / I through two operating points.
inline RateCalibration calibrate_rate_points(double f1, double i1, double f2, double i2)
{
	if (!(f1 > 0.0 && f2 > f1))
		throw CalibrationError("rate points need 0 < f1 < f2");
	if (!(i1 > 0.0 && i2 > i1))
		throw CalibrationError("rate points need 0 < i1 < i2");
	const double charge = (1.0 / f1 - 1.0 / f2) / (1.0 / i1 - 1.0 / i2);
	const double t_ref = 1.0 / f1 - charge / i1;
	if (!(charge > 0.0))
		throw CalibrationError("rate points imply a non-positive charge per spike");
	if (!(t_ref > 0.0))
		throw CalibrationError("rate points imply a non-positive refractory period "
		                       "(f2 at or beyond the refractory ceiling)");
	return {t_ref, charge};
}

enum class RateEstimator { last_isi, windowed_count };

// Firing rate seen at time t from the spikes emitted up to t.
inline double instantaneous_rate(std::span<const double> spike_times, double t, double window,
                                 RateEstimator est = RateEstimator::last_isi)
{
	if (!(window > 0.0))
		throw DomainError("rate window must be > 0");
	auto last = std::upper_bound(spike_times.begin(), spike_times.end(), t);
	if (est == RateEstimator::windowed_count) {
		auto first = std::lower_bound(spike_times.begin(), last, t - window);
		return static_cast<double>(last - first) / window;
	}
	if (last - spike_times.begin() < 2)
		return 0.0;
	const double isi = *(last - 1) - *(last - 2);
	return 1.0 / isi;
}

// Mean rate from the inter-spike intervals of the spikes inside [t0, t1].
inline double mean_isi_rate(std::span<const double> spike_times, double t0, double t1)
{
	auto first = std::lower_bound(spike_times.begin(), spike_times.end(), t0);
	auto last = std::upper_bound(first, spike_times.end(), t1);
	const auto n = last - first;
	if (n < 2)
		return 0.0;
	return static_cast<double>(n - 1) / (*(last - 1) - *first);
}

} // namespace homeostat
