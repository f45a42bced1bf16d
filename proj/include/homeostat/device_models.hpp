#pragma once

// Subthreshold device equations shared by the synapse and the AGC loop.
//
// All functions here are pure. Every exponential goes through guarded_exp(),
// which refuses arguments beyond kExponentCap instead of returning inf: such
// arguments only arise from non-physical parameter sets.

#include <cmath>
#include <string>

#include "homeostat/errors.hpp"

namespace homeostat {

inline constexpr double kExponentCap = 200.0;
inline constexpr double kElementaryCharge = 1.602176634e-19;

struct DeviceParams {
	double u_t = 0.02585;   // thermal voltage at 300 K (V)
	double kappa = 0.7;     // subthreshold slope coefficient
	double v_dd = 1.8;      // supply (V)
	// Scale of the virtual gain transistor. Default puts the lock point of the
	// reference setup (I_w = 0.3 nA, I_tau = 10 pA, I_syn = 20 nA) at 1.46 V.
	double i0_gain = 6.6892188757502759e-14;
	double i0_llc = 1e-12;  // scale of the leakage-cell p-FET (A)

	void validate() const
	{
		if (!(u_t > 0.0))
			throw ConfigError("device.u_t", "must be > 0");
		if (!(kappa > 0.0 && kappa <= 1.0))
			throw ConfigError("device.kappa", "must be in (0, 1]");
		if (!(v_dd > 0.0))
			throw ConfigError("device.v_dd", "must be > 0");
		if (!(i0_gain > 0.0))
			throw ConfigError("device.i0_gain", "must be > 0");
		if (!(i0_llc > 0.0))
			throw ConfigError("device.i0_llc", "must be > 0");
	}
};

inline double guarded_exp(double x)
{
	if (!(std::abs(x) <= kExponentCap))
		throw NonPhysicalError("exponent " + std::to_string(x) + " exceeds cap of " +
		                       std::to_string(kExponentCap));
	return std::exp(x);
}

namespace detail {

inline void require_rail_range(double v, const DeviceParams &p, const char *name)
{
	if (!(v >= 0.0 && v <= p.v_dd))
		throw DomainError(std::string(name) + " = " + std::to_string(v) + " V outside [0, V_dd]");
}

} // namespace detail

// Gain current of the virtual p-type transistor,
//   I_gain = I_0 exp(kappa (V_dd - V_THR) / U_T),
// decreasing in V_THR so that raising V_THR scales the synapse down.
inline double igain_from_vthr(double v_thr, const DeviceParams &p)
{
	detail::require_rail_range(v_thr, p, "v_thr");
	return p.i0_gain * guarded_exp(p.kappa * (p.v_dd - v_thr) / p.u_t);
}

inline double vthr_from_igain(double i_gain, const DeviceParams &p)
{
	if (!(i_gain > 0.0))
		throw DomainError("i_gain must be > 0");
	const double v = p.v_dd - (p.u_t / p.kappa) * std::log(i_gain / p.i0_gain);
	if (!(v >= 0.0 && v <= p.v_dd))
		throw DomainError("i_gain = " + std::to_string(i_gain) +
		                  " A implies V_THR outside [0, V_dd]");
	return v;
}

// Source-to-drain current of the leakage-cell p-FET in weak inversion with the
// bulk at V_dd:
//   I_SD = I_0 e^{kappa (V_dd - V_G)/U_T} (e^{-(V_dd - V_S)/U_T} - e^{-(V_dd - V_D)/U_T})
// Signed: positive when v_s > v_d. Exactly antisymmetric in (v_s, v_d).
inline double llc_channel_current(double v_g, double v_s, double v_d, const DeviceParams &p)
{
	detail::require_rail_range(v_g, p, "v_g");
	detail::require_rail_range(v_s, p, "v_s");
	detail::require_rail_range(v_d, p, "v_d");
	if (v_s == v_d)
		return 0.0;
	const double gate = guarded_exp(p.kappa * (p.v_dd - v_g) / p.u_t);
	const double fwd = guarded_exp(-(p.v_dd - v_s) / p.u_t);
	const double rev = guarded_exp(-(p.v_dd - v_d) / p.u_t);
	return p.i0_llc * gate * (fwd - rev);
}

// Gate bias at which the channel current drives C_F at target_slope (V/s).
//
// log|I| is affine in v_g, so bisection on the log converges to adjacent
// doubles; the result is then checked against the forward model.
inline double calibrate_vg_for_slope(double target_slope, double c_f, double v_s, double v_d,
                                     const DeviceParams &p)
{
	if (!(target_slope > 0.0))
		throw DomainError("target slope must be > 0");
	if (!(c_f > 0.0))
		throw DomainError("c_f must be > 0");
	if (v_s == v_d)
		throw DomainError("v_s == v_d: no drain-source drop, slope is identically zero");

	const double target_current = target_slope * c_f;
	auto log_excess = [&](double v_g) {
		return std::log(std::abs(llc_channel_current(v_g, v_s, v_d, p))) - std::log(target_current);
	};

	// Current is largest at v_g = 0 and smallest at v_g = V_dd.
	const double at_low = log_excess(0.0);
	const double at_high = log_excess(p.v_dd);
	constexpr double kExact = 1e-12;
	if (std::abs(at_low) <= kExact)
		return 0.0;
	if (std::abs(at_high) <= kExact)
		return p.v_dd;
	if (at_low < 0.0 || at_high > 0.0)
		throw CalibrationError("slope " + std::to_string(target_slope) +
		                       " V/s unreachable for v_g in [0, V_dd]");

	double lo = 0.0, hi = p.v_dd;
	for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
		const double mid = 0.5 * (lo + hi);
		if (mid <= lo || mid >= hi)
			break;
		if (log_excess(mid) > 0.0)
			lo = mid;
		else
			hi = mid;
	}
	const double v_g = std::abs(log_excess(lo)) < std::abs(log_excess(hi)) ? lo : hi;

	const double achieved = std::abs(llc_channel_current(v_g, v_s, v_d, p)) / c_f;
	if (std::abs(achieved - target_slope) > 1e-9 * target_slope)
		throw CalibrationError("v_g bisection did not reach the target slope");
	return v_g;
}

} // namespace homeostat
