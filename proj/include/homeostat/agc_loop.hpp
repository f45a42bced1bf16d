#pragma once

// Homeostatic automatic gain control: a bang-bang comparator on I_syn vs I_REF
// and the ultra-low-leakage cell that integrates its decision into V_THR.
//
// The two OTAs of the cell are taken as ideal: V_D sits at V_REF_M and V_S is
// clamped to V_REF_L (SW high) or V_REF_H (SW low). The cell then reduces to a
// switched current source on C_F:
//
//   SW high:  dV_THR/dt = +|I_SD(V_G, V_REF_L, V_REF_M)| / C_F
//   SW low:   dV_THR/dt = -|I_SD(V_G, V_REF_H, V_REF_M)| / C_F

#include <algorithm>
#include <cmath>

#include "homeostat/device_models.hpp"
#include "homeostat/errors.hpp"

namespace homeostat {

enum class Switch : int { low = 0, high = 1 };

enum class LlcMode { channel, fixed_slope };

struct ComparatorParams {
	double i_ref = 20e-9;
	double hysteresis = 0.0;  // relative deadband

	void validate() const
	{
		if (!(i_ref > 0.0))
			throw ConfigError("comparator.i_ref", "must be > 0");
		if (!(hysteresis >= 0.0))
			throw ConfigError("comparator.hysteresis", "must be >= 0");
	}
};

// v_ref_h that gives the same slope magnitude in both SW states. With the bulk
// at V_dd a symmetric offset around V_REF_M does not: the two slopes then differ
// by exactly exp((V_REF_M - V_REF_L) / U_T).
inline double balanced_ref_h(double v_ref_l, double v_ref_m, const DeviceParams &d)
{
	return v_ref_m + d.u_t * std::log(2.0 - std::exp(-(v_ref_m - v_ref_l) / d.u_t));
}

struct LlcParams {
	double c_f = 1e-12;
	double v_ref_l = 0.8;
	double v_ref_m = 0.9;
	double v_ref_h = 0.91764642790013771;  // balanced_ref_h(0.8, 0.9) at default device
	double v_g = 1.0169602885389467;       // 1.2 uV/s (1.2 aA on 1 pF) at default device
	LlcMode mode = LlcMode::channel;
	double slope_up = 0.0;    // V/s, fixed_slope mode
	double slope_down = 0.0;  // V/s, fixed_slope mode
	// Parasitic current on the C_F node; positive discharges C_F and raises V_THR.
	double i_gate_leak = 0.0;

	void validate(const DeviceParams &d) const
	{
		if (!(c_f > 0.0))
			throw ConfigError("llc.c_f", "must be > 0");
		auto on_rail = [&](double v, const char *name) {
			if (!(v >= 0.0 && v <= d.v_dd))
				throw ConfigError(name, "must lie in [0, V_dd]");
		};
		on_rail(v_ref_l, "llc.v_ref_l");
		on_rail(v_ref_m, "llc.v_ref_m");
		on_rail(v_ref_h, "llc.v_ref_h");
		on_rail(v_g, "llc.v_g");
		if (!(v_ref_l < v_ref_m && v_ref_m < v_ref_h))
			throw ConfigError("llc.v_ref_m", "references must satisfy v_ref_l < v_ref_m < v_ref_h");
		if (mode == LlcMode::fixed_slope) {
			if (!(slope_up >= 0.0))
				throw ConfigError("llc.slope_up", "must be >= 0");
			if (!(slope_down >= 0.0))
				throw ConfigError("llc.slope_down", "must be >= 0");
		}
		if (!std::isfinite(i_gate_leak))
			throw ConfigError("llc.i_gate_leak", "must be finite");
	}
};

struct AgcState {
	double v_thr = 0.9;
	Switch sw = Switch::low;
	bool rst = false;
	bool saturated = false;  // last update hit a rail
};

inline Switch comparator(double i_syn, Switch prev, const ComparatorParams &c)
{
	if (i_syn > c.i_ref * (1.0 + c.hysteresis))
		return Switch::high;
	if (i_syn < c.i_ref * (1.0 - c.hysteresis))
		return Switch::low;
	return prev;
}

// |dV_THR/dt| while SW is high (V_THR rising).
inline double llc_slope_up(const LlcParams &p, const DeviceParams &d)
{
	if (p.mode == LlcMode::fixed_slope)
		return p.slope_up;
	return std::abs(llc_channel_current(p.v_g, p.v_ref_l, p.v_ref_m, d)) / p.c_f;
}

// |dV_THR/dt| while SW is low (V_THR falling).
inline double llc_slope_down(const LlcParams &p, const DeviceParams &d)
{
	if (p.mode == LlcMode::fixed_slope)
		return p.slope_down;
	return std::abs(llc_channel_current(p.v_g, p.v_ref_h, p.v_ref_m, d)) / p.c_f;
}

// Signed dV_THR/dt for a given comparator state, given precomputed magnitudes.
inline double llc_rate(Switch sw, double up, double down, const LlcParams &p)
{
	return (sw == Switch::high ? up : -down) + p.i_gate_leak / p.c_f;
}

inline AgcState llc_update(const AgcState &s, Switch sw, const LlcParams &p, const DeviceParams &d,
                           double dt)
{
	AgcState next = s;
	next.sw = sw;
	if (s.rst) {
		next.v_thr = p.v_ref_m;
		next.saturated = false;
		return next;
	}
	const double v = s.v_thr + llc_rate(sw, llc_slope_up(p, d), llc_slope_down(p, d), p) * dt;
	next.v_thr = std::clamp(v, 0.0, d.v_dd);
	next.saturated = next.v_thr != v;
	return next;
}

// RST pulse: V_THR = V_D = V_REF_M, line released again afterwards.
inline AgcState reset(const AgcState &s, const LlcParams &p)
{
	AgcState next = s;
	next.v_thr = p.v_ref_m;
	next.rst = false;
	next.saturated = false;
	return next;
}

} // namespace homeostat
