#pragma once

// Built-in scenarios.
//
//   step_pair    I_DC steps 0.3 -> 0.6 -> 0.3 nA at 20 s and 120 s, ~60 s homeostasis
//   slope_sweep  I_DC doubling at 100 s, leakage slope swept over one decade
//   timescale    1.2 uV/s cell, disturbance needing a 30 mV V_THR excursion (~25 ks)
//
// Every builtin locks I_syn = I_REF = 20 nA at V_THR = 1.46 V and 100 Hz.

#include <cmath>
#include <string>
#include <vector>

#include "homeostat/agc_loop.hpp"
#include "homeostat/device_models.hpp"
#include "homeostat/sim_engine.hpp"

namespace homeostat::builtins {

inline constexpr double kIdcBase = 0.3e-9;
inline constexpr double kLockedVthr = 1.46;

// Gate bias giving `slope` on the V_THR-rising branch. With balanced references
// the falling branch has the same magnitude.
inline double vg_for_slope(double slope, const LlcParams &llc, const DeviceParams &d)
{
	return calibrate_vg_for_slope(slope, llc.c_f, llc.v_ref_l, llc.v_ref_m, d);
}

// V_THR slope that compensates a doubling of the drive in `seconds`.
inline double slope_for_doubling_time(double seconds, const DeviceParams &d)
{
	return d.u_t / d.kappa * std::log(2.0) / seconds;
}

inline Scenario locked_base(std::string name)
{
	Scenario sc;
	sc.name = std::move(name);
	sc.llc.v_ref_h = balanced_ref_h(sc.llc.v_ref_l, sc.llc.v_ref_m, sc.device);
	sc.initial.v_thr = kLockedVthr;
	sc.mode = SimMode::fast;
	return sc;
}

inline Scenario step_pair()
{
	Scenario sc = locked_base("step_pair");
	sc.llc.v_g = vg_for_slope(slope_for_doubling_time(60.0, sc.device), sc.llc, sc.device);
	sc.drive.dc_inputs.push_back({"I_DC", {{0.0, kIdcBase}, {20.0, 2 * kIdcBase}, {120.0, kIdcBase}}});
	sc.duration = 200.0;
	sc.sample_interval = 0.01;
	return sc;
}

struct SlopeSweep {
	Scenario base;
	std::string path = "llc.v_g";
	std::vector<double> slopes;  // V/s, decreasing
	std::vector<double> values;  // v_g per slope
};

inline SlopeSweep slope_sweep()
{
	SlopeSweep f;
	f.base = locked_base("slope_sweep");
	f.base.drive.dc_inputs.push_back({"I_DC", {{0.0, kIdcBase}, {100.0, 2 * kIdcBase}}});
	f.base.duration = 11000.0;
	f.base.sample_interval = 1.0;
	f.slopes = {30e-6, 15e-6, 6e-6, 3e-6};
	for (double s : f.slopes)
		f.values.push_back(vg_for_slope(s, f.base.llc, f.base.device));
	f.base.llc.v_g = f.values.front();
	return f;
}

inline Scenario timescale()
{
	Scenario sc = locked_base("timescale");
	sc.llc.v_g = vg_for_slope(1.2e-6, sc.llc, sc.device);
	const double factor = std::exp(0.030 * sc.device.kappa / sc.device.u_t);
	sc.drive.dc_inputs.push_back({"I_DC", {{0.0, kIdcBase}, {1000.0, factor * kIdcBase}}});
	sc.duration = 31000.0;
	sc.sample_interval = 1.0;
	return sc;
}

} // namespace homeostat::builtins
