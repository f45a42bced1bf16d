// Acceptance suite. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "homeostat/homeostat.hpp"

using namespace homeostat;

namespace {

// Tolerances, pinned.
constexpr double kStepPairWallLimit = 30.0;        // s
constexpr double kTimescaleWallLimit = 300.0;  // s
constexpr double kRateTarget = 100.0;          // Hz
constexpr double kRateTol = 5.0;               // Hz
constexpr double kPeakTarget = 180.0;          // Hz
constexpr double kPeakTol = 18.0;              // Hz
constexpr double kRecoveryTarget = 60.0;       // s
constexpr double kRecoveryTol = 20.0;          // s
constexpr double kSlopeTarget = 1.2e-6;        // V/s
constexpr double kSlopeRelTol = 1e-3;
constexpr double kElectronsTarget = 7.5;
constexpr double kElectronsTol = 0.02;
constexpr double kTimescaleTarget = 25000.0;   // s
constexpr double kTimescaleRelTol = 0.10;
constexpr double kRk4RelTol = 1e-6;
constexpr double kSemigroupRelTol = 1e-12;
constexpr double kRatioRelTol = 1e-12;
constexpr double kRippleRatio = 2.0;
constexpr double kRippleRelTol = 0.20;
constexpr double kDtHalvingTol = 0.5;          // Hz

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
	return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::map<int, std::pair<bool, std::string>> results;

void report(int id, bool ok, const std::string &detail) { results[id] = {ok, detail}; }

std::string fmt(const char *f, auto... args)
{
	char buf[512];
	std::snprintf(buf, sizeof buf, f, args...);
	return buf;
}

// Sign checks collected from every engine run, reported under criterion 7.
struct SignLedger {
	std::uint64_t runs = 0;
	std::uint64_t steps = 0;
	std::uint64_t feedback = 0;
	std::uint64_t gain = 0;

	const Trace &add(const Trace &tr)
	{
		++runs;
		steps += tr.stats.steps;
		feedback += tr.stats.feedback_violations;
		gain += tr.stats.gain_violations;
		return tr;
	}
} ledger;

Trace run_logged(const Scenario &sc) { return ledger.add(run(sc)); }

double classical_rk4(double i0, double i_ss, double tau, double t_end, double h)
{
	auto f = [&](double i) { return (i_ss - i) / tau; };
	double i = i0;
	const auto n = static_cast<long>(std::llround(t_end / h));
	for (long k = 0; k < n; ++k) {
		const double k1 = f(i);
		const double k2 = f(i + 0.5 * h * k1);
		const double k3 = f(i + 0.5 * h * k2);
		const double k4 = f(i + h * k3);
		i += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
	}
	return i;
}

// First sample at or after t_from whose rate is within tol of target; NaN if none.
double first_within(const Trace &tr, double t_from, double t_to, double target, double tol)
{
	for (const auto &s : tr.samples)
		if (s.t >= t_from && s.t < t_to && std::abs(s.rate - target) < tol)
			return s.t;
	return std::nan("");
}

void criterion_1()
{
	const auto t0 = Clock::now();
	const Trace tr = run_logged(builtins::step_pair());
	const double wall = seconds_since(t0);

	double sum = 0.0;
	int n = 0;
	double peak = 0.0, t_peak = 0.0, dip = 1e9, t_dip = 0.0;
	for (const auto &s : tr.samples) {
		if (s.t < 20.0) {
			sum += s.rate;
			++n;
		} else if (s.t < 120.0) {
			if (s.rate > peak) {
				peak = s.rate;
				t_peak = s.t;
			}
		} else if (s.rate < dip) {
			dip = s.rate;
			t_dip = s.t;
		}
	}
	const double initial = sum / n;
	const double up = first_within(tr, t_peak, 120.0, kRateTarget, kRateTol) - 20.0;
	const double down = first_within(tr, t_dip, 200.0, kRateTarget, kRateTol) - 120.0;

	const bool a = std::abs(initial - kRateTarget) <= kRateTol;
	const bool b = std::abs(peak - kPeakTarget) <= kPeakTol;
	const bool c = std::abs(up - kRecoveryTarget) <= kRecoveryTol;
	const bool d = dip < kRateTarget - kRateTol && std::abs(down - kRecoveryTarget) <= kRecoveryTol;
	const bool w = wall < kStepPairWallLimit;
	report(1, a && b && c && d && w,
	       fmt("step pair, fast mode: initial %.2f Hz, peak %.2f Hz at %.2f s, back within 5 Hz %.2f s after the "
	           "up step, dip %.2f Hz then back %.2f s after the down step, wall %.2f s",
	           initial, peak, t_peak, up, dip, down, wall));
}

void criterion_2()
{
	const DeviceParams d;
	Scenario sc = builtins::locked_base("open-loop");
	sc.llc.v_g = builtins::vg_for_slope(kSlopeTarget, sc.llc, d);
	sc.duration = 1000.0;
	sc.sample_interval = 1.0;
	sc.dpi.gain_source = GainSource::fixed;
	sc.dpi.fixed_i_gain = 20e-9 / builtins::kIdcBase * sc.dpi.i_tau;

	// SW held low: no drive. SW held high: a drive twice the set point.
	const Trace down = run_logged(sc);
	sc.drive.dc_inputs.push_back({"I_DC", {{0.0, 2 * builtins::kIdcBase}}});
	const Trace up = run_logged(sc);

	const double s_down = (down.samples.front().v_thr - down.samples.back().v_thr) / sc.duration;
	const double s_up = (up.samples.back().v_thr - up.samples.front().v_thr) / sc.duration;
	const double leak = std::abs(llc_channel_current(sc.llc.v_g, sc.llc.v_ref_l, sc.llc.v_ref_m, d));
	const double electrons = leak / kElementaryCharge;
	const bool sw_held = std::all_of(down.samples.begin(), down.samples.end(), [](auto &s) { return s.sw == 0; }) &&
	                     std::all_of(up.samples.begin(), up.samples.end(), [](auto &s) { return s.sw == 1; });
	const bool ok = sw_held && rel(s_down, kSlopeTarget) <= kSlopeRelTol && rel(s_up, kSlopeTarget) <= kSlopeRelTol &&
	                rel(leak, 1.2e-18) <= kSlopeRelTol && std::abs(electrons - kElectronsTarget) <= kElectronsTol;
	report(2, ok,
	       fmt("leak %.6g A (%.4f e/s) on %.3g F: ramp down %.9g V/s, up %.9g V/s over %.0f s",
	           leak, electrons, sc.llc.c_f, s_down, s_up, sc.duration));
}

void criterion_3()
{
	const auto t0 = Clock::now();
	const Trace tr = run_logged(builtins::timescale());
	const double wall = seconds_since(t0);
	const double rec = recovery_time(tr);
	double v_min = 1e9, v_max = -1e9;
	for (const auto &s : tr.samples) {
		v_min = std::min(v_min, s.v_thr);
		v_max = std::max(v_max, s.v_thr);
	}
	const bool ok = rel(rec, kTimescaleTarget) <= kTimescaleRelTol && wall < kTimescaleWallLimit;
	report(3, ok,
	       fmt("1.2 uV/s cell, %.1f mV V_THR excursion: recovery %.1f s (target 25000 +- 10%%), wall %.2f s",
	           (v_max - v_min) * 1e3, rec, wall));
}

void criterion_4()
{
	const auto f = builtins::slope_sweep();
	std::vector<RunSummary> rows = sweep(f.base, f.path, f.values, 0, [](std::size_t, const Trace &tr) {
		static std::mutex m;
		std::lock_guard lock(m);
		ledger.add(tr);
	});
	bool ok = rows.size() == f.slopes.size();
	std::string detail = "recovery by slope:";
	for (std::size_t k = 0; k < rows.size(); ++k) {
		const auto &r = rows[k];
		ok = ok && r.ok && std::abs(r.final_rate - kRateTarget) <= kRateTol && std::isfinite(r.recovery_time);
		// slopes are listed in decreasing order, so recovery must increase along the list
		if (k > 0)
			ok = ok && r.recovery_time > rows[k - 1].recovery_time;
		detail += fmt(" %g uV/s -> %.1f s @ %.2f Hz;", f.slopes[k] * 1e6, r.recovery_time, r.final_rate);
	}
	report(4, ok, detail);
}

void criterion_5()
{
	const DeviceParams d;
	const DpiParams p;
	const double tau = tau_s(p, d);
	std::mt19937_64 rng(20240601);
	std::uniform_real_distribution<double> cur(0.0, 1e-9), init(0.0, 60e-9), gain(1e-11, 1e-9), frac(0.01, 1.0);
	std::uniform_int_distribution<int> pieces(2, 64);

	double worst_rk4 = 0.0;
	for (int trial = 0; trial < 50; ++trial) {
		const double i_w = cur(rng), g = gain(rng);
		const double ss = steady_state(i_w, g, p.i_tau);
		DpiState s{init(rng), 0.0};
		double i_rk = s.i_syn;
		for (int k = 0; k < 100; ++k) {  // 10 tau in tenths
			s = step_exact(s, i_w, g, p, d, tau / 10);
			i_rk = classical_rk4(i_rk, ss, tau, tau / 10, tau / 1000);
			if (i_rk > 0.0)
				worst_rk4 = std::max(worst_rk4, rel(s.i_syn, i_rk));
		}
	}

	double worst_sg = 0.0;
	for (int trial = 0; trial < 500; ++trial) {
		const double i_w = cur(rng), g = gain(rng), T = 10 * tau * frac(rng);
		const int n = pieces(rng);
		DpiState many{init(rng), 0.0};
		const DpiState once = step_exact(many, i_w, g, p, d, T);
		for (int k = 0; k < n; ++k)
			many = step_exact(many, i_w, g, p, d, T / n);
		worst_sg = std::max(worst_sg, rel(many.i_syn, once.i_syn));
	}
	report(5, worst_rk4 < kRk4RelTol && worst_sg < kSemigroupRelTol,
	       fmt("step_exact vs RK4 (h = tau/1000) over 10 tau: max rel %.3g; semigroup: max rel %.3g", worst_rk4,
	           worst_sg));
}

void criterion_6()
{
	const DeviceParams d;
	const DpiParams p;
	const double tau = tau_s(p, d);
	const double w_strong = 0.3e-9, w_weak = 0.1e-9;
	double worst = 0.0;
	for (int k = 0; k < 20; ++k) {
		const double v = 1.40 + 0.1 * k / 19.0;
		const double g = igain_from_vthr(v, d);
		const double closed = steady_state(w_strong, g, p.i_tau) / steady_state(w_weak, g, p.i_tau);
		const double a = step_exact({0.0, 0.0}, w_strong, g, p, d, 50 * tau).i_syn;
		const double b = step_exact({0.0, 0.0}, w_weak, g, p, d, 50 * tau).i_syn;
		worst = std::max({worst, rel(closed, 3.0), rel(a / b, 3.0)});
	}
	report(6, worst < kRatioRelTol, fmt("3:1 weights over V_THR 1.40-1.50 V (20 points): max rel ratio error %.3g", worst));
}

void criterion_8()
{
	const DeviceParams d;
	const double s = builtins::slope_for_doubling_time(60.0, d);
	auto band_at = [&](double slope) {
		Scenario sc = builtins::step_pair();
		sc.name = "ripple";
		sc.llc.v_g = builtins::vg_for_slope(slope, sc.llc, sc.device);
		const Trace tr = run_logged(sc);
		return lock_band(tr);
	};
	const double b1 = band_at(s), b2 = band_at(2 * s);
	const double ratio = b2 / b1;
	report(8, std::isfinite(ratio) && rel(ratio, kRippleRatio) <= kRippleRelTol,
	       fmt("locked ripple after recovery: %.4g (slope %.4g V/s), %.4g (slope %.4g V/s), ratio %.3f", b1, s, b2,
	           2 * s, ratio));
}

void criterion_9()
{
	const Scenario base = builtins::step_pair();
	const auto h1 = trace_hash(run_logged(base));
	const auto h2 = trace_hash(run_logged(base));

	Scenario spk = base;
	spk.mode = SimMode::spiking;
	spk.dt_neuron = 1e-5;
	const Trace coarse = run_logged(spk);
	const auto h3 = trace_hash(coarse);
	const auto h4 = trace_hash(run_logged(spk));
	spk.dt_neuron = 5e-6;
	const Trace fine = run_logged(spk);

	const double r1 = final_rate(coarse), r2 = final_rate(fine);
	report(9, h1 == h2 && h3 == h4 && std::abs(r1 - r2) < kDtHalvingTol,
	       fmt("hashes fast %016llx/%016llx spiking %016llx/%016llx; final mean rate %.4f Hz (dt 1e-5) vs %.4f Hz "
	           "(dt 5e-6)",
	           static_cast<unsigned long long>(h1), static_cast<unsigned long long>(h2),
	           static_cast<unsigned long long>(h3), static_cast<unsigned long long>(h4), r1, r2));
}

void criterion_7()
{
	const DeviceParams d;
	bool monotone = true;
	double prev = igain_from_vthr(0.0, d);
	for (int k = 1; k <= 18000; ++k) {
		const double g = igain_from_vthr(d.v_dd * k / 18000.0, d);
		monotone = monotone && g < prev;
		prev = g;
	}
	report(7, ledger.feedback == 0 && ledger.gain == 0 && monotone,
	       fmt("%llu runs, %llu steps: %llu feedback sign violations, %llu gain direction violations; I_gain strictly "
	           "decreasing on a 0.1 mV grid: %s",
	           static_cast<unsigned long long>(ledger.runs), static_cast<unsigned long long>(ledger.steps),
	           static_cast<unsigned long long>(ledger.feedback), static_cast<unsigned long long>(ledger.gain),
	           monotone ? "yes" : "no"));
}

void guarded(int id, const std::function<void()> &body)
{
	try {
		body();
	} catch (const std::exception &e) {
		report(id, false, std::string("exception: ") + e.what());
	}
}

} // namespace

int main()
{
	guarded(1, criterion_1);
	guarded(2, criterion_2);
	guarded(3, criterion_3);
	guarded(4, criterion_4);
	guarded(5, criterion_5);
	guarded(6, criterion_6);
	guarded(8, criterion_8);
	guarded(9, criterion_9);
	guarded(7, criterion_7);  // last: covers every run above
	int failures = 0;
	for (const auto &[id, r] : results) {
		std::printf("%s criterion %d: %s\n", r.first ? "PASS" : "FAIL", id, r.second.c_str());
		failures += !r.first;
	}
	std::printf("%d criterion failure(s)\n", failures);
	return failures == 0 ? 0 : 1;
}
