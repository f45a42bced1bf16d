#pragma once

// Multi-rate engine for the closed homeostatic loop
//
//   drive -> DPI (I_syn) -> neuron
//              ^      \
//           I_gain     comparator -> leakage cell -> V_THR
//
// Time is partitioned at every drive change, reset and sample instant; inside a
// partition the engine takes fixed steps (dt_neuron in spiking mode, a fraction
// of tau_s in fast mode) and updates, in this order: weight current, gain,
// synapse (exact exponential step), neuron, comparator, leakage cell.
// V_THR is held constant during a step. Runs are sequential and deterministic.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "homeostat/agc_loop.hpp"
#include "homeostat/device_models.hpp"
#include "homeostat/dpi_synapse.hpp"
#include "homeostat/errors.hpp"
#include "homeostat/neuron.hpp"

namespace homeostat {

enum class SimMode { spiking, fast };

// Spike train drawn at scenario compile time from the scenario seed.
struct PoissonInput {
	std::string label;
	double weight = 0.0;
	double pulse = 1e-3;
	double rate = 0.0;  // Hz
	double t_start = 0.0;
	double t_stop = 0.0;
};

struct InitialConditions {
	std::optional<double> i_syn;  // default: steady state of the t = 0 drive
	std::optional<double> v_thr;  // default: V_REF_M
	bool reset_at_start = false;  // RST pulse at t = 0, overrides v_thr
};

struct Scenario {
	std::string name = "scenario";
	DeviceParams device;
	DpiParams dpi;
	NeuronParams neuron;
	LlcParams llc;
	ComparatorParams comparator;
	WeightDrive drive;
	std::vector<PoissonInput> poisson;
	std::vector<double> reset_times;
	double duration = 1.0;
	SimMode mode = SimMode::fast;
	double dt_neuron = 1e-5;
	double sample_interval = 1e-2;
	double fast_dt_max = 1e-2;
	InitialConditions initial;
	std::uint64_t seed = 0;

	void validate() const
	{
		device.validate();
		dpi.validate();
		neuron.validate();
		llc.validate(device);
		comparator.validate();
		drive.validate();
		if (!(duration > 0.0))
			throw ConfigError("duration", "must be > 0");
		if (!(dt_neuron > 0.0))
			throw ConfigError("dt_neuron", "must be > 0");
		if (!(sample_interval >= dt_neuron))
			throw ConfigError("sample_interval", "must be >= dt_neuron");
		if (!(fast_dt_max > 0.0))
			throw ConfigError("fast_dt_max", "must be > 0");
		for (const auto &p : poisson) {
			const std::string f = "poisson[" + p.label + "]";
			if (!(p.weight >= 0.0))
				throw ConfigError(f, "weight must be >= 0");
			if (!(p.pulse > 0.0))
				throw ConfigError(f, "pulse must be > 0");
			if (!(p.rate >= 0.0))
				throw ConfigError(f, "rate must be >= 0");
			if (!(p.t_start >= 0.0 && p.t_stop >= p.t_start))
				throw ConfigError(f, "need 0 <= t_start <= t_stop");
		}
		for (double t : reset_times)
			if (!(t >= 0.0 && t <= duration))
				throw ConfigError("reset_times", "must lie in [0, duration]");
		if (initial.i_syn && !(*initial.i_syn >= 0.0))
			throw ConfigError("initial.i_syn", "must be >= 0");
		if (initial.v_thr && !(*initial.v_thr >= 0.0 && *initial.v_thr <= device.v_dd))
			throw ConfigError("initial.v_thr", "must lie in [0, V_dd]");
	}
};

struct Sample {
	double t = 0.0;
	double i_syn = 0.0;
	double v_thr = 0.0;
	double i_gain = 0.0;
	int sw = 0;
	double rate = 0.0;
	double v_syn = 0.0;
	bool saturated = false;
};

enum class EventKind { input_change, reset, lock, unlock, saturation };

inline const char *to_string(EventKind k)
{
	switch (k) {
	case EventKind::input_change: return "input_change";
	case EventKind::reset: return "reset";
	case EventKind::lock: return "lock";
	case EventKind::unlock: return "unlock";
	case EventKind::saturation: return "saturation";
	}
	return "?";
}

struct Event {
	double t = 0.0;
	EventKind kind = EventKind::input_change;
	std::string detail;
};

// One locked stretch. band_* are measured on every step after the second SW
// toggle following lock entry, so the approach transient is excluded, and stop
// at the first drive change or the first step outside the lock tolerance.
struct LockEpisode {
	double start = 0.0;
	double end = std::numeric_limits<double>::quiet_NaN();  // NaN while still locked at run end
	std::uint64_t toggles = 0;
	bool band_closed = false;
	double band_min = std::numeric_limits<double>::infinity();
	double band_max = -std::numeric_limits<double>::infinity();

	bool has_band() const { return band_max >= band_min; }
	double band() const { return has_band() ? band_max - band_min : 0.0; }
};

struct StepStats {
	std::uint64_t steps = 0;
	std::uint64_t feedback_violations = 0;  // sign(i_syn - i_ref) != sign(dV_THR/dt)
	std::uint64_t gain_violations = 0;      // I_gain failed to move against V_THR
	std::uint64_t drive_events = 0;         // drive change instants inside (0, duration)
	std::uint64_t drive_events_on_boundary = 0;
	double max_dt = 0.0;
};

struct Trace {
	std::string scenario;
	SimMode mode = SimMode::fast;
	double i_ref = 0.0;
	std::vector<Sample> samples;
	std::vector<Event> events;
	std::vector<LockEpisode> locks;
	std::vector<double> spike_times;  // spiking mode only
	StepStats stats;
};

// I_gain(V_THR) policy. The engine is parameterized on it so alternative
// conventions can be plugged in.
struct SubthresholdGainLaw {
	static double i_gain(double v_thr, const DeviceParams &d) { return igain_from_vthr(v_thr, d); }
};

inline constexpr double kLockTolerance = 0.01;
inline constexpr int kLockSamples = 5;

namespace detail {

inline WeightDrive expand_drive(const Scenario &sc)
{
	WeightDrive drive = sc.drive;
	for (std::size_t k = 0; k < sc.poisson.size(); ++k) {
		const auto &p = sc.poisson[k];
		SpikeInput in{p.label, p.weight, p.pulse, {}};
		if (p.rate > 0.0) {
			std::mt19937_64 rng(sc.seed * 0x9E3779B97F4A7C15ULL + k + 1);
			std::exponential_distribution<double> isi(p.rate);
			for (double t = p.t_start + isi(rng); t < p.t_stop; t += isi(rng))
				in.times.push_back(t);
		}
		drive.spike_inputs.push_back(std::move(in));
	}
	return drive;
}

inline std::string fmt_current(double a)
{
	char buf[64];
	std::snprintf(buf, sizeof buf, "I_w=%.6g A", a);
	return buf;
}

} // namespace detail

template <class GainLaw = SubthresholdGainLaw>
class BasicEngine {
public:
	explicit BasicEngine(Scenario sc) : sc_(std::move(sc))
	{
		sc_.validate();
		drive_ = detail::expand_drive(sc_);
		drive_.validate();
	}

	const Scenario &scenario() const { return sc_; }

	// Nominal step inside a partition.
	double nominal_dt() const
	{
		if (sc_.mode == SimMode::spiking)
			return sc_.dt_neuron;
		return std::min(tau_s(sc_.dpi, sc_.device) / 10.0, sc_.fast_dt_max);
	}

	Trace run() const
	{
		double now = 0.0;
		try {
			return run_impl(now);
		} catch (const NonPhysicalError &e) {
			throw NonPhysicalError(std::string(e.what()) + " at t = " + std::to_string(now), now);
		}
	}

private:
	double gain_at(double v_thr) const
	{
		if (sc_.dpi.gain_source == GainSource::fixed)
			return sc_.dpi.fixed_i_gain;
		return GainLaw::i_gain(v_thr, sc_.device);
	}

	Trace run_impl(double &abort_time) const
	{
		const auto &dev = sc_.device;
		const double T = sc_.duration;
		const double h = nominal_dt();
		const double tau = tau_s(sc_.dpi, dev);
		const double decay_h = std::exp(-h / tau);
		const double slope_up = llc_slope_up(sc_.llc, dev);
		const double slope_down = llc_slope_down(sc_.llc, dev);
		const double i_ref = sc_.comparator.i_ref;
		const double deadband = i_ref * sc_.comparator.hysteresis;

		Trace tr;
		tr.scenario = sc_.name;
		tr.mode = sc_.mode;
		tr.i_ref = i_ref;

		// Partition boundaries other than samples: drive changes and resets.
		std::vector<double> drive_times;
		for (double t : drive_.change_times())
			if (t > 0.0 && t < T)
				drive_times.push_back(t);
		tr.stats.drive_events = drive_times.size();
		std::vector<double> reset_times = sc_.reset_times;
		std::sort(reset_times.begin(), reset_times.end());
		std::vector<double> boundaries = drive_times;
		for (double t : reset_times)
			if (t > 0.0 && t < T)
				boundaries.push_back(t);
		boundaries.push_back(T);
		std::sort(boundaries.begin(), boundaries.end());
		boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());

		const auto n_samples = static_cast<std::uint64_t>(std::floor(T / sc_.sample_interval + 1e-9));
		auto sample_time = [&](std::uint64_t k) { return static_cast<double>(k) * sc_.sample_interval; };
		tr.samples.reserve(n_samples + 1);

		// Initial state.
		AgcState agc;
		agc.v_thr = sc_.initial.v_thr.value_or(sc_.llc.v_ref_m);
		if (sc_.initial.reset_at_start || std::count(reset_times.begin(), reset_times.end(), 0.0) > 0) {
			agc = reset(agc, sc_.llc);
			tr.events.push_back({0.0, EventKind::reset, "v_thr=v_ref_m"});
		}
		std::size_t next_boundary = 0;
		auto partition_end = [&]() { return boundaries[next_boundary]; };
		auto drive_in_partition = [&](double t) {
			return total_weight_current(drive_, 0.5 * (t + partition_end()));
		};

		double t = 0.0;
		double i_w = drive_in_partition(0.0);
		double i_gain = gain_at(agc.v_thr);
		DpiState dpi{sc_.initial.i_syn.value_or(steady_state(i_w, i_gain, sc_.dpi.i_tau)), 0.0};
		agc.sw = comparator(dpi.i_syn, Switch::low, sc_.comparator);
		NeuronState neuron;
		tr.events.push_back({0.0, EventKind::input_change, detail::fmt_current(i_w)});

		// Lock tracking.
		bool locked = false;
		int in_band = 0;
		double candidate = 0.0;
		bool was_saturated = false;

		auto record_sample = [&](double ts) {
			Sample s;
			s.t = ts;
			s.i_syn = dpi.i_syn;
			s.v_thr = agc.v_thr;
			s.i_gain = gain_at(agc.v_thr);
			s.sw = static_cast<int>(agc.sw);
			if (sc_.mode == SimMode::fast)
				s.rate = rate_model(dpi.i_syn, sc_.neuron);
			else
				s.rate = instantaneous_rate(neuron.spike_times, ts, sc_.sample_interval);
			s.v_syn = v_syn_from_isyn(dpi.i_syn, dev);
			s.saturated = agc.saturated;
			tr.samples.push_back(s);

			const bool inside = std::abs(dpi.i_syn - i_ref) < kLockTolerance * i_ref;
			if (inside) {
				if (in_band++ == 0)
					candidate = ts;
				if (!locked && in_band >= kLockSamples) {
					locked = true;
					tr.events.push_back({candidate, EventKind::lock, ""});
					LockEpisode ep;
					ep.start = candidate;
					tr.locks.push_back(ep);
				}
			} else {
				in_band = 0;
				if (locked) {
					locked = false;
					tr.locks.back().end = ts;
					tr.events.push_back({ts, EventKind::unlock, ""});
				}
			}
		};

		record_sample(0.0);
		std::uint64_t next_sample = 1;
		double prev_v_for_gain = agc.v_thr;
		double prev_gain = i_gain;

		while (t < T) {
			const double bound = std::min(partition_end(), next_sample <= n_samples ? sample_time(next_sample) : T);
			double dt, t_next;
			if (bound - t <= h * (1.0 + 1e-9)) {
				dt = bound - t;
				t_next = bound;
			} else {
				dt = h;
				t_next = t + h;
			}
			abort_time = t;

			// (2) gain from the held V_THR
			if (agc.v_thr != prev_v_for_gain) {
				i_gain = gain_at(agc.v_thr);
				if (sc_.dpi.gain_source == GainSource::agc &&
				    !((agc.v_thr > prev_v_for_gain) ? (i_gain < prev_gain) : (i_gain > prev_gain)))
					++tr.stats.gain_violations;
				prev_v_for_gain = agc.v_thr;
				prev_gain = i_gain;
			}

			// (3) synapse, exact for constant drive
			const double ss = i_w * i_gain / sc_.dpi.i_tau;
			const double decay = dt == h ? decay_h : std::exp(-dt / tau);
			dpi.i_syn = ss + (dpi.i_syn - ss) * decay;
			dpi.t = t_next;

			// (4) neuron
			if (sc_.mode == SimMode::spiking)
				integrate(neuron, dpi.i_syn, sc_.neuron, t, dt);

			// (5) comparator
			const Switch prev_sw = agc.sw;
			agc.sw = comparator(dpi.i_syn, agc.sw, sc_.comparator);

			// (6) leakage cell
			const double v_old = agc.v_thr;
			const double v_raw = v_old + llc_rate(agc.sw, slope_up, slope_down, sc_.llc) * dt;
			agc.v_thr = std::clamp(v_raw, 0.0, dev.v_dd);
			agc.saturated = agc.v_thr != v_raw;
			if (agc.saturated && !was_saturated)
				tr.events.push_back({t_next, EventKind::saturation, agc.v_thr == 0.0 ? "v_thr=0" : "v_thr=v_dd"});
			was_saturated = agc.saturated;

			const double err = dpi.i_syn - i_ref;
			const double dv = agc.v_thr - v_old;
			if (std::abs(err) > deadband && ((err > 0.0 && dv < 0.0) || (err < 0.0 && dv > 0.0)))
				++tr.stats.feedback_violations;

			if (locked) {
				auto &ep = tr.locks.back();
				if (agc.sw != prev_sw)
					++ep.toggles;
				if (std::abs(err) >= kLockTolerance * i_ref) {
					ep.band_closed = true;
				} else if (!ep.band_closed && ep.toggles >= 2) {
					ep.band_min = std::min(ep.band_min, dpi.i_syn);
					ep.band_max = std::max(ep.band_max, dpi.i_syn);
				}
			}

			++tr.stats.steps;
			tr.stats.max_dt = std::max(tr.stats.max_dt, dt);
			t = t_next;

			if (t == partition_end() && t < T) {
				if (std::binary_search(drive_times.begin(), drive_times.end(), t)) {
					++tr.stats.drive_events_on_boundary;
					const double before = i_w;
					++next_boundary;
					i_w = drive_in_partition(t);
					if (i_w != before) {
						tr.events.push_back({t, EventKind::input_change, detail::fmt_current(i_w)});
						if (locked)
							tr.locks.back().band_closed = true;
					}
				} else {
					++next_boundary;
				}
				if (std::binary_search(reset_times.begin(), reset_times.end(), t)) {
					agc = reset(agc, sc_.llc);
					tr.events.push_back({t, EventKind::reset, "v_thr=v_ref_m"});
				}
			}
			if (next_sample <= n_samples && t == sample_time(next_sample)) {
				record_sample(t);
				++next_sample;
			}
		}
		if (locked)
			tr.locks.back().end = std::numeric_limits<double>::quiet_NaN();
		std::stable_sort(tr.events.begin(), tr.events.end(),
		                 [](const Event &a, const Event &b) { return a.t < b.t; });
		tr.spike_times = std::move(neuron.spike_times);
		return tr;
	}

	Scenario sc_;
	WeightDrive drive_;
};

using Engine = BasicEngine<>;

inline Trace run(const Scenario &sc) { return Engine(sc).run(); }

// 64-bit FNV-1a over every sample and event; equal hashes for bit-identical traces.
inline std::uint64_t trace_hash(const Trace &tr)
{
	std::uint64_t h = 0xcbf29ce484222325ULL;
	auto mix = [&](const void *p, std::size_t n) {
		const auto *b = static_cast<const unsigned char *>(p);
		for (std::size_t i = 0; i < n; ++i) {
			h ^= b[i];
			h *= 0x100000001b3ULL;
		}
	};
	for (const auto &s : tr.samples) {
		const double v[] = {s.t, s.i_syn, s.v_thr, s.i_gain, s.rate, s.v_syn};
		mix(v, sizeof v);
		mix(&s.sw, sizeof s.sw);
		const unsigned char sat = s.saturated;
		mix(&sat, 1);
	}
	for (const auto &e : tr.events) {
		mix(&e.t, sizeof e.t);
		const int k = static_cast<int>(e.kind);
		mix(&k, sizeof k);
		mix(e.detail.data(), e.detail.size());
	}
	mix(tr.spike_times.data(), tr.spike_times.size() * sizeof(double));
	return h;
}

// ---------------------------------------------------------------------------
// Trace measurements

// Time from the last drive change to the lock that follows it; NaN when the
// run never re-locks or has no drive change after t = 0.
inline double recovery_time(const Trace &tr)
{
	double last_change = std::numeric_limits<double>::quiet_NaN();
	for (const auto &e : tr.events)
		if (e.kind == EventKind::input_change && e.t > 0.0)
			last_change = e.t;
	if (std::isnan(last_change))
		return last_change;
	for (const auto &e : tr.events)
		if (e.kind == EventKind::lock && e.t >= last_change)
			return e.t - last_change;
	return std::numeric_limits<double>::quiet_NaN();
}

// Firing rate over the last `window` seconds: inter-spike mean in spiking
// mode, sample average of the rate channel in fast mode.
inline double final_rate(const Trace &tr, double window = 1.0)
{
	if (tr.samples.empty())
		return 0.0;
	const double t_end = tr.samples.back().t;
	if (tr.mode == SimMode::spiking)
		return mean_isi_rate(tr.spike_times, t_end - window, t_end);
	double sum = 0.0;
	std::size_t n = 0;
	for (auto it = tr.samples.rbegin(); it != tr.samples.rend() && it->t >= t_end - window; ++it) {
		sum += it->rate;
		++n;
	}
	return sum / static_cast<double>(n);
}

// Relative ripple band of the last lock episode that has one, else NaN.
inline double lock_band(const Trace &tr)
{
	for (auto it = tr.locks.rbegin(); it != tr.locks.rend(); ++it)
		if (it->has_band())
			return it->band() / tr.i_ref;
	return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Sweeps

struct RunSummary {
	double value = 0.0;
	bool ok = false;
	std::string error;
	double recovery_time = std::numeric_limits<double>::quiet_NaN();
	double lock_band = std::numeric_limits<double>::quiet_NaN();
	double final_rate = 0.0;
	double final_v_thr = 0.0;
	std::uint64_t feedback_violations = 0;
	std::uint64_t hash = 0;
};

inline RunSummary summarize(const Trace &tr, double value = 0.0)
{
	RunSummary s;
	s.value = value;
	s.ok = true;
	s.recovery_time = recovery_time(tr);
	s.lock_band = lock_band(tr);
	s.final_rate = final_rate(tr);
	s.final_v_thr = tr.samples.empty() ? 0.0 : tr.samples.back().v_thr;
	s.feedback_violations = tr.stats.feedback_violations;
	s.hash = trace_hash(tr);
	return s;
}

using ScenarioEdit = std::function<void(Scenario &, double)>;
using TraceSink = std::function<void(std::size_t, const Trace &)>;

// Runs one scenario per value, up to `threads` at a time (0: hardware
// concurrency). Results are indexed by value, never by completion order; a
// failing value yields ok = false and does not stop the others. `sink`, if
// given, sees every successful trace (possibly from worker threads).
inline std::vector<RunSummary> sweep(const Scenario &base, const ScenarioEdit &edit,
                                     const std::vector<double> &values, unsigned threads = 0,
                                     const TraceSink &sink = {})
{
	std::vector<RunSummary> out(values.size());
	std::atomic<std::size_t> next{0};
	auto worker = [&]() {
		for (std::size_t i = next++; i < values.size(); i = next++) {
			try {
				Scenario sc = base;
				edit(sc, values[i]);
				const Trace tr = run(sc);
				out[i] = summarize(tr, values[i]);
				if (sink)
					sink(i, tr);
			} catch (const std::exception &e) {
				out[i].value = values[i];
				out[i].ok = false;
				out[i].error = e.what();
			}
		}
	};
	if (threads == 0)
		threads = std::max(1u, std::thread::hardware_concurrency());
	threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(values.size(), 1)));
	if (threads <= 1) {
		worker();
		return out;
	}
	std::vector<std::jthread> pool;
	for (unsigned k = 0; k < threads; ++k)
		pool.emplace_back(worker);
	return out;
}

// ---------------------------------------------------------------------------
// Fast-mode validation against the spiking run

struct EquivalenceReport {
	std::size_t samples = 0;
	double max_isyn_rel_dev = 0.0;
	double rate_rms_dev = 0.0;  // Hz
	double rate_max_dev = 0.0;  // Hz
	Trace spiking;
	Trace fast;
};

inline EquivalenceReport run_fast_equivalence(const Scenario &sc)
{
	if (sc.duration > 300.0)
		throw ConfigError("duration", "equivalence runs are limited to 300 s of simulated time");
	Scenario s = sc;
	s.mode = SimMode::spiking;
	Scenario f = sc;
	f.mode = SimMode::fast;

	EquivalenceReport r;
	r.spiking = run(s);
	r.fast = run(f);
	const std::size_t n = std::min(r.spiking.samples.size(), r.fast.samples.size());
	r.samples = n;
	double sq = 0.0;
	for (std::size_t i = 0; i < n; ++i) {
		const auto &a = r.spiking.samples[i];
		const auto &b = r.fast.samples[i];
		const double scale = std::max(std::abs(a.i_syn), std::abs(b.i_syn));
		if (scale > 0.0)
			r.max_isyn_rel_dev = std::max(r.max_isyn_rel_dev, std::abs(a.i_syn - b.i_syn) / scale);
		const double d = a.rate - b.rate;
		sq += d * d;
		r.rate_max_dev = std::max(r.rate_max_dev, std::abs(d));
	}
	r.rate_rms_dev = n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
	return r;
}

} // namespace homeostat
