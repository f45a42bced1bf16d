#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "homeostat/neuron.hpp"

using namespace homeostat;
using Catch::Approx;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Runs the neuron on a constant input for `duration` with step dt.
NeuronState drive(double i_in, const NeuronParams &p, double duration, double dt)
{
	NeuronState s;
	const auto n = static_cast<long>(std::llround(duration / dt));
	for (long k = 0; k < n; ++k)
		integrate(s, i_in, p, k * dt, dt);
	return s;
}

} // namespace

TEST_CASE("two-point rate calibration", "[neuron][calibration]")
{
	// 1/f = t_ref + Q/I solved by hand at (100 Hz, 20 nA) and (180 Hz, 40 nA)
	const auto cal = calibrate_rate_points(100, 20e-9, 180, 40e-9);
	REQUIRE(rel(cal.t_ref, 1.1111111111111111e-3) < 1e-12);
	REQUIRE(rel(cal.charge, 1.7777777777777778e-10) < 1e-12);

	NeuronParams p;
	p.t_ref = cal.t_ref;
	p.c_mem = cal.charge / p.delta_v;
	REQUIRE(rel(rate_model(20e-9, p), 100.0) < 1e-9);
	REQUIRE(rel(rate_model(40e-9, p), 180.0) < 1e-9);

	SECTION("defaults carry the same calibration")
	{
		const NeuronParams def;
		REQUIRE(rel(def.t_ref, cal.t_ref) < 1e-12);
		REQUIRE(rel(def.charge_per_spike(), cal.charge) < 1e-12);
	}

	SECTION("rate_model outputs fed back recover the parameters")
	{
		std::mt19937_64 rng(1);
		std::uniform_real_distribution<double> tr(1e-4, 5e-3), q(1e-12, 1e-9), cur(1e-10, 1e-7);
		for (int i = 0; i < 100; ++i) {
			NeuronParams n;
			n.t_ref = tr(rng);
			n.c_mem = q(rng) / n.delta_v;
			double i1 = cur(rng), i2 = cur(rng);
			if (i1 > i2)
				std::swap(i1, i2);
			if (i2 / i1 < 1.01)
				continue;
			const auto back = calibrate_rate_points(rate_model(i1, n), i1, rate_model(i2, n), i2);
			REQUIRE(rel(back.t_ref, n.t_ref) < 1e-8);
			REQUIRE(rel(back.charge, n.charge_per_spike()) < 1e-8);
		}
	}

	SECTION("infeasible points")
	{
		// 1000 Hz at 40 nA after 100 Hz at 20 nA needs a negative refractory period
		REQUIRE_THROWS_AS(calibrate_rate_points(100, 20e-9, 1000, 40e-9), CalibrationError);
		REQUIRE_THROWS_AS(calibrate_rate_points(180, 20e-9, 100, 40e-9), CalibrationError);
		REQUIRE_THROWS_AS(calibrate_rate_points(100, 40e-9, 180, 20e-9), CalibrationError);
	}
}

TEST_CASE("rate_model limits", "[neuron]")
{
	NeuronParams p;
	p.i_leak = 1e-9;
	REQUIRE(rate_model(0.5e-9, p) == 0.0);
	REQUIRE(rate_model(1e-9, p) == 0.0);
	REQUIRE(rate_model(1e3, p) == Approx(1.0 / p.t_ref).epsilon(1e-9));
	double prev = 0.0;
	for (double i = 1e-9; i < 1e-6; i *= 1.1) {
		const double f = rate_model(i, p);
		REQUIRE(f >= prev);
		REQUIRE(f < 1.0 / p.t_ref);
		prev = f;
	}
}

TEST_CASE("integrate: zero net drive and the calibrated operating point", "[neuron]")
{
	NeuronParams p;

	SECTION("input equal to the leak leaves the membrane alone")
	{
		p.i_leak = 5e-9;
		NeuronState s;
		s.v_mem = 0.1;
		integrate(s, 5e-9, p, 0.0, 0.5);
		REQUIRE(s.v_mem == 0.1);
		REQUIRE(s.spike_times.empty());
	}

	SECTION("20 nA fires at 100 Hz")
	{
		const auto s = drive(20e-9, p, 1.0, 1e-5);
		const double mean = mean_isi_rate(s.spike_times, 0.0, 1.0);
		REQUIRE(std::abs(mean - 100.0) < 0.5);
		REQUIRE(s.spike_times.size() >= 99);
	}

	SECTION("several spikes inside one wide window")
	{
		NeuronState s;
		const auto n = integrate(s, 40e-9, p, 0.0, 0.1);
		REQUIRE(n == 18);
		for (std::size_t k = 1; k < s.spike_times.size(); ++k)
			REQUIRE(s.spike_times[k] - s.spike_times[k - 1] >= p.t_ref);
	}

	SECTION("leak pulls the membrane down but not below zero")
	{
		p.i_leak = 1e-9;
		NeuronState s;
		s.v_mem = 1e-3;
		integrate(s, 0.0, p, 0.0, 1.0);
		REQUIRE(s.v_mem == 0.0);
	}
}

TEST_CASE("integrate matches rate_model and is step-size independent", "[neuron][property]")
{
	const NeuronParams p;

	SECTION("empirical rate within 1% of the closed form over 10-500 Hz")
	{
		for (double f : {10.0, 50.0, 100.0, 180.0, 300.0, 500.0}) {
			// invert rate_model for the input current
			const double i = p.charge_per_spike() / (1.0 / f - p.t_ref);
			for (double dt : {1e-5, 5e-5}) {
				const auto s = drive(i, p, 2.0, dt);
				REQUIRE(rel(mean_isi_rate(s.spike_times, 0.0, 2.0), f) < 0.01);
			}
		}
	}

	SECTION("halving dt keeps spike times within dt/2 of a 1 us reference")
	{
		const auto ref = drive(20e-9, p, 0.5, 1e-6);
		for (double dt : {1e-5, 5e-6}) {
			const auto s = drive(20e-9, p, 0.5, dt);
			REQUIRE(s.spike_times.size() == ref.spike_times.size());
			for (std::size_t k = 0; k < s.spike_times.size(); ++k)
				REQUIRE(std::abs(s.spike_times[k] - ref.spike_times[k]) <= dt / 2);
		}
	}

	SECTION("rate increases with input")
	{
		const auto a = drive(20e-9, p, 1.0, 1e-5);
		const auto b = drive(40e-9, p, 1.0, 1e-5);
		REQUIRE(b.spike_times.size() > a.spike_times.size());
	}

	SECTION("refractory gaps hold for random piecewise drive")
	{
		std::mt19937_64 rng(9);
		std::uniform_real_distribution<double> cur(0.0, 200e-9);
		NeuronState s;
		double t = 0.0;
		for (int k = 0; k < 20000; ++k) {
			integrate(s, cur(rng), p, t, 1e-4);
			t += 1e-4;
		}
		for (std::size_t k = 1; k < s.spike_times.size(); ++k)
			REQUIRE(s.spike_times[k] - s.spike_times[k - 1] >= p.t_ref * (1 - 1e-12));
	}
}

TEST_CASE("instantaneous rate estimators", "[neuron][rate]")
{
	std::vector<double> periodic;
	for (int k = 0; k < 100; ++k)
		periodic.push_back(0.01 * k);
	REQUIRE(instantaneous_rate(periodic, 0.5, 0.1) == Approx(100.0).epsilon(1e-9));
	REQUIRE(instantaneous_rate({}, 0.5, 0.1) == 0.0);
	REQUIRE(instantaneous_rate(std::vector<double>{0.1}, 0.5, 0.1) == 0.0);
	REQUIRE_THROWS_AS(instantaneous_rate(periodic, 0.5, 0.0), DomainError);

	SECTION("windowed count on a jittered 100 Hz train")
	{
		std::mt19937_64 rng(2024);
		std::exponential_distribution<double> isi(100.0);
		std::vector<double> train;
		for (double t = isi(rng); t < 20.0; t += isi(rng))
			train.push_back(t);
		// a single 0.5 s Poisson count has sd ~14%, so check the run average
		double sum = 0.0;
		int n = 0;
		for (double t = 0.5; t <= 20.0; t += 0.5, ++n)
			sum += instantaneous_rate(train, t, 0.5, RateEstimator::windowed_count);
		REQUIRE(sum / n == Approx(100.0).epsilon(0.10));
	}

	SECTION("windowed count on a mildly jittered periodic train")
	{
		std::mt19937_64 rng(77);
		std::uniform_real_distribution<double> jitter(-1e-3, 1e-3);
		std::vector<double> train;
		for (int k = 1; k < 2000; ++k)
			train.push_back(0.01 * k + jitter(rng));
		for (double t = 1.0; t < 19.0; t += 0.37)
			REQUIRE(instantaneous_rate(train, t, 0.5, RateEstimator::windowed_count) ==
			        Approx(100.0).epsilon(0.10));
	}
}
