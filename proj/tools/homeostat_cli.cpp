// homeostat: command-line front end for the homeostatic AGC simulator.
//
//   homeostat run --builtin step_pair --mode fast --out step_pair.csv
//   homeostat run --scenario my.json --out trace.csv
//   homeostat sweep --scenario my.json --param llc.v_g --values 0.9,0.95 --out sweep.csv
//   homeostat calibrate --rate-points 100@20e-9,180@40e-9
//   homeostat calibrate --slope 1.2e-6
//
// Exit codes: 0 ok, 1 configuration error, 2 numeric abort, 3 I/O error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "homeostat/homeostat.hpp"

namespace fs = std::filesystem;
using namespace homeostat;

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumeric = 2, kIo = 3 };

unsigned thread_cap()
{
	if (const char *env = std::getenv("HOMEOSTAT_THREADS")) {
		try {
			const long n = std::stol(env);
			if (n > 0)
				return static_cast<unsigned>(n);
		} catch (const std::exception &) {
		}
		throw ConfigError("HOMEOSTAT_THREADS", "must be a positive integer");
	}
	return 0;
}

std::vector<double> parse_list(const std::string &field, const std::string &text)
{
	std::vector<double> out;
	std::size_t start = 0;
	while (start <= text.size()) {
		const auto comma = text.find(',', start);
		const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
		try {
			std::size_t used = 0;
			out.push_back(std::stod(item, &used));
			if (used != item.size())
				throw std::invalid_argument(item);
		} catch (const std::exception &) {
			throw ConfigError(field, "cannot parse number '" + item + "'");
		}
		if (comma == std::string::npos)
			break;
		start = comma + 1;
	}
	return out;
}

fs::path indexed_path(const fs::path &out, std::size_t k)
{
	fs::path p = out;
	p.replace_filename(out.stem().string() + "_" + std::to_string(k) + out.extension().string());
	return p;
}

void write_csv(const fs::path &path, const Trace &tr)
{
	write_file_atomic(path, [&](std::ostream &os) { write_trace_csv(os, tr); });
}

void write_summaries(std::ostream &os, const std::string &param, const std::vector<RunSummary> &rows,
                     const std::vector<double> *slopes = nullptr)
{
	os << param << (slopes ? ",slope_V_per_s" : "")
	   << ",ok,recovery_time_s,lock_band_rel,final_rate_Hz,final_v_thr_V,feedback_violations,error\n";
	for (std::size_t i = 0; i < rows.size(); ++i) {
		const auto &r = rows[i];
		os << format_double(r.value);
		if (slopes)
			os << ',' << format_double((*slopes)[i]);
		os << ',' << (r.ok ? 1 : 0) << ',' << format_double(r.recovery_time) << ','
		   << format_double(r.lock_band) << ',' << format_double(r.final_rate) << ','
		   << format_double(r.final_v_thr) << ',' << r.feedback_violations << ',' << r.error << '\n';
	}
}

int cmd_run(const std::string &scenario_path, const std::string &builtin, const std::string &mode,
            const std::string &out)
{
	std::optional<SimMode> mode_override;
	if (mode == "fast")
		mode_override = SimMode::fast;
	else if (mode == "spiking")
		mode_override = SimMode::spiking;
	else if (!mode.empty())
		throw ConfigError("--mode", "expected spiking|fast");

	if (builtin == "slope_sweep") {
		auto f = builtins::slope_sweep();
		if (mode_override)
			f.base.mode = *mode_override;
		const fs::path out_path(out);
		const auto rows = sweep(
			f.base, f.path, f.values, thread_cap(),
			[&](std::size_t k, const Trace &tr) { write_csv(indexed_path(out_path, k), tr); });
		for (std::size_t k = 0; k < rows.size(); ++k)
			if (rows[k].ok)
				std::cerr << "wrote " << indexed_path(out_path, k).string() << '\n';
		write_summaries(std::cout, f.path, rows, &f.slopes);
		for (const auto &r : rows)
			if (!r.ok)
				return kNumeric;
		return kOk;
	}

	Scenario sc;
	if (!scenario_path.empty())
		sc = load_scenario(scenario_path);
	else if (builtin == "step_pair")
		sc = builtins::step_pair();
	else if (builtin == "timescale")
		sc = builtins::timescale();
	else
		throw ConfigError("--builtin", "expected step_pair|slope_sweep|timescale");
	if (mode_override)
		sc.mode = *mode_override;

	const Trace tr = run(sc);
	write_csv(out, tr);
	const auto s = summarize(tr);
	std::cerr << "wrote " << tr.samples.size() << " samples to " << out << "; recovery_time="
	          << format_double(s.recovery_time) << " s final_rate=" << format_double(s.final_rate) << " Hz\n";
	return kOk;
}

int cmd_sweep(const std::string &scenario_path, const std::string &param, const std::string &values,
              const std::string &out)
{
	const Scenario base = load_scenario(scenario_path);
	const auto vals = parse_list("--values", values);
	const auto rows = sweep(base, param, vals, thread_cap());
	write_file_atomic(out, [&](std::ostream &os) { write_summaries(os, param, rows); });
	write_summaries(std::cout, param, rows);
	return kOk;
}

int cmd_calibrate(const std::string &rate_points, const std::optional<double> &slope,
                  const std::string &scenario_path)
{
	const Scenario sc = scenario_path.empty() ? Scenario{} : load_scenario(scenario_path);
	json j;
	if (!rate_points.empty()) {
		std::vector<std::pair<double, double>> pts;
		std::size_t start = 0;
		while (start <= rate_points.size()) {
			const auto comma = rate_points.find(',', start);
			const auto item = rate_points.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
			const auto at = item.find('@');
			if (at == std::string::npos)
				throw ConfigError("--rate-points", "expected rate@current, got '" + item + "'");
			const auto f = parse_list("--rate-points", item.substr(0, at));
			const auto i = parse_list("--rate-points", item.substr(at + 1));
			pts.emplace_back(f.front(), i.front());
			if (comma == std::string::npos)
				break;
			start = comma + 1;
		}
		if (pts.size() != 2)
			throw ConfigError("--rate-points", "needs exactly two rate@current points");
		const auto cal = calibrate_rate_points(pts[0].first, pts[0].second, pts[1].first, pts[1].second);
		j["neuron"] = {{"t_ref", cal.t_ref},
		               {"delta_v", sc.neuron.delta_v},
		               {"c_mem", cal.charge / sc.neuron.delta_v}};
		j["charge_per_spike_C"] = cal.charge;
	}
	if (slope) {
		const double v_g = calibrate_vg_for_slope(*slope, sc.llc.c_f, sc.llc.v_ref_l, sc.llc.v_ref_m, sc.device);
		const double i = llc_channel_current(v_g, sc.llc.v_ref_l, sc.llc.v_ref_m, sc.device);
		j["llc"] = {{"v_g", v_g}};
		j["leak_current_A"] = std::abs(i);
		j["electrons_per_s"] = std::abs(i) / kElementaryCharge;
	}
	if (j.is_null())
		throw ConfigError("calibrate", "give --rate-points and/or --slope");
	std::cout << j.dump(2) << '\n';
	return kOk;
}

} // namespace

int main(int argc, char **argv)
{
	CLI::App app{"Behavioral simulator of a homeostatic synaptic-scaling AGC loop"};
	app.require_subcommand(1);

	std::string scenario, builtin, mode, out, param, values, rate_points;
	std::optional<double> slope;

	auto *run_cmd = app.add_subcommand("run", "Simulate one scenario and write its trace as CSV");
	auto *scen_opt = run_cmd->add_option("--scenario", scenario, "Scenario JSON file");
	auto *builtin_opt = run_cmd->add_option("--builtin", builtin, "Built-in scenario: step_pair|slope_sweep|timescale");
	scen_opt->excludes(builtin_opt);
	run_cmd->add_option("--mode", mode, "Override mode: spiking|fast");
	run_cmd->add_option("--out", out, "Output CSV (slope_sweep: one file per run, suffixed _k)")->required();

	auto *sweep_cmd = app.add_subcommand("sweep", "Run a scenario once per parameter value");
	sweep_cmd->add_option("--scenario", scenario, "Base scenario JSON file")->required();
	sweep_cmd->add_option("--param", param, "Dotted parameter path, e.g. llc.v_g")->required();
	sweep_cmd->add_option("--values", values, "Comma-separated values")->required();
	sweep_cmd->add_option("--out", out, "Summary CSV")->required();

	auto *cal_cmd = app.add_subcommand("calibrate", "Derive parameters from measured operating points");
	cal_cmd->add_option("--rate-points", rate_points, "Two points rate@current, e.g. 100@20e-9,180@40e-9");
	cal_cmd->add_option("--slope", slope, "Target V_THR slope (V/s) for the leakage cell");
	cal_cmd->add_option("--scenario", scenario, "Take device/neuron/llc parameters from this scenario");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError &e) {
		const int code = app.exit(e);
		return code == 0 ? kOk : kConfig;
	}

	try {
		if (*run_cmd) {
			if (scenario.empty() && builtin.empty())
				throw ConfigError("run", "give --scenario or --builtin");
			return cmd_run(scenario, builtin, mode, out);
		}
		if (*sweep_cmd)
			return cmd_sweep(scenario, param, values, out);
		return cmd_calibrate(rate_points, slope, scenario);
	} catch (const ConfigError &e) {
		std::cerr << "config error: " << e.what() << '\n';
		return kConfig;
	} catch (const CalibrationError &e) {
		std::cerr << "calibration error: " << e.what() << '\n';
		return kConfig;
	} catch (const DomainError &e) {
		std::cerr << "config error: " << e.what() << '\n';
		return kConfig;
	} catch (const NonPhysicalError &e) {
		std::cerr << "numeric abort: " << e.what() << '\n';
		return kNumeric;
	} catch (const std::system_error &e) {
		std::cerr << "i/o error: " << e.what() << '\n';
		return kIo;
	}
}
