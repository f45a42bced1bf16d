#pragma once

// Scenario files (JSON) and trace files (CSV).
//
// Scenario JSON mirrors the Scenario struct; every key is optional and falls
// back to the struct default, unknown keys are rejected with their full path.
// Trace CSV: header row, one row per sample with 17 significant digits, then
// the event log as '#' comment lines.

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "homeostat/errors.hpp"
#include "homeostat/sim_engine.hpp"

namespace homeostat {

using json = nlohmann::json;

namespace detail {

// Walks one JSON object, remembering which keys were read so leftovers can be
// reported as unknown.
class ObjectReader {
public:
	ObjectReader(const json &j, std::string path) : j_(j), path_(std::move(path))
	{
		if (!j_.is_object())
			throw ConfigError(path_.empty() ? "<root>" : path_, "expected a JSON object");
	}

	std::string field(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

	const json *find(const std::string &key)
	{
		auto it = j_.find(key);
		if (it == j_.end())
			return nullptr;
		seen_.insert(key);
		return &*it;
	}

	void number(const std::string &key, double &out)
	{
		if (const json *v = find(key)) {
			if (!v->is_number())
				throw ConfigError(field(key), "expected a number");
			out = v->get<double>();
		}
	}

	void optional_number(const std::string &key, std::optional<double> &out)
	{
		if (const json *v = find(key)) {
			if (v->is_null())
				out.reset();
			else if (v->is_number())
				out = v->get<double>();
			else
				throw ConfigError(field(key), "expected a number or null");
		}
	}

	void boolean(const std::string &key, bool &out)
	{
		if (const json *v = find(key)) {
			if (!v->is_boolean())
				throw ConfigError(field(key), "expected true or false");
			out = v->get<bool>();
		}
	}

	void string(const std::string &key, std::string &out)
	{
		if (const json *v = find(key)) {
			if (!v->is_string())
				throw ConfigError(field(key), "expected a string");
			out = v->get<std::string>();
		}
	}

	void uint64(const std::string &key, std::uint64_t &out)
	{
		if (const json *v = find(key)) {
			if (!v->is_number_unsigned())
				throw ConfigError(field(key), "expected a non-negative integer");
			out = v->get<std::uint64_t>();
		}
	}

	void numbers(const std::string &key, std::vector<double> &out)
	{
		if (const json *v = find(key)) {
			if (!v->is_array())
				throw ConfigError(field(key), "expected an array of numbers");
			out.clear();
			for (const auto &x : *v) {
				if (!x.is_number())
					throw ConfigError(field(key), "expected an array of numbers");
				out.push_back(x.get<double>());
			}
		}
	}

	template <class F>
	void objects(const std::string &key, F &&each)
	{
		if (const json *v = find(key)) {
			if (!v->is_array())
				throw ConfigError(field(key), "expected an array of objects");
			for (std::size_t i = 0; i < v->size(); ++i) {
				ObjectReader r((*v)[i], field(key) + "[" + std::to_string(i) + "]");
				each(r);
				r.finish();
			}
		}
	}

	template <class F>
	void object(const std::string &key, F &&each)
	{
		if (const json *v = find(key)) {
			ObjectReader r(*v, field(key));
			each(r);
			r.finish();
		}
	}

	void finish() const
	{
		for (auto it = j_.begin(); it != j_.end(); ++it)
			if (!seen_.count(it.key()))
				throw ConfigError(field(it.key()), "unknown key");
	}

private:
	const json &j_;
	std::string path_;
	std::set<std::string> seen_;
};

template <class E>
E parse_enum(ObjectReader &r, const std::string &key, E current,
             std::initializer_list<std::pair<const char *, E>> names)
{
	std::string s;
	for (const auto &[n, e] : names)
		if (e == current)
			s = n;
	r.string(key, s);
	for (const auto &[n, e] : names)
		if (s == n)
			return e;
	std::string allowed;
	for (const auto &[n, e] : names)
		allowed += (allowed.empty() ? "" : "|") + std::string(n);
	throw ConfigError(r.field(key), "expected one of " + allowed);
}

inline json optional_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

} // namespace detail

inline const char *to_string(SimMode m) { return m == SimMode::spiking ? "spiking" : "fast"; }

inline json to_json(const Scenario &sc)
{
	json j;
	j["name"] = sc.name;
	j["device"] = {{"u_t", sc.device.u_t},
	               {"kappa", sc.device.kappa},
	               {"v_dd", sc.device.v_dd},
	               {"i0_gain", sc.device.i0_gain},
	               {"i0_llc", sc.device.i0_llc}};
	j["dpi"] = {{"c_dpi", sc.dpi.c_dpi},
	            {"i_tau", sc.dpi.i_tau},
	            {"gain_source", sc.dpi.gain_source == GainSource::agc ? "agc" : "fixed"},
	            {"fixed_i_gain", sc.dpi.fixed_i_gain}};
	j["neuron"] = {{"c_mem", sc.neuron.c_mem},
	               {"delta_v", sc.neuron.delta_v},
	               {"t_ref", sc.neuron.t_ref},
	               {"i_leak", sc.neuron.i_leak}};
	j["llc"] = {{"c_f", sc.llc.c_f},
	            {"v_ref_l", sc.llc.v_ref_l},
	            {"v_ref_m", sc.llc.v_ref_m},
	            {"v_ref_h", sc.llc.v_ref_h},
	            {"v_g", sc.llc.v_g},
	            {"mode", sc.llc.mode == LlcMode::channel ? "channel" : "fixed_slope"},
	            {"slope_up", sc.llc.slope_up},
	            {"slope_down", sc.llc.slope_down},
	            {"i_gate_leak", sc.llc.i_gate_leak}};
	j["comparator"] = {{"i_ref", sc.comparator.i_ref}, {"hysteresis", sc.comparator.hysteresis}};

	json dc = json::array();
	for (const auto &in : sc.drive.dc_inputs) {
		json segs = json::array();
		for (const auto &s : in.segments)
			segs.push_back({{"t", s.t_start}, {"i", s.current}});
		dc.push_back({{"label", in.label}, {"segments", segs}});
	}
	json spikes = json::array();
	for (const auto &in : sc.drive.spike_inputs)
		spikes.push_back({{"label", in.label}, {"weight", in.weight}, {"pulse", in.pulse}, {"times", in.times}});
	json poisson = json::array();
	for (const auto &p : sc.poisson)
		poisson.push_back({{"label", p.label},
		                   {"weight", p.weight},
		                   {"pulse", p.pulse},
		                   {"rate", p.rate},
		                   {"t_start", p.t_start},
		                   {"t_stop", p.t_stop}});
	j["drive"] = {{"dc", dc}, {"spikes", spikes}, {"poisson", poisson}};

	j["reset_times"] = sc.reset_times;
	j["duration"] = sc.duration;
	j["mode"] = to_string(sc.mode);
	j["dt_neuron"] = sc.dt_neuron;
	j["sample_interval"] = sc.sample_interval;
	j["fast_dt_max"] = sc.fast_dt_max;
	j["initial"] = {{"i_syn", detail::optional_json(sc.initial.i_syn)},
	                {"v_thr", detail::optional_json(sc.initial.v_thr)},
	                {"reset_at_start", sc.initial.reset_at_start}};
	j["seed"] = sc.seed;
	return j;
}

// Parses and validates. Throws ConfigError naming the offending field.
inline Scenario scenario_from_json(const json &j)
{
	using detail::ObjectReader;
	Scenario sc;
	ObjectReader root(j, "");
	root.string("name", sc.name);
	root.object("device", [&](ObjectReader &r) {
		r.number("u_t", sc.device.u_t);
		r.number("kappa", sc.device.kappa);
		r.number("v_dd", sc.device.v_dd);
		r.number("i0_gain", sc.device.i0_gain);
		r.number("i0_llc", sc.device.i0_llc);
	});
	root.object("dpi", [&](ObjectReader &r) {
		r.number("c_dpi", sc.dpi.c_dpi);
		r.number("i_tau", sc.dpi.i_tau);
		sc.dpi.gain_source = detail::parse_enum(r, "gain_source", sc.dpi.gain_source,
		                                        {{"agc", GainSource::agc}, {"fixed", GainSource::fixed}});
		r.number("fixed_i_gain", sc.dpi.fixed_i_gain);
	});
	root.object("neuron", [&](ObjectReader &r) {
		r.number("c_mem", sc.neuron.c_mem);
		r.number("delta_v", sc.neuron.delta_v);
		r.number("t_ref", sc.neuron.t_ref);
		r.number("i_leak", sc.neuron.i_leak);
	});
	root.object("llc", [&](ObjectReader &r) {
		r.number("c_f", sc.llc.c_f);
		r.number("v_ref_l", sc.llc.v_ref_l);
		r.number("v_ref_m", sc.llc.v_ref_m);
		r.number("v_ref_h", sc.llc.v_ref_h);
		r.number("v_g", sc.llc.v_g);
		sc.llc.mode = detail::parse_enum(r, "mode", sc.llc.mode,
		                                 {{"channel", LlcMode::channel}, {"fixed_slope", LlcMode::fixed_slope}});
		r.number("slope_up", sc.llc.slope_up);
		r.number("slope_down", sc.llc.slope_down);
		r.number("i_gate_leak", sc.llc.i_gate_leak);
	});
	root.object("comparator", [&](ObjectReader &r) {
		r.number("i_ref", sc.comparator.i_ref);
		r.number("hysteresis", sc.comparator.hysteresis);
	});
	root.object("drive", [&](ObjectReader &r) {
		r.objects("dc", [&](ObjectReader &in) {
			DcInput dc;
			in.string("label", dc.label);
			in.objects("segments", [&](ObjectReader &seg) {
				Segment s;
				seg.number("t", s.t_start);
				seg.number("i", s.current);
				dc.segments.push_back(s);
			});
			sc.drive.dc_inputs.push_back(std::move(dc));
		});
		r.objects("spikes", [&](ObjectReader &in) {
			SpikeInput sp;
			in.string("label", sp.label);
			in.number("weight", sp.weight);
			in.number("pulse", sp.pulse);
			in.numbers("times", sp.times);
			sc.drive.spike_inputs.push_back(std::move(sp));
		});
		r.objects("poisson", [&](ObjectReader &in) {
			PoissonInput p;
			in.string("label", p.label);
			in.number("weight", p.weight);
			in.number("pulse", p.pulse);
			in.number("rate", p.rate);
			in.number("t_start", p.t_start);
			in.number("t_stop", p.t_stop);
			sc.poisson.push_back(std::move(p));
		});
	});
	root.numbers("reset_times", sc.reset_times);
	root.number("duration", sc.duration);
	sc.mode = detail::parse_enum(root, "mode", sc.mode, {{"spiking", SimMode::spiking}, {"fast", SimMode::fast}});
	root.number("dt_neuron", sc.dt_neuron);
	root.number("sample_interval", sc.sample_interval);
	root.number("fast_dt_max", sc.fast_dt_max);
	root.object("initial", [&](ObjectReader &r) {
		r.optional_number("i_syn", sc.initial.i_syn);
		r.optional_number("v_thr", sc.initial.v_thr);
		r.boolean("reset_at_start", sc.initial.reset_at_start);
	});
	root.uint64("seed", sc.seed);
	root.finish();

	sc.validate();
	return sc;
}

inline Scenario parse_scenario(const std::string &text)
{
	json j;
	try {
		j = json::parse(text);
	} catch (const json::parse_error &e) {
		throw ConfigError("<json>", e.what());
	}
	return scenario_from_json(j);
}

inline Scenario load_scenario(const std::filesystem::path &path)
{
	std::ifstream in(path);
	if (!in)
		throw std::system_error(errno, std::generic_category(), "cannot open " + path.string());
	std::stringstream ss;
	ss << in.rdbuf();
	return parse_scenario(ss.str());
}

// Canonical form: sorted keys, shortest round-trip numbers.
inline std::string canonical_json(const Scenario &sc) { return to_json(sc).dump(); }

inline std::uint64_t scenario_hash(const Scenario &sc)
{
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (unsigned char c : canonical_json(sc)) {
		h ^= c;
		h *= 0x100000001b3ULL;
	}
	return h;
}

// Sets the numeric field at a dotted path ("llc.v_g", "comparator.i_ref") and
// re-validates the whole scenario.
inline void set_parameter(Scenario &sc, const std::string &path, double value)
{
	json j = to_json(sc);
	std::string pointer;
	std::size_t start = 0;
	while (start <= path.size()) {
		const auto dot = path.find('.', start);
		const auto part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
		if (part.empty())
			throw ConfigError(path, "malformed parameter path");
		pointer += "/" + part;
		if (dot == std::string::npos)
			break;
		start = dot + 1;
	}
	const json::json_pointer ptr(pointer);
	if (!j.contains(ptr) || !j.at(ptr).is_number())
		throw ConfigError(path, "not a numeric scenario parameter");
	j[ptr] = value;
	sc = scenario_from_json(j);
}

inline std::vector<RunSummary> sweep(const Scenario &base, const std::string &path,
                                     const std::vector<double> &values, unsigned threads = 0,
                                     const TraceSink &sink = {})
{
	Scenario probe = base;
	if (!values.empty())
		set_parameter(probe, path, values.front());  // bad paths fail before any run
	return sweep(
		base, [&path](Scenario &sc, double v) { set_parameter(sc, path, v); }, values, threads, sink);
}

// ---------------------------------------------------------------------------
// CSV traces

inline constexpr const char *kCsvHeader = "t_s,i_syn_A,v_thr_V,i_gain_A,sw,rate_Hz,v_syn_V";

inline std::string format_double(double x)
{
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.17g", x);
	return buf;
}

inline void write_trace_csv(std::ostream &os, const Trace &tr)
{
	os << kCsvHeader << '\n';
	std::string line;
	for (const auto &s : tr.samples) {
		line = format_double(s.t);
		line += ',';
		line += format_double(s.i_syn);
		line += ',';
		line += format_double(s.v_thr);
		line += ',';
		line += format_double(s.i_gain);
		line += ',';
		line += std::to_string(s.sw);
		line += ',';
		line += format_double(s.rate);
		line += ',';
		line += format_double(s.v_syn);
		os << line << '\n';
	}
	os << "# scenario," << tr.scenario << ",mode," << to_string(tr.mode) << '\n';
	for (const auto &e : tr.events)
		os << "# event," << format_double(e.t) << ',' << to_string(e.kind) << ',' << e.detail << '\n';
	for (const auto &ep : tr.locks)
		os << "# lock_episode,start," << format_double(ep.start) << ",end," << format_double(ep.end)
		   << ",band_A," << format_double(ep.band()) << '\n';
	os << "# steps," << tr.stats.steps << ",feedback_violations," << tr.stats.feedback_violations << '\n';
}

struct CsvTrace {
	std::vector<Sample> samples;
	std::vector<std::string> comments;
};

inline CsvTrace read_trace_csv(std::istream &is)
{
	CsvTrace out;
	std::string line;
	if (!std::getline(is, line) || line != kCsvHeader)
		throw ConfigError("csv", "missing or unexpected header row");
	std::size_t row = 1;
	while (std::getline(is, line)) {
		++row;
		if (line.empty())
			continue;
		if (line.front() == '#') {
			out.comments.push_back(line);
			continue;
		}
		double v[7];
		const char *p = line.data();
		const char *end = line.data() + line.size();
		for (int k = 0; k < 7; ++k) {
			auto [next, ec] = std::from_chars(p, end, v[k]);
			if (ec != std::errc() || (k < 6 && (next == end || *next != ',')) || (k == 6 && next != end))
				throw ConfigError("csv", "malformed row " + std::to_string(row));
			p = next + 1;
		}
		Sample s;
		s.t = v[0];
		s.i_syn = v[1];
		s.v_thr = v[2];
		s.i_gain = v[3];
		s.sw = static_cast<int>(v[4]);
		s.rate = v[5];
		s.v_syn = v[6];
		out.samples.push_back(s);
	}
	return out;
}

// Writes through a temporary next to `path` and renames on success, so a
// failed write never leaves a partial file behind.
inline void write_file_atomic(const std::filesystem::path &path,
                              const std::function<void(std::ostream &)> &body)
{
	auto tmp = path;
	tmp += ".tmp";
	{
		std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
		if (!os)
			throw std::system_error(errno, std::generic_category(), "cannot write " + tmp.string());
		try {
			body(os);
			os.flush();
			if (!os)
				throw std::system_error(EIO, std::generic_category(), "write failed for " + tmp.string());
		} catch (...) {
			os.close();
			std::error_code ignore;
			std::filesystem::remove(tmp, ignore);
			throw;
		}
	}
	std::filesystem::rename(tmp, path);
}

} // namespace homeostat
