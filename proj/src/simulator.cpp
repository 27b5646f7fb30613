#include "knobtune/simulator.hpp"

#include "knobtune/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#ifndef KNOBTUNE_SCENARIO_DIR
#define KNOBTUNE_SCENARIO_DIR "scenarios"
#endif

namespace knobtune {

using namespace json_detail;

std::string to_string(SurfaceFamily f)
{
    switch (f) {
    case SurfaceFamily::ParallelScaling: return "parallel_scaling";
    case SurfaceFamily::BumpMix: return "bump_mix";
    case SurfaceFamily::PowerModel: return "power_model";
    case SurfaceFamily::Tabulated: return "tabulated";
    }
    return "?";
}

namespace {

SurfaceFamily parse_family(const std::string& s, const std::string& where)
{
    if (s == "parallel_scaling") return SurfaceFamily::ParallelScaling;
    if (s == "bump_mix") return SurfaceFamily::BumpMix;
    if (s == "power_model") return SurfaceFamily::PowerModel;
    if (s == "tabulated") return SurfaceFamily::Tabulated;
    throw ConfigError(where + ": unknown surface family '" + s + "'");
}

// Frequency of a core group relative to the top level of its knob.
double relative_frequency(const CoreGroup& g, const KnobSpace& space, const KnobSetting& k)
{
    if (g.frequency_dim.empty()) return 1.0;
    const auto d = static_cast<std::size_t>(space.find_dimension(g.frequency_dim));
    return space.value(k, d) / space.dimension(d).values.back();
}

double core_count(const CoreGroup& g, const KnobSpace& space, const KnobSetting& k)
{
    return space.value(k, static_cast<std::size_t>(space.find_dimension(g.cores_dim)));
}

void validate_surface(const SurfaceSpec& s, const KnobSpace& space, const std::string& where)
{
    const auto check_positive = [&](double v, const char* name) {
        if (!(v > 0.0)) throw ConfigError(where + "." + name + " must be positive");
    };
    const auto check_non_negative = [&](double v, const char* name) {
        if (!(v >= 0.0)) throw ConfigError(where + "." + name + " must be non-negative");
    };
    if (s.metric.empty()) throw ConfigError(where + ": missing metric name");

    const auto check_cores = [&] {
        if (s.cores.empty()) throw ConfigError(where + ".cores must not be empty");
        for (std::size_t i = 0; i < s.cores.size(); ++i) {
            const auto& g = s.cores[i];
            const std::string gw = where + ".cores[" + std::to_string(i) + "]";
            const int cd = space.find_dimension(g.cores_dim);
            if (cd < 0) throw ConfigError(gw + ": unknown knob '" + g.cores_dim + "'");
            if (space.dimension(static_cast<std::size_t>(cd)).values.front() < 0.0) {
                throw ConfigError(gw + ": core counts must be non-negative");
            }
            if (!g.frequency_dim.empty()) {
                const int fd = space.find_dimension(g.frequency_dim);
                if (fd < 0) throw ConfigError(gw + ": unknown knob '" + g.frequency_dim + "'");
                if (!(space.dimension(static_cast<std::size_t>(fd)).values.front() > 0.0)) {
                    throw ConfigError(gw + ": frequency levels must be positive");
                }
            }
            if (!(g.coefficient >= 0.0)) throw ConfigError(gw + ".weight must be non-negative");
        }
    };

    switch (s.family) {
    case SurfaceFamily::ParallelScaling:
        check_positive(s.work, "work");
        check_non_negative(s.serial_time, "serial_time");
        check_positive(s.parallel_time, "parallel_time");
        check_non_negative(s.overhead, "overhead");
        check_cores();
        break;
    case SurfaceFamily::PowerModel:
        check_non_negative(s.static_power, "static_power");
        check_non_negative(s.per_core_power, "per_core_power");
        check_cores();
        break;
    case SurfaceFamily::BumpMix:
        for (std::size_t i = 0; i < s.bumps.size(); ++i) {
            const auto& b = s.bumps[i];
            const std::string bw = where + ".bumps[" + std::to_string(i) + "]";
            if (b.center.size() != space.dimension_count()) {
                throw ConfigError(bw + ".center must have one coordinate per knob");
            }
            if (!(b.width > 0.0)) throw ConfigError(bw + ".width must be positive");
        }
        break;
    case SurfaceFamily::Tabulated:
        if (s.table.size() != space.size()) {
            throw ConfigError(where + ".values must have one entry per knob setting (" +
                              std::to_string(space.size()) + ")");
        }
        break;
    }
}

Json surface_to_json(const SurfaceSpec& s)
{
    Json j{{"family", to_string(s.family)}, {"metric", s.metric}};
    if (s.goal) j["direction"] = to_string(*s.goal);
    if (s.bound) j["direction"] = to_string(*s.bound);
    if (s.set_point) j["set_point"] = *s.set_point;
    const auto cores = [&] {
        Json arr = Json::array();
        for (const auto& g : s.cores) {
            Json c{{"cores", g.cores_dim}, {"weight", g.coefficient}};
            if (!g.frequency_dim.empty()) c["frequency"] = g.frequency_dim;
            arr.push_back(c);
        }
        return arr;
    };
    switch (s.family) {
    case SurfaceFamily::ParallelScaling:
        j["work"] = s.work;
        j["serial_time"] = s.serial_time;
        j["parallel_time"] = s.parallel_time;
        j["overhead"] = s.overhead;
        j["cores"] = cores();
        break;
    case SurfaceFamily::PowerModel:
        j["static_power"] = s.static_power;
        j["per_core_power"] = s.per_core_power;
        j["cores"] = cores();
        break;
    case SurfaceFamily::BumpMix: {
        j["base"] = s.base;
        Json bumps = Json::array();
        for (const auto& b : s.bumps) {
            bumps.push_back({{"amplitude", b.amplitude}, {"center", b.center}, {"width", b.width}});
        }
        j["bumps"] = bumps;
        break;
    }
    case SurfaceFamily::Tabulated:
        j["values"] = s.table;
        break;
    }
    return j;
}

std::vector<CoreGroup> cores_from_json(const Json& j, const std::string& where)
{
    if (!j.is_array()) throw ConfigError(where + ": expected an array");
    std::vector<CoreGroup> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        reject_unknown(j[i], {"cores", "frequency", "weight"}, w);
        CoreGroup g;
        g.cores_dim = text(require(j[i], "cores", w), w + ".cores");
        if (j[i].contains("frequency")) g.frequency_dim = text(j[i].at("frequency"), w + ".frequency");
        g.coefficient = number(require(j[i], "weight", w), w + ".weight");
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<double> numbers(const Json& j, const std::string& where)
{
    if (!j.is_array()) throw ConfigError(where + ": expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

SurfaceSpec surface_from_json(const Json& j, const std::string& where, bool objective)
{
    SurfaceSpec s;
    s.family = parse_family(text(require(j, "family", where), where + ".family"), where);
    switch (s.family) {
    case SurfaceFamily::ParallelScaling:
        reject_unknown(j, {"family", "metric", "direction", "set_point", "work", "serial_time",
                           "parallel_time", "overhead", "cores"},
                       where);
        s.work = number(require(j, "work", where), where + ".work");
        s.serial_time = number(require(j, "serial_time", where), where + ".serial_time");
        s.parallel_time = number(require(j, "parallel_time", where), where + ".parallel_time");
        s.overhead = number(require(j, "overhead", where), where + ".overhead");
        s.cores = cores_from_json(require(j, "cores", where), where + ".cores");
        break;
    case SurfaceFamily::PowerModel:
        reject_unknown(j, {"family", "metric", "direction", "set_point", "static_power",
                           "per_core_power", "cores"},
                       where);
        s.static_power = number(require(j, "static_power", where), where + ".static_power");
        s.per_core_power = number(require(j, "per_core_power", where), where + ".per_core_power");
        s.cores = cores_from_json(require(j, "cores", where), where + ".cores");
        break;
    case SurfaceFamily::BumpMix: {
        reject_unknown(j, {"family", "metric", "direction", "set_point", "base", "bumps"}, where);
        s.base = number(require(j, "base", where), where + ".base");
        const Json& bumps = require(j, "bumps", where);
        if (!bumps.is_array()) throw ConfigError(where + ".bumps: expected an array");
        for (std::size_t i = 0; i < bumps.size(); ++i) {
            const std::string w = where + ".bumps[" + std::to_string(i) + "]";
            reject_unknown(bumps[i], {"amplitude", "center", "width"}, w);
            Bump b;
            b.amplitude = number(require(bumps[i], "amplitude", w), w + ".amplitude");
            b.center = numbers(require(bumps[i], "center", w), w + ".center");
            b.width = number(require(bumps[i], "width", w), w + ".width");
            s.bumps.push_back(std::move(b));
        }
        break;
    }
    case SurfaceFamily::Tabulated:
        reject_unknown(j, {"family", "metric", "direction", "set_point", "values"}, where);
        s.table = numbers(require(j, "values", where), where + ".values");
        break;
    }
    s.metric = text(require(j, "metric", where), where + ".metric");
    const std::string direction = text(require(j, "direction", where), where + ".direction");
    if (objective) {
        if (j.contains("set_point")) {
            throw ConfigError(where + ": an objective surface takes no set_point");
        }
        s.goal = parse_goal(direction);
    } else {
        s.bound = parse_bound(direction);
        s.set_point = number(require(j, "set_point", where), where + ".set_point");
    }
    return s;
}

std::size_t line_of_offset(const std::string& text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(
                   std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b)
{
    // splitmix64 finalizer over a combined state
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

bool Scenario::operator==(const Scenario& other) const
{
    return space == other.space && phases == other.phases &&
           interval_seconds == other.interval_seconds && noise_cv == other.noise_cv &&
           seed == other.seed;
}

void Scenario::validate() const
{
    if (phases.empty()) throw ConfigError("scenario needs at least one phase");
    if (!(interval_seconds > 0.0)) throw ConfigError("interval_seconds must be positive");
    if (noise_cv.empty()) throw ConfigError("noise_cv must not be empty");
    for (double cv : noise_cv) {
        if (!(cv >= 0.0) || !std::isfinite(cv)) {
            throw ConfigError("noise_cv must be non-negative");
        }
    }
    const std::size_t metrics = 1 + phases.front().constraints.size();
    if (noise_cv.size() != 1 && noise_cv.size() != metrics) {
        throw ConfigError("noise_cv must be a single value or one value per metric");
    }
    const OptimizationSpec first = spec();
    first.validate();
    for (std::size_t p = 0; p < phases.size(); ++p) {
        const std::string where = "phases[" + std::to_string(p) + "]";
        const auto& ph = phases[p];
        if (ph.length_intervals < 1) {
            throw ConfigError(where + ".length_intervals must be at least 1");
        }
        if (!ph.objective.goal || ph.objective.bound) {
            throw ConfigError(where + ".objective needs an objective direction");
        }
        validate_surface(ph.objective, space, where + ".objective");
        if (ph.constraints.size() != first.constraints.size()) {
            throw ConfigError(where + ": every phase must define the same constraints");
        }
        if (ph.objective.metric != first.objective.metric || *ph.objective.goal != first.objective.goal) {
            throw ConfigError(where + ".objective: metric and direction must match phase 0");
        }
        for (std::size_t c = 0; c < ph.constraints.size(); ++c) {
            const std::string cw = where + ".constraints[" + std::to_string(c) + "]";
            const auto& s = ph.constraints[c];
            if (!s.bound || !s.set_point || s.goal) {
                throw ConfigError(cw + " needs a constraint direction and set_point");
            }
            validate_surface(s, space, cw);
            const auto& ref = first.constraints[c];
            if (s.metric != ref.metric || *s.bound != ref.bound || *s.set_point != ref.set_point) {
                throw ConfigError(cw + ": metric, direction and set_point must match phase 0");
            }
        }
    }
}

OptimizationSpec Scenario::spec() const
{
    if (phases.empty()) throw ConfigError("scenario needs at least one phase");
    OptimizationSpec spec;
    const auto& ph = phases.front();
    spec.objective.metric = ph.objective.metric;
    spec.objective.goal = ph.objective.goal.value_or(Goal::Maximize);
    for (const auto& c : ph.constraints) {
        spec.constraints.push_back({c.metric, c.set_point.value_or(0.0), c.bound.value_or(Bound::Below)});
    }
    return spec;
}

int Scenario::total_intervals() const
{
    int total = 0;
    for (const auto& p : phases) total += p.length_intervals;
    return total;
}

std::size_t Scenario::phase_at(int interval) const
{
    if (interval < 0) throw ContractViolation("negative interval");
    int end = 0;
    for (std::size_t p = 0; p < phases.size(); ++p) {
        end += phases[p].length_intervals;
        if (interval < end) return p;
    }
    throw ContractViolation("interval " + std::to_string(interval) + " is past the scenario end");
}

int Scenario::phase_start(std::size_t phase) const
{
    int start = 0;
    for (std::size_t p = 0; p < phase && p < phases.size(); ++p) start += phases[p].length_intervals;
    return start;
}

double Scenario::noise_for_metric(std::size_t metric) const
{
    return noise_cv.size() == 1 ? noise_cv.front() : noise_cv.at(metric);
}

double evaluate_surface(const SurfaceSpec& s, const KnobSpace& space, const KnobSetting& k)
{
    space.check(k);
    switch (s.family) {
    case SurfaceFamily::ParallelScaling: {
        double p = 0.0;
        double p_eff = 0.0;
        for (const auto& g : s.cores) {
            const double n = core_count(g, space, k);
            p += n;
            p_eff += g.coefficient * n * relative_frequency(g, space, k);
        }
        if (!(p_eff > 0.0)) return 0.0;
        return s.work / (s.serial_time + s.parallel_time / p_eff + s.overhead * p);
    }
    case SurfaceFamily::PowerModel: {
        double c = s.static_power;
        for (const auto& g : s.cores) {
            const double n = core_count(g, space, k);
            const double f = relative_frequency(g, space, k);
            c += g.coefficient * f * f * f * n + s.per_core_power * n;
        }
        return c;
    }
    case SurfaceFamily::BumpMix: {
        const auto x = normalize(space, k);
        double v = s.base;
        for (const auto& b : s.bumps) {
            double r2 = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - b.center[i]) * (x[i] - b.center[i]);
            v += b.amplitude * std::exp(-r2 / (2.0 * b.width * b.width));
        }
        return v;
    }
    case SurfaceFamily::Tabulated:
        return s.table.at(space.flat_index(k));
    }
    return 0.0;
}

Reading evaluate_true(const Scenario& scenario, std::size_t phase, const KnobSetting& k)
{
    const auto& ph = scenario.phases.at(phase);
    Reading r;
    r.objective = evaluate_surface(ph.objective, scenario.space, k);
    for (const auto& c : ph.constraints) r.constraints.push_back(evaluate_surface(c, scenario.space, k));
    return r;
}

Reading measure(const Scenario& scenario, std::size_t phase, const KnobSetting& k,
                std::uint64_t stream_seed, std::uint64_t interval)
{
    Reading r = evaluate_true(scenario, phase, k);
    std::seed_seq seq{static_cast<std::uint32_t>(stream_seed), static_cast<std::uint32_t>(stream_seed >> 32),
                      static_cast<std::uint32_t>(interval), static_cast<std::uint32_t>(interval >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto noisy = [&](double v, std::size_t metric) {
        const double cv = scenario.noise_for_metric(metric);
        const double z = normal(rng);  // drawn even at cv 0 to keep streams aligned
        if (cv == 0.0) return v;
        const double sigma = std::sqrt(std::log1p(cv * cv));
        return v * std::exp(sigma * z);
    };
    r.objective = noisy(r.objective, 0);
    for (std::size_t c = 0; c < r.constraints.size(); ++c) r.constraints[c] = noisy(r.constraints[c], c + 1);
    return r;
}

Json scenario_to_json(const Scenario& scenario)
{
    Json phases = Json::array();
    for (const auto& p : scenario.phases) {
        Json cs = Json::array();
        for (const auto& c : p.constraints) cs.push_back(surface_to_json(c));
        phases.push_back({{"length_intervals", p.length_intervals},
                          {"objective", surface_to_json(p.objective)},
                          {"constraints", cs}});
    }
    Json j{{"space", space_to_json(scenario.space)},
           {"phases", phases},
           {"interval_seconds", scenario.interval_seconds},
           {"seed", scenario.seed}};
    if (scenario.noise_cv.size() == 1) {
        j["noise_cv"] = scenario.noise_cv.front();
    } else {
        j["noise_cv"] = scenario.noise_cv;
    }
    return j;
}

Scenario scenario_from_json(const Json& j)
{
    reject_unknown(j, {"space", "phases", "noise_cv", "interval_seconds", "seed"}, "scenario");
    Scenario s;
    s.space = space_from_json(require(j, "space", "scenario"));
    const Json& phases = require(j, "phases", "scenario");
    if (!phases.is_array()) throw ConfigError("scenario.phases: expected an array");
    for (std::size_t p = 0; p < phases.size(); ++p) {
        const std::string where = "phases[" + std::to_string(p) + "]";
        reject_unknown(phases[p], {"length_intervals", "objective", "constraints"}, where);
        PhaseSpec ph;
        ph.length_intervals =
            integer(require(phases[p], "length_intervals", where), where + ".length_intervals");
        ph.objective = surface_from_json(require(phases[p], "objective", where), where + ".objective", true);
        if (phases[p].contains("constraints")) {
            const Json& cs = phases[p].at("constraints");
            if (!cs.is_array()) throw ConfigError(where + ".constraints: expected an array");
            for (std::size_t c = 0; c < cs.size(); ++c) {
                ph.constraints.push_back(surface_from_json(
                    cs[c], where + ".constraints[" + std::to_string(c) + "]", false));
            }
        }
        s.phases.push_back(std::move(ph));
    }
    if (j.contains("noise_cv")) {
        const Json& n = j.at("noise_cv");
        s.noise_cv = n.is_array() ? numbers(n, "noise_cv") : std::vector<double>{number(n, "noise_cv")};
    }
    if (j.contains("interval_seconds")) s.interval_seconds = number(j.at("interval_seconds"), "interval_seconds");
    if (j.contains("seed")) {
        const Json& seed = j.at("seed");
        if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
            throw ConfigError("seed: expected a non-negative integer");
        }
        s.seed = seed.get<std::uint64_t>();
    }
    s.validate();
    return s;
}

Scenario parse_scenario(const std::string& text)
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError("scenario line " + std::to_string(line_of_offset(text, e.byte)) +
                          ": syntax error: " + e.what());
    }
    return scenario_from_json(j);
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    Scenario s;
    try {
        s = parse_scenario(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    s.name = path.stem().string();
    return s;
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write scenario file " + path.string());
    out << scenario_to_json(scenario).dump(2) << '\n';
}

std::filesystem::path bundled_scenario_dir()
{
    if (const char* env = std::getenv("KNOBTUNE_SCENARIO_DIR"); env && *env) return env;
    return KNOBTUNE_SCENARIO_DIR;
}

std::vector<std::string> bundled_scenario_names()
{
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(bundled_scenario_dir(), ec)) {
        if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

Scenario resolve_scenario(const std::string& name_or_path)
{
    if (std::filesystem::is_regular_file(name_or_path)) return load_scenario(name_or_path);
    const auto bundled = bundled_scenario_dir() / (name_or_path + ".json");
    if (std::filesystem::is_regular_file(bundled)) return load_scenario(bundled);
    throw ConfigError("no scenario file or bundled scenario named '" + name_or_path + "'");
}

SimulatedWorkload::SimulatedWorkload(const Scenario& scenario, std::uint64_t stream_seed)
    : scenario_(&scenario), stream_seed_(stream_seed)
{
}

Reading SimulatedWorkload::run_interval(const KnobSetting& k)
{
    if (finished()) throw ContractViolation("workload already finished");
    const auto phase = scenario_->phase_at(interval_);
    Reading r = measure(*scenario_, phase, k, stream_seed_, static_cast<std::uint64_t>(interval_));
    ++interval_;
    return r;
}

}  // namespace knobtune
