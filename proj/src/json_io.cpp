#include "knobtune/json_io.hpp"

#include "knobtune/error.hpp"

#include <cmath>
#include <limits>

namespace knobtune {

namespace json_detail {

const Json& require(const Json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object()) {
        throw ConfigError(where + ": expected an object");
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ConfigError(where + ": missing field '" + key + "'");
    }
    return *it;
}

void reject_unknown(const Json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where)
{
    if (!obj.is_object()) {
        throw ConfigError(where + ": expected an object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* a : allowed) known = known || it.key() == a;
        if (!known) {
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
        }
    }
}

double number(const Json& j, const std::string& where)
{
    if (!j.is_number()) {
        throw ConfigError(where + ": expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw ConfigError(where + ": expected a finite number");
    }
    return v;
}

int integer(const Json& j, const std::string& where)
{
    if (j.is_number_integer()) {
        const auto v = j.get<std::int64_t>();
        if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
            throw ConfigError(where + ": integer out of range");
        }
        return static_cast<int>(v);
    }
    throw ConfigError(where + ": expected an integer");
}

std::string text(const Json& j, const std::string& where)
{
    if (!j.is_string()) {
        throw ConfigError(where + ": expected a string");
    }
    return j.get<std::string>();
}

}  // namespace json_detail

using namespace json_detail;

Json setting_to_json(const KnobSetting& k)
{
    return Json(k.indices);
}

KnobSetting setting_from_json(const Json& j)
{
    if (!j.is_array()) {
        throw ConfigError("knob: expected an index array");
    }
    KnobSetting k;
    for (std::size_t i = 0; i < j.size(); ++i) {
        k.indices.push_back(integer(j[i], "knob[" + std::to_string(i) + "]"));
    }
    return k;
}

Json space_to_json(const KnobSpace& space)
{
    Json dims = Json::array();
    for (const auto& d : space.dimensions()) {
        dims.push_back({{"name", d.name}, {"values", d.values}});
    }
    return {{"dimensions", dims}, {"default", setting_to_json(space.default_setting())}};
}

KnobSpace space_from_json(const Json& j)
{
    reject_unknown(j, {"dimensions", "default"}, "space");
    const Json& dims = require(j, "dimensions", "space");
    if (!dims.is_array()) {
        throw ConfigError("space.dimensions: expected an array");
    }
    std::vector<KnobDimension> out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const std::string where = "space.dimensions[" + std::to_string(i) + "]";
        reject_unknown(dims[i], {"name", "values"}, where);
        KnobDimension d;
        d.name = text(require(dims[i], "name", where), where + ".name");
        const Json& values = require(dims[i], "values", where);
        if (!values.is_array()) {
            throw ConfigError(where + ".values: expected an array");
        }
        for (std::size_t v = 0; v < values.size(); ++v) {
            d.values.push_back(number(values[v], where + ".values[" + std::to_string(v) + "]"));
        }
        out.push_back(std::move(d));
    }
    if (j.contains("default")) {
        KnobSetting def;
        try {
            def = setting_from_json(j.at("default"));
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("space.default: ") + e.what());
        }
        return KnobSpace(std::move(out), std::move(def));
    }
    return KnobSpace(std::move(out));
}

Json spec_to_json(const OptimizationSpec& spec)
{
    Json constraints = Json::array();
    for (const auto& c : spec.constraints) {
        constraints.push_back(
            {{"metric", c.metric}, {"direction", to_string(c.bound)}, {"set_point", c.set_point}});
    }
    return {{"objective",
             {{"metric", spec.objective.metric}, {"direction", to_string(spec.objective.goal)}}},
            {"constraints", constraints}};
}

OptimizationSpec spec_from_json(const Json& j)
{
    reject_unknown(j, {"objective", "constraints"}, "spec");
    OptimizationSpec spec;
    const Json& obj = require(j, "objective", "spec");
    reject_unknown(obj, {"metric", "direction"}, "spec.objective");
    spec.objective.metric = text(require(obj, "metric", "spec.objective"), "spec.objective.metric");
    spec.objective.goal =
        parse_goal(text(require(obj, "direction", "spec.objective"), "spec.objective.direction"));
    if (j.contains("constraints")) {
        const Json& cs = j.at("constraints");
        if (!cs.is_array()) {
            throw ConfigError("spec.constraints: expected an array");
        }
        for (std::size_t i = 0; i < cs.size(); ++i) {
            const std::string where = "spec.constraints[" + std::to_string(i) + "]";
            reject_unknown(cs[i], {"metric", "direction", "set_point"}, where);
            ConstraintSpec c;
            c.metric = text(require(cs[i], "metric", where), where + ".metric");
            c.bound = parse_bound(text(require(cs[i], "direction", where), where + ".direction"));
            c.set_point = number(require(cs[i], "set_point", where), where + ".set_point");
            spec.constraints.push_back(std::move(c));
        }
    }
    spec.validate();
    return spec;
}

}  // namespace knobtune
