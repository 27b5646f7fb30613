#pragma once

#include "knobtune/knob_space.hpp"
#include "knobtune/optimization.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string>

namespace knobtune {

using Json = nlohmann::json;

/// {"dimensions": [{"name", "values"}], "default": [...]}
Json space_to_json(const KnobSpace& space);
KnobSpace space_from_json(const Json& j);

/// {"objective": {"metric", "direction"}, "constraints": [{"metric", "direction", "set_point"}]}
Json spec_to_json(const OptimizationSpec& spec);
OptimizationSpec spec_from_json(const Json& j);

Json setting_to_json(const KnobSetting& k);
KnobSetting setting_from_json(const Json& j);

namespace json_detail {

/// Field lookup that throws ConfigError naming `where.key` when absent.
const Json& require(const Json& obj, const char* key, const std::string& where);
/// Throws ConfigError on any key outside `allowed`.
void reject_unknown(const Json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where);
double number(const Json& j, const std::string& where);
int integer(const Json& j, const std::string& where);
std::string text(const Json& j, const std::string& where);

}  // namespace json_detail

}  // namespace knobtune
