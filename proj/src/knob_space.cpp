#include "knobtune/knob_space.hpp"

#include "knobtune/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace knobtune {

std::string to_string(const KnobSetting& k)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < k.indices.size(); ++i) {
        if (i) os << ' ';
        os << k.indices[i];
    }
    os << ')';
    return os.str();
}

int switch_distance(const KnobSetting& a, const KnobSetting& b)
{
    if (a.size() != b.size()) {
        throw ContractViolation("switch_distance: settings of different length");
    }
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += std::abs(a.indices[i] - b.indices[i]);
    }
    return d;
}

namespace {

KnobSetting max_setting(const std::vector<KnobDimension>& dims)
{
    KnobSetting k;
    for (const auto& d : dims) {
        k.indices.push_back(d.values.empty() ? 0 : static_cast<int>(d.values.size()) - 1);
    }
    return k;
}

}  // namespace

KnobSpace::KnobSpace(std::vector<KnobDimension> dimensions)
    : KnobSpace(dimensions, max_setting(dimensions))
{
}

KnobSpace::KnobSpace(std::vector<KnobDimension> dimensions, KnobSetting default_setting)
    : dims_(std::move(dimensions)), default_(std::move(default_setting))
{
    if (dims_.empty()) {
        throw ConfigError("knob space needs at least one dimension");
    }
    std::set<std::string> names;
    size_ = 1;
    for (const auto& d : dims_) {
        if (d.name.empty()) {
            throw ConfigError("knob dimension with empty name");
        }
        if (!names.insert(d.name).second) {
            throw ConfigError("duplicate knob dimension '" + d.name + "'");
        }
        if (d.values.empty()) {
            throw ConfigError("knob dimension '" + d.name + "' has no values");
        }
        for (std::size_t i = 0; i < d.values.size(); ++i) {
            if (!std::isfinite(d.values[i])) {
                throw ConfigError("knob dimension '" + d.name + "' has a non-finite value");
            }
            if (i > 0 && !(d.values[i] > d.values[i - 1])) {
                throw ConfigError("knob dimension '" + d.name +
                                  "' values must be strictly increasing");
            }
        }
        if (size_ > std::numeric_limits<std::uint64_t>::max() / d.values.size()) {
            throw ConfigError("knob space too large");
        }
        size_ *= d.values.size();
    }
    if (!contains(default_)) {
        throw ConfigError("default setting " + to_string(default_) + " is not in the knob space");
    }
}

int KnobSpace::find_dimension(const std::string& name) const
{
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (dims_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

bool KnobSpace::contains(const KnobSetting& k) const
{
    if (k.size() != dims_.size()) return false;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (k.indices[i] < 0 || static_cast<std::size_t>(k.indices[i]) >= dims_[i].size()) {
            return false;
        }
    }
    return true;
}

void KnobSpace::check(const KnobSetting& k) const
{
    if (!contains(k)) {
        throw ContractViolation("knob setting " + to_string(k) + " is not valid in this space");
    }
}

std::uint64_t KnobSpace::flat_index(const KnobSetting& k) const
{
    check(k);
    std::uint64_t flat = 0;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        flat = flat * dims_[i].size() + static_cast<std::uint64_t>(k.indices[i]);
    }
    return flat;
}

KnobSetting KnobSpace::setting_at(std::uint64_t flat) const
{
    if (flat >= size_) {
        throw ContractViolation("flat index out of range");
    }
    KnobSetting k;
    k.indices.resize(dims_.size());
    for (std::size_t i = dims_.size(); i-- > 0;) {
        const auto n = dims_[i].size();
        k.indices[i] = static_cast<int>(flat % n);
        flat /= n;
    }
    return k;
}

double KnobSpace::value(const KnobSetting& k, std::size_t dim) const
{
    return dims_.at(dim).values.at(static_cast<std::size_t>(k.indices.at(dim)));
}

KnobSpace cartesian_product(const KnobSpace& app, const KnobSpace& dev)
{
    std::vector<KnobDimension> dims = app.dimensions();
    for (const auto& d : dev.dimensions()) {
        if (app.find_dimension(d.name) >= 0) {
            throw ConfigError("dimension '" + d.name + "' appears in both knob spaces");
        }
        dims.push_back(d);
    }
    KnobSetting def = app.default_setting();
    const auto& dd = dev.default_setting().indices;
    def.indices.insert(def.indices.end(), dd.begin(), dd.end());
    return KnobSpace(std::move(dims), std::move(def));
}

std::vector<double> normalize(const KnobSpace& space, const KnobSetting& k)
{
    space.check(k);
    std::vector<double> p(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        const auto n = space.dimension(i).size();
        p[i] = n > 1 ? static_cast<double>(k.indices[i]) / static_cast<double>(n - 1) : 0.0;
    }
    return p;
}

KnobSetting nearest_setting(const KnobSpace& space, std::span<const double> point)
{
    if (point.size() != space.dimension_count()) {
        throw ContractViolation("nearest_setting: point dimensionality mismatch");
    }
    KnobSetting k;
    k.indices.resize(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double top = static_cast<double>(space.dimension(i).size() - 1);
        const double c = std::clamp(point[i], 0.0, 1.0);
        k.indices[i] = static_cast<int>(std::floor(c * top + 0.5));
    }
    return k;
}

std::vector<KnobSetting> order_min_switch_distance(std::vector<KnobSetting> settings,
                                                   const KnobSetting& start)
{
    if (settings.empty()) {
        throw ContractViolation("order_min_switch_distance: empty list");
    }
    auto it = std::find(settings.begin(), settings.end(), start);
    if (it == settings.end()) {
        throw ContractViolation("order_min_switch_distance: start not among settings");
    }
    std::vector<KnobSetting> order;
    order.reserve(settings.size());
    order.push_back(*it);
    settings.erase(it);
    std::sort(settings.begin(), settings.end());

    while (!settings.empty()) {
        const KnobSetting& cur = order.back();
        std::size_t best = 0;
        int best_d = switch_distance(cur, settings[0]);
        for (std::size_t i = 1; i < settings.size(); ++i) {
            const int d = switch_distance(cur, settings[i]);
            if (d < best_d) {
                best = i;
                best_d = d;
            }
        }
        order.push_back(settings[best]);
        settings.erase(settings.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return order;
}

int tour_length(std::span<const KnobSetting> order)
{
    int total = 0;
    for (std::size_t i = 1; i < order.size(); ++i) {
        total += switch_distance(order[i - 1], order[i]);
    }
    return total;
}

}  // namespace knobtune
