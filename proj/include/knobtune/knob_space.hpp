#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace knobtune {

/// One tunable knob: an ordered list of discrete numeric levels.
struct KnobDimension {
    std::string name;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    bool operator==(const KnobDimension&) const = default;
};

/// A point of the knob grid, stored as one value index per dimension.
/// Ordering is lexicographic over the index vector.
struct KnobSetting {
    std::vector<int> indices;

    std::size_t size() const { return indices.size(); }
    auto operator<=>(const KnobSetting&) const = default;
    bool operator==(const KnobSetting&) const = default;
};

std::string to_string(const KnobSetting& k);

/// Manhattan distance between two index vectors; used as the switch-cost proxy.
int switch_distance(const KnobSetting& a, const KnobSetting& b);

/// Discrete Cartesian grid of knob dimensions plus the default setting.
///
/// Settings are enumerated in lexicographic index order: the first dimension
/// is the most significant digit. flat_index/setting_at convert between the
/// two representations.
class KnobSpace {
public:
    KnobSpace() = default;

    /// Throws ConfigError when a dimension is empty, not strictly increasing,
    /// duplicated by name, or when the default is not a valid index vector.
    KnobSpace(std::vector<KnobDimension> dimensions, KnobSetting default_setting);

    /// Same as above with the default set to the last level of every
    /// dimension (all resources at their maximum).
    explicit KnobSpace(std::vector<KnobDimension> dimensions);

    const std::vector<KnobDimension>& dimensions() const { return dims_; }
    const KnobDimension& dimension(std::size_t i) const { return dims_.at(i); }
    std::size_t dimension_count() const { return dims_.size(); }
    const KnobSetting& default_setting() const { return default_; }

    /// Number of settings in the grid.
    std::uint64_t size() const { return size_; }

    /// Index of the dimension with this name, or -1.
    int find_dimension(const std::string& name) const;

    bool contains(const KnobSetting& k) const;
    /// Throws ContractViolation if k is not a valid setting of this space.
    void check(const KnobSetting& k) const;

    std::uint64_t flat_index(const KnobSetting& k) const;
    KnobSetting setting_at(std::uint64_t flat) const;

    /// Knob level (in the knob's own units) of dimension `dim` at setting k.
    double value(const KnobSetting& k, std::size_t dim) const;

    bool operator==(const KnobSpace&) const = default;

private:
    std::vector<KnobDimension> dims_;
    KnobSetting default_;
    std::uint64_t size_ = 0;
};

/// Application × device knob space. Dimensions of `app` come first.
/// Throws ConfigError if a dimension name appears in both.
KnobSpace cartesian_product(const KnobSpace& app, const KnobSpace& dev);

/// Maps a setting to the unit cube: index / (count - 1), 0 for one-level knobs.
std::vector<double> normalize(const KnobSpace& space, const KnobSetting& k);

/// Closest grid setting to a unit-cube point (clamped, round half up).
KnobSetting nearest_setting(const KnobSpace& space, std::span<const double> point);

/// Greedy nearest-neighbour tour over `settings` under switch_distance,
/// starting from `start`. Ties go to the lexicographically smallest setting.
std::vector<KnobSetting> order_min_switch_distance(std::vector<KnobSetting> settings,
                                                   const KnobSetting& start);

/// Sum of switch distances between successive settings.
int tour_length(std::span<const KnobSetting> order);

}  // namespace knobtune
