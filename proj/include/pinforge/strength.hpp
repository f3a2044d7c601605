#pragma once

#include "pinforge/dictionary.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pinforge {

/// Per-PIN strength tuples (G1..Gl): for each PIN, the cosine similarities
/// to every other PIN sorted descending and averaged over the rank bands
/// 1-9, 10-99, 100-999, ... Row i belongs to PIN value i.
struct StrengthProfile {
    int pin_length = 0;
    std::vector<double> g;  // 10^l rows of l band means
    bool approximate = false;
    std::uint64_t samples_per_pin = 0;  // sampling estimator only

    std::size_t size() const { return pin_length > 0 ? g.size() / static_cast<std::size_t>(pin_length) : 0; }
    std::span<const double> tuple(std::size_t pin) const
    {
        return {g.data() + pin * static_cast<std::size_t>(pin_length), static_cast<std::size_t>(pin_length)};
    }
};

struct StrengthOptions {
    /// The exact computation is quadratic in 10^l; lengths above this need
    /// `allow_full` (l = 6 is hours of compute).
    int max_exact_length = 4;
    bool allow_full = false;
};

/// Exact band means over all 10^l - 1 neighbors of every PIN.
StrengthProfile strength_measure(const TimingDictionary& dict, const StrengthOptions& options = {});

/// Seeded estimator: compares every PIN against `samples` uniformly drawn
/// neighbors and maps the sorted sample to the full rank scale. Per-PIN
/// substreams make it independent of scheduling.
StrengthProfile strength_estimate(const TimingDictionary& dict, std::uint64_t samples, std::uint64_t seed);

/// Zero-based sorted-rank range [begin, end) of band j (1-based).
std::pair<std::size_t, std::size_t> band_range(int band);

struct LevelPartition {
    int pin_length = 0;
    std::vector<std::uint8_t> level;  // per PIN value, 1..l-1
    std::vector<std::uint64_t> order;  // PINs weakest first
    std::vector<std::size_t> sizes;  // sizes[k] is the size of level k+1

    int level_count() const { return static_cast<int>(sizes.size()); }
    /// PIN values in level `lv` (1-based), weakest first.
    std::vector<std::uint64_t> members(int lv) const;
};

/// Stable ascending multi-key sort on (G1, G2, ..., Gl); the first 100 PINs
/// form level 1, the next 900 level 2, and so on by decades.
LevelPartition partition_levels(const StrengthProfile& profile);

struct FrequencyRecord {
    Pin pin;
    std::uint64_t count = 0;
};

struct LevelFrequency {
    int level = 0;
    std::size_t size = 0;
    std::uint64_t mass = 0;
    double proportion = 0.0;
    double mean_frequency = 0.0;
};

std::vector<LevelFrequency> frequency_analysis(const LevelPartition& partition,
                                               std::span<const FrequencyRecord> records);

std::vector<FrequencyRecord> parse_frequency_records(std::string_view text);
std::string format_strength_profile(const StrengthProfile& profile, const LevelPartition& partition);

}  // namespace pinforge
