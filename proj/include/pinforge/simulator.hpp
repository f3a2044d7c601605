#pragma once

#include "pinforge/attack.hpp"
#include "pinforge/dictionary.hpp"
#include "pinforge/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pinforge {

/// Synthetic typist: intervals are speed-scaled model predictions with
/// i.i.d. Gaussian jitter, rounded to a sampling grid and floored.
struct TypistProfile {
    double speed_scale = 1.0;
    double noise_sd = 25.0;  // ms
    double quantization = 15.0;  // ms grid, 0 = off
    double min_interval = 30.0;  // ms
    std::uint64_t seed = 0;

    /// Zero noise, unit speed, no quantization.
    static TypistProfile exact(std::uint64_t seed = 0) { return {1.0, 0.0, 0.0, 30.0, seed}; }
};

void validate(const TypistProfile& p);

struct GroundTruth {
    std::variant<FittsModel, ExtendedModel> model;
    KeypadLayout layout;
    EntryPattern pattern = EntryPattern::Standard;
};

/// Noise-free intervals the ground truth predicts for typing `pin`.
TimingSequence truth_sequence(const GroundTruth& truth, const Pin& pin);

/// Nearest multiple of `grid`, ties rounding up; identity for grid 0.
double quantize(double value, double grid);

/// One simulated entry; deterministic in (profile.seed, pin, entry_index).
TimingSequence simulate_entry(const GroundTruth& truth, const Pin& pin, const TypistProfile& profile,
                              std::uint64_t entry_index = 0);

/// k entries for every (profile, pin) pair. Subject ids are "s<profile
/// index>"; case ids are "<subject>-<pin>-<entry>".
std::vector<ObservedEntry> simulate_cohort(const GroundTruth& truth, std::span<const Pin> pins,
                                           std::span<const TypistProfile> profiles, std::size_t entries_per_pin);

/// Key-down log reproducing each entry's intervals, first key-down at 0.
/// Session ids are "<subject_id>/<case_id>".
std::string export_keystroke_log(std::span<const ObservedEntry> cohort, EntryPattern pattern = EntryPattern::Standard);

/// Inverse of export_keystroke_log: sequences recovered from key-down
/// differences, the true PIN from the typed digits.
std::vector<ObservedEntry> entries_from_keystroke_log(std::string_view text);

}  // namespace pinforge
