#pragma once

#include "pinforge/attack.hpp"
#include "pinforge/dictionary.hpp"
#include "pinforge/geometry.hpp"
#include "pinforge/model.hpp"
#include "pinforge/simulator.hpp"
#include "pinforge/strength.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pinforge {

enum class ExperimentMode { General, Targeted, MultiEntry, KnownDigits, Countermeasure };

std::string_view mode_name(ExperimentMode m);
ExperimentMode parse_mode(std::string_view name);

/// Simulated victim cohort. PINs are sampled per strength level; every PIN
/// is typed by one subject, subjects take PINs round-robin.
struct CohortSpec {
    std::vector<std::size_t> pins_per_level;  // index 0 is level 1; empty = default for every level
    std::size_t default_pins_per_level = 200;
    std::size_t uniform_pins = 5000;  // countermeasure cohorts sample the whole space instead
    std::size_t entries_per_pin = 15;
    std::size_t subjects = 10;
    double noise_sd = 25.0;
    double quantization = 15.0;
    double min_interval = 30.0;
    double speed_min = 0.7;
    double speed_max = 1.4;
    std::string entries_file;  // ingest observed entries instead of simulating
};

struct ExperimentPlan {
    int pin_length = 4;
    ExperimentMode mode = ExperimentMode::General;
    Metric metric = Metric::Cosine;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> xs = {1, 3, 10, 30, 100, 300, 1000, 3000, 10000};

    // Ground truth used to simulate typists.
    FittsModel truth{135.912, 47.7334};
    std::string layout = "standard";  // built-in name or a layout file path

    // Attacker side: a fixed model, a dictionary file, a training log, or
    // (default) a simulated attacker typing `training_pins` random PINs.
    std::optional<FittsModel> attacker_model;
    std::string dictionary_file;
    std::string training_log;
    std::size_t training_pins = 18;
    std::size_t training_entries = 15;
    bool require_disjoint = true;

    CohortSpec cohort;

    std::size_t multi_entry_k = 10;
    int revealed_digits = 1;

    std::size_t targeted_training_pins = 2;
    std::size_t targeted_training_entries = 15;

    double circular_radius = 1.0;
    bool strict_circular = true;
    bool countermeasure_truncate = false;  // 2l instead of 2l+1 intervals

    int strength_exact_max = 4;
    std::uint64_t strength_samples = 100000;
};

/// Applies one `key = value` setting; throws on unknown keys.
void apply_plan_setting(ExperimentPlan& plan, std::string_view key, std::string_view value);
ExperimentPlan parse_plan(std::string_view text, ExperimentPlan base = {});
std::string format_plan(const ExperimentPlan& plan);
void validate(const ExperimentPlan& plan);

struct LevelCurve {
    int level = 0;
    std::size_t cases = 0;
    double mean_rank = 0.0;
    std::vector<CurvePoint> curve;
};

struct ExperimentReport {
    ExperimentMode mode = ExperimentMode::General;
    int pin_length = 0;
    int known_digits = 0;
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<LevelCurve> levels;
    std::vector<CurvePoint> aggregate;
    std::vector<CurvePoint> baseline;
    std::size_t cases = 0;
    double mean_rank = 0.0;
    std::vector<std::pair<std::string, double>> diagnostics;
    std::vector<std::string> notes;  // soft expectations that did not hold, warnings
    std::vector<std::pair<std::string, double>> timings;  // seconds; not part of the reproducible output
    std::vector<AttackOutcome> outcomes;

    std::optional<double> diagnostic(std::string_view key) const;
    double success_at(std::uint64_t x) const;
};

/// Caches strength partitions across experiments that share a dictionary.
class Workspace {
public:
    const LevelPartition& partition(const TimingDictionary& dict, int exact_max, std::uint64_t samples,
                                    std::uint64_t seed);

private:
    std::map<std::string, std::unique_ptr<LevelPartition>> partitions_;
};

ExperimentReport run_general(const ExperimentPlan& plan, Workspace* ws = nullptr);
ExperimentReport run_targeted(const ExperimentPlan& plan, Workspace* ws = nullptr);
ExperimentReport run_multi_entry(const ExperimentPlan& plan, Workspace* ws = nullptr);
ExperimentReport run_known_digits(const ExperimentPlan& plan, Workspace* ws = nullptr);
ExperimentReport run_countermeasure(const ExperimentPlan& plan, Workspace* ws = nullptr);
ExperimentReport run_experiment(const ExperimentPlan& plan, Workspace* ws = nullptr);

/// Report file: `#` metadata/diagnostic lines, then the curve table
/// `x,baseline,aggregate,level1,...`. Timings are included only on request
/// because they break bitwise reproducibility.
std::string format_report(const ExperimentReport& report, bool include_timings = false);

/// Largest 1 - cos over all pairs of dictionary rows (exact for up to 10^4
/// rows, otherwise against the first row).
double max_cosine_deviation(const TimingDictionary& dict);

/// Training samples from entries typed with the given pattern; pair
/// positions follow the entry order.
std::vector<TrainingSample> training_samples(std::span<const ObservedEntry> entries, EntryPattern pattern);

KeypadLayout resolve_layout(const std::string& name_or_path);

}  // namespace pinforge
