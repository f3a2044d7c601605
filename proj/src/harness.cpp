#include "pinforge/harness.hpp"

#include "pinforge/error.hpp"
#include "pinforge/rng.hpp"
#include "pinforge/text_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

namespace pinforge {

namespace {

constexpr std::string_view kVersion = "pinforge 1.0.0";

// Substream tags under the plan's master seed.
enum Stream : std::uint64_t {
    kAttackerProfile = 1,
    kAttackerPins = 2,
    kSubjectSpeed = 3,
    kSubjectSeed = 4,
    kLevelPins = 5,
    kTargetedPins = 6,
    kUniformPins = 7,
    kStrength = 8,
};

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

bool parse_bool(std::string_view v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw Error("malformed boolean '" + std::string(v) + "'");
}

std::vector<std::uint64_t> parse_uint_list(std::string_view v, std::string_view what)
{
    std::vector<std::uint64_t> out;
    for (auto f : text::split(v, v.find(',') != std::string_view::npos ? ',' : ' '))
        if (!f.empty())
            out.push_back(text::parse_uint(f, what));
    return out;
}

std::string join(const std::vector<std::uint64_t>& xs)
{
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i)
        s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
}

std::string hex_prefix(const std::array<std::uint8_t, 32>& h)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (std::size_t i = 0; i < 8; ++i) {
        s += digits[h[i] >> 4];
        s += digits[h[i] & 0xf];
    }
    return s;
}

/// Uniform sample of `count` distinct items (partial Fisher-Yates).
std::vector<std::uint64_t> sample_distinct(std::vector<std::uint64_t> items, std::size_t count, Rng& rng)
{
    count = std::min(count, items.size());
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(items.size() - i));
        std::swap(items[i], items[j]);
    }
    items.resize(count);
    return items;
}

std::vector<std::uint64_t> sample_space(std::uint64_t space, std::size_t count, Rng& rng,
                                        const std::set<std::uint64_t>& exclude = {})
{
    count = static_cast<std::size_t>(std::min<std::uint64_t>(count, space - exclude.size()));
    std::set<std::uint64_t> chosen;
    std::vector<std::uint64_t> out;
    while (out.size() < count) {
        const auto v = rng.below(space);
        if (exclude.count(v) || !chosen.insert(v).second)
            continue;
        out.push_back(v);
    }
    return out;
}

struct Cohort {
    std::vector<ObservedEntry> entries;
    std::vector<int> levels;  // per entry; 0 when the partition does not apply
    std::vector<TypistProfile> profiles;  // simulated subjects, index = subject number
    bool simulated = true;
};

struct Setup {
    KeypadLayout layout = standard_numpad();
    GroundTruth truth{FittsModel{}, standard_numpad()};
    FittsModel attacker;
    std::optional<FitReport> training_report;
    std::set<std::string> training_subjects;
    std::unique_ptr<TimingDictionary> dict;
    std::unique_ptr<LevelPartition> own_partition;
    const LevelPartition* partition = nullptr;
    Cohort cohort;
    ExperimentReport report;
    std::vector<std::pair<std::string, double>> timings;
};

TypistProfile subject_profile(const ExperimentPlan& plan, std::size_t subject)
{
    Rng speed_rng(derive_seed(plan.seed, {kSubjectSpeed, subject}));
    TypistProfile p;
    p.speed_scale = speed_rng.log_uniform(plan.cohort.speed_min, plan.cohort.speed_max);
    p.noise_sd = plan.cohort.noise_sd;
    p.quantization = plan.cohort.quantization;
    p.min_interval = plan.cohort.min_interval;
    p.seed = derive_seed(plan.seed, {kSubjectSeed, subject});
    return p;
}

std::vector<TypistProfile> subject_profiles(const ExperimentPlan& plan)
{
    std::vector<TypistProfile> out;
    for (std::size_t s = 0; s < plan.cohort.subjects; ++s)
        out.push_back(subject_profile(plan, s));
    return out;
}

/// Entries for the given PINs, subjects assigned round-robin.
Cohort simulate_pins(const ExperimentPlan& plan, const GroundTruth& truth, const std::vector<std::uint64_t>& pins,
                     const std::vector<int>& pin_levels, std::size_t entries_per_pin)
{
    Cohort c;
    c.profiles = subject_profiles(plan);
    for (std::size_t i = 0; i < pins.size(); ++i) {
        const auto subject = i % c.profiles.size();
        const Pin pin(pins[i], plan.pin_length);
        const auto id = "s" + std::to_string(subject);
        for (std::size_t e = 0; e < entries_per_pin; ++e) {
            c.entries.push_back({id + "-" + pin.str() + "-" + std::to_string(e), id, pin,
                                 simulate_entry(truth, pin, c.profiles[subject], e)});
            c.levels.push_back(pin_levels[i]);
        }
    }
    return c;
}

Cohort level_cohort(const ExperimentPlan& plan, const GroundTruth& truth, const LevelPartition& part)
{
    std::vector<std::uint64_t> pins;
    std::vector<int> levels;
    for (int lv = 1; lv <= part.level_count(); ++lv) {
        const auto idx = static_cast<std::size_t>(lv - 1);
        const auto count = idx < plan.cohort.pins_per_level.size() ? plan.cohort.pins_per_level[idx]
                                                                   : plan.cohort.default_pins_per_level;
        Rng rng(derive_seed(plan.seed, {kLevelPins, static_cast<std::uint64_t>(lv)}));
        for (auto p : sample_distinct(part.members(lv), count, rng)) {
            pins.push_back(p);
            levels.push_back(lv);
        }
    }
    return simulate_pins(plan, truth, pins, levels, plan.cohort.entries_per_pin);
}

Cohort ingested_cohort(const ExperimentPlan& plan, const LevelPartition* part)
{
    Cohort c;
    c.simulated = false;
    c.entries = parse_observed_entries(text::read_file(plan.cohort.entries_file));
    for (const auto& e : c.entries) {
        if (!e.true_pin)
            throw Error("evaluation needs the true PIN of case " + e.case_id);
        if (e.true_pin->length() != plan.pin_length)
            throw Error("case " + e.case_id + " has a PIN of the wrong length");
        c.levels.push_back(part ? part->level[e.true_pin->value()] : 0);
    }
    return c;
}

FittsModel attacker_model(const ExperimentPlan& plan, Setup& s)
{
    if (plan.attacker_model) {
        validate(*plan.attacker_model);
        return *plan.attacker_model;
    }
    if (!plan.training_log.empty()) {
        const auto log = text::read_file(plan.training_log);
        for (const auto& session : parse_keystroke_log(log))
            s.training_subjects.insert(session.id.substr(0, session.id.find('/')));
        auto fit = fit_fitts(ingest_keystroke_log(log), s.layout);
        s.training_report = fit.report;
        return fit.model;
    }
    TypistProfile profile;
    profile.noise_sd = plan.cohort.noise_sd;
    profile.quantization = plan.cohort.quantization;
    profile.min_interval = plan.cohort.min_interval;
    profile.seed = derive_seed(plan.seed, {kAttackerProfile});
    Rng rng(derive_seed(plan.seed, {kAttackerPins}));
    std::vector<ObservedEntry> entries;
    for (auto v : sample_space(pin_space_size(plan.pin_length), plan.training_pins, rng)) {
        const Pin pin(v, plan.pin_length);
        for (std::size_t e = 0; e < plan.training_entries; ++e)
            entries.push_back({"t" + pin.str() + "-" + std::to_string(e), "attacker", pin,
                               simulate_entry(s.truth, pin, profile, e)});
    }
    s.training_subjects.insert("attacker");
    const auto samples = training_samples(entries, EntryPattern::Standard);
    auto fit = fit_fitts(samples, s.layout);
    s.training_report = fit.report;
    return fit.model;
}

void check_disjoint(const ExperimentPlan& plan, const Setup& s)
{
    if (!plan.require_disjoint)
        return;
    for (const auto& e : s.cohort.entries)
        if (s.training_subjects.count(e.subject_id))
            throw Error("subject '" + e.subject_id + "' appears in both training and testing data");
}

/// Layout, truth, attacker model, dictionary, and partition shared by the
/// level-based experiments.
Setup prepare(const ExperimentPlan& plan, Workspace* ws, bool need_partition = true)
{
    validate(plan);
    Setup s;
    s.layout = resolve_layout(plan.layout);
    s.truth = GroundTruth{plan.truth, s.layout, EntryPattern::Standard};

    Stopwatch sw;
    if (!plan.dictionary_file.empty()) {
        s.dict = std::make_unique<TimingDictionary>(load_dictionary(text::read_file(plan.dictionary_file)));
        if (s.dict->pin_length() != plan.pin_length)
            throw Error("dictionary length " + std::to_string(s.dict->pin_length()) + " does not match plan length "
                        + std::to_string(plan.pin_length));
        s.attacker = s.dict->fingerprint().model;
        if (auto w = fingerprint_warning(*s.dict, s.attacker, s.layout))
            s.report.notes.push_back("warning: " + *w);
    } else {
        s.attacker = attacker_model(plan, s);
        s.dict = std::make_unique<TimingDictionary>(build_dictionary(s.attacker, s.layout, plan.pin_length));
    }
    s.timings.emplace_back("dictionary", sw.seconds());

    if (need_partition) {
        Stopwatch psw;
        const auto seed = derive_seed(plan.seed, {kStrength});
        if (ws) {
            s.partition = &ws->partition(*s.dict, plan.strength_exact_max, plan.strength_samples, seed);
        } else {
            const auto profile = plan.pin_length <= plan.strength_exact_max
                ? strength_measure(*s.dict, {plan.strength_exact_max, false})
                : strength_estimate(*s.dict, plan.strength_samples, seed);
            s.own_partition = std::make_unique<LevelPartition>(partition_levels(profile));
            s.partition = s.own_partition.get();
        }
        s.timings.emplace_back("strength", psw.seconds());
    }

    if (!plan.cohort.entries_file.empty())
        s.cohort = ingested_cohort(plan, s.partition);
    else
        s.cohort = level_cohort(plan, s.truth, *s.partition);
    if (s.cohort.entries.empty())
        throw Error("empty cohort");
    check_disjoint(plan, s);
    return s;
}

void add_metadata(ExperimentReport& r, const ExperimentPlan& plan, const Setup& s)
{
    auto& m = r.metadata;
    m.emplace_back("version", kVersion);
    m.emplace_back("mode", mode_name(plan.mode));
    m.emplace_back("pin_length", std::to_string(plan.pin_length));
    m.emplace_back("seed", std::to_string(plan.seed));
    m.emplace_back("metric", metric_name(plan.metric));
    m.emplace_back("layout", s.layout.name());
    m.emplace_back("truth_a", text::format_exact(plan.truth.a));
    m.emplace_back("truth_b", text::format_exact(plan.truth.b));
    m.emplace_back("attacker_a", text::format_exact(s.attacker.a));
    m.emplace_back("attacker_b", text::format_exact(s.attacker.b));
    if (s.dict)
        m.emplace_back("dictionary_hash", hex_prefix(s.dict->fingerprint().layout_hash));
    m.emplace_back("cohort", s.cohort.simulated ? "simulated" : plan.cohort.entries_file);
    if (s.cohort.simulated) {
        m.emplace_back("subjects", std::to_string(plan.cohort.subjects));
        m.emplace_back("entries_per_pin", std::to_string(plan.cohort.entries_per_pin));
        m.emplace_back("noise_sd", text::format_exact(plan.cohort.noise_sd));
        m.emplace_back("quantization", text::format_exact(plan.cohort.quantization));
        m.emplace_back("speed_range", text::format_exact(plan.cohort.speed_min) + ".."
                                          + text::format_exact(plan.cohort.speed_max));
    }
    if (s.partition)
        m.emplace_back("strength", plan.pin_length <= plan.strength_exact_max
                                       ? "exact"
                                       : "approximate(" + std::to_string(plan.strength_samples) + " samples)");
    if (s.training_report)
        m.emplace_back("training_samples", std::to_string(s.training_report->n_samples));
}

/// Fills curves, baseline, and improvement ratios from ranked outcomes.
void summarize(ExperimentReport& r, const ExperimentPlan& plan, const std::vector<AttackOutcome>& outcomes,
               const std::vector<int>& levels, int level_count, int known_digits)
{
    r.pin_length = plan.pin_length;
    r.known_digits = known_digits;
    r.cases = outcomes.size();
    r.aggregate = success_curve(outcomes, plan.xs);
    double rank_sum = 0.0;
    for (const auto& o : outcomes)
        rank_sum += static_cast<double>(o.rank);
    r.mean_rank = outcomes.empty() ? 0.0 : rank_sum / static_cast<double>(outcomes.size());

    const auto space = pin_space_size(plan.pin_length - known_digits);
    for (auto x : plan.xs)
        r.baseline.push_back({x, x >= space ? 1.0 : random_baseline(plan.pin_length, known_digits, x)});

    for (int lv = 1; lv <= level_count; ++lv) {
        std::vector<AttackOutcome> subset;
        for (std::size_t i = 0; i < outcomes.size(); ++i)
            if (levels[i] == lv)
                subset.push_back(outcomes[i]);
        LevelCurve lc;
        lc.level = lv;
        lc.cases = subset.size();
        if (!subset.empty()) {
            lc.curve = success_curve(subset, plan.xs);
            double s = 0.0;
            for (const auto& o : subset)
                s += static_cast<double>(o.rank);
            lc.mean_rank = s / static_cast<double>(subset.size());
        }
        r.levels.push_back(std::move(lc));
    }

    for (std::size_t i = 0; i < plan.xs.size(); ++i)
        r.diagnostics.emplace_back("improvement_x" + std::to_string(plan.xs[i]),
                                   r.aggregate[i].success_rate / r.baseline[i].success_rate);
    r.diagnostics.emplace_back("mean_rank", r.mean_rank);
    for (const auto& lc : r.levels)
        if (lc.cases > 0)
            r.diagnostics.emplace_back("level" + std::to_string(lc.level) + "_mean_rank", lc.mean_rank);
}

std::vector<AttackOutcome> attack_entries(const TimingDictionary& dict, const std::vector<ObservedEntry>& entries,
                                          Metric metric)
{
    return run_attack(dict, entries, AttackMode::general(), metric);
}

std::optional<double> curve_at(const std::vector<CurvePoint>& c, std::uint64_t x)
{
    for (const auto& p : c)
        if (p.x == x)
            return p.success_rate;
    return std::nullopt;
}

void level_order_note(ExperimentReport& r)
{
    // Weaker levels are expected to be easier; report, never fail.
    const auto& xs = r.aggregate;
    if (xs.empty())
        return;
    const auto x = std::find_if(xs.begin(), xs.end(), [](const CurvePoint& p) { return p.x == 100; }) != xs.end()
        ? std::uint64_t{100}
        : xs.back().x;
    for (std::size_t i = 1; i < r.levels.size(); ++i) {
        const auto& prev = r.levels[i - 1];
        const auto& cur = r.levels[i];
        if (prev.cases == 0 || cur.cases == 0)
            continue;
        const auto a = curve_at(prev.curve, x);
        const auto b = curve_at(cur.curve, x);
        if (a && b && *b > *a)
            r.notes.push_back("soft: level " + std::to_string(cur.level) + " beats level " + std::to_string(prev.level)
                              + " at x=" + std::to_string(x));
    }
}

}  // namespace

std::string_view mode_name(ExperimentMode m)
{
    switch (m) {
    case ExperimentMode::General: return "general";
    case ExperimentMode::Targeted: return "targeted";
    case ExperimentMode::MultiEntry: return "multi-entry";
    case ExperimentMode::KnownDigits: return "known-digits";
    case ExperimentMode::Countermeasure: return "countermeasure";
    }
    return "general";
}

ExperimentMode parse_mode(std::string_view name)
{
    if (name == "general")
        return ExperimentMode::General;
    if (name == "targeted")
        return ExperimentMode::Targeted;
    if (name == "multi-entry" || name == "multi_entry")
        return ExperimentMode::MultiEntry;
    if (name == "known-digits" || name == "known_digits")
        return ExperimentMode::KnownDigits;
    if (name == "countermeasure")
        return ExperimentMode::Countermeasure;
    throw Error("unknown experiment mode '" + std::string(name) + "'");
}

void apply_plan_setting(ExperimentPlan& plan, std::string_view key, std::string_view value)
{
    key = text::trim(key);
    value = text::trim(value);
    auto num = [&] { return text::parse_double(value, key); };
    auto count = [&] { return static_cast<std::size_t>(text::parse_uint(value, key)); };

    if (key == "pin_length" || key == "length") plan.pin_length = static_cast<int>(text::parse_uint(value, key));
    else if (key == "mode") plan.mode = parse_mode(value);
    else if (key == "metric") plan.metric = parse_metric(value);
    else if (key == "seed") plan.seed = text::parse_uint(value, key);
    else if (key == "xs") plan.xs = parse_uint_list(value, key);
    else if (key == "truth_a" || key == "a") plan.truth.a = num();
    else if (key == "truth_b" || key == "b") plan.truth.b = num();
    else if (key == "layout") plan.layout = std::string(value);
    else if (key == "attacker_a") {
        if (!plan.attacker_model) plan.attacker_model = plan.truth;
        plan.attacker_model->a = num();
    } else if (key == "attacker_b") {
        if (!plan.attacker_model) plan.attacker_model = plan.truth;
        plan.attacker_model->b = num();
    }
    else if (key == "dictionary") plan.dictionary_file = std::string(value);
    else if (key == "training_log") plan.training_log = std::string(value);
    else if (key == "training_pins") plan.training_pins = count();
    else if (key == "training_entries") plan.training_entries = count();
    else if (key == "require_disjoint") plan.require_disjoint = parse_bool(value);
    else if (key == "pins_per_level") {
        plan.cohort.pins_per_level.clear();
        for (auto v : parse_uint_list(value, key))
            plan.cohort.pins_per_level.push_back(static_cast<std::size_t>(v));
    }
    else if (key == "default_pins_per_level") plan.cohort.default_pins_per_level = count();
    else if (key == "uniform_pins") plan.cohort.uniform_pins = count();
    else if (key == "entries_per_pin") plan.cohort.entries_per_pin = count();
    else if (key == "subjects") plan.cohort.subjects = count();
    else if (key == "noise_sd") plan.cohort.noise_sd = num();
    else if (key == "quantization") plan.cohort.quantization = num();
    else if (key == "min_interval") plan.cohort.min_interval = num();
    else if (key == "speed_min") plan.cohort.speed_min = num();
    else if (key == "speed_max") plan.cohort.speed_max = num();
    else if (key == "entries") plan.cohort.entries_file = std::string(value);
    else if (key == "multi_entry_k" || key == "k") plan.multi_entry_k = count();
    else if (key == "revealed_digits" || key == "revealed") plan.revealed_digits = static_cast<int>(count());
    else if (key == "targeted_training_pins") plan.targeted_training_pins = count();
    else if (key == "targeted_training_entries") plan.targeted_training_entries = count();
    else if (key == "circular_radius" || key == "radius") plan.circular_radius = num();
    else if (key == "strict_circular") plan.strict_circular = parse_bool(value);
    else if (key == "countermeasure_truncate") plan.countermeasure_truncate = parse_bool(value);
    else if (key == "strength_exact_max") plan.strength_exact_max = static_cast<int>(count());
    else if (key == "strength_samples") plan.strength_samples = text::parse_uint(value, key);
    else throw Error("unknown plan key '" + std::string(key) + "'");
}

ExperimentPlan parse_plan(std::string_view text, ExperimentPlan base)
{
    for (auto line : text::data_lines(text)) {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error("malformed plan line: '" + std::string(line) + "'");
        apply_plan_setting(base, line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

std::string format_plan(const ExperimentPlan& p)
{
    std::string out;
    auto kv = [&](std::string_view k, const std::string& v) { out += std::string(k) + " = " + v + "\n"; };
    kv("mode", std::string(mode_name(p.mode)));
    kv("pin_length", std::to_string(p.pin_length));
    kv("metric", std::string(metric_name(p.metric)));
    kv("seed", std::to_string(p.seed));
    kv("xs", join(p.xs));
    kv("truth_a", text::format_exact(p.truth.a));
    kv("truth_b", text::format_exact(p.truth.b));
    kv("layout", p.layout);
    if (p.attacker_model) {
        kv("attacker_a", text::format_exact(p.attacker_model->a));
        kv("attacker_b", text::format_exact(p.attacker_model->b));
    }
    if (!p.dictionary_file.empty()) kv("dictionary", p.dictionary_file);
    if (!p.training_log.empty()) kv("training_log", p.training_log);
    kv("training_pins", std::to_string(p.training_pins));
    kv("training_entries", std::to_string(p.training_entries));
    kv("require_disjoint", p.require_disjoint ? "true" : "false");
    if (!p.cohort.pins_per_level.empty()) {
        std::vector<std::uint64_t> v(p.cohort.pins_per_level.begin(), p.cohort.pins_per_level.end());
        kv("pins_per_level", join(v));
    }
    kv("default_pins_per_level", std::to_string(p.cohort.default_pins_per_level));
    kv("uniform_pins", std::to_string(p.cohort.uniform_pins));
    kv("entries_per_pin", std::to_string(p.cohort.entries_per_pin));
    kv("subjects", std::to_string(p.cohort.subjects));
    kv("noise_sd", text::format_exact(p.cohort.noise_sd));
    kv("quantization", text::format_exact(p.cohort.quantization));
    kv("min_interval", text::format_exact(p.cohort.min_interval));
    kv("speed_min", text::format_exact(p.cohort.speed_min));
    kv("speed_max", text::format_exact(p.cohort.speed_max));
    if (!p.cohort.entries_file.empty()) kv("entries", p.cohort.entries_file);
    kv("multi_entry_k", std::to_string(p.multi_entry_k));
    kv("revealed_digits", std::to_string(p.revealed_digits));
    kv("targeted_training_pins", std::to_string(p.targeted_training_pins));
    kv("targeted_training_entries", std::to_string(p.targeted_training_entries));
    kv("circular_radius", text::format_exact(p.circular_radius));
    kv("strict_circular", p.strict_circular ? "true" : "false");
    kv("countermeasure_truncate", p.countermeasure_truncate ? "true" : "false");
    kv("strength_exact_max", std::to_string(p.strength_exact_max));
    kv("strength_samples", std::to_string(p.strength_samples));
    return out;
}

void validate(const ExperimentPlan& p)
{
    if (p.pin_length < 1 || p.pin_length > kMaxPinLength)
        throw Error("plan pin_length out of range");
    if (p.mode != ExperimentMode::Countermeasure && p.pin_length < 2)
        throw Error("level-based experiments need pin_length >= 2");
    if (p.xs.empty())
        throw Error("plan needs at least one attempt threshold");
    for (std::size_t i = 0; i < p.xs.size(); ++i)
        if (p.xs[i] < 1 || (i > 0 && p.xs[i] <= p.xs[i - 1]))
            throw Error("attempt thresholds must be positive and strictly ascending");
    validate(p.truth);
    if (p.cohort.entries_per_pin < 1 || p.cohort.subjects < 1)
        throw Error("cohort needs at least one subject and one entry per PIN");
    for (auto c : p.cohort.pins_per_level)
        if (c < 1)
            throw Error("per-level sampling counts must be at least 1");
    if (!(p.cohort.speed_min > 0.0) || p.cohort.speed_max < p.cohort.speed_min)
        throw Error("invalid speed range");
}

std::optional<double> ExperimentReport::diagnostic(std::string_view key) const
{
    for (const auto& [k, v] : diagnostics)
        if (k == key)
            return v;
    return std::nullopt;
}

double ExperimentReport::success_at(std::uint64_t x) const
{
    if (auto v = curve_at(aggregate, x))
        return *v;
    throw Error("report has no success rate at x=" + std::to_string(x));
}

const LevelPartition& Workspace::partition(const TimingDictionary& dict, int exact_max, std::uint64_t samples,
                                           std::uint64_t seed)
{
    const bool exact = dict.pin_length() <= exact_max;
    const auto& fp = dict.fingerprint();
    const auto key = std::to_string(dict.pin_length()) + ":" + text::format_exact(fp.model.a) + ":"
        + text::format_exact(fp.model.b) + ":" + hex_prefix(fp.layout_hash) + ":"
        + std::string(pattern_name(fp.pattern)) + ":"
        + (exact ? std::string("exact") : std::to_string(samples) + "@" + std::to_string(seed));
    auto& slot = partitions_[key];
    if (!slot) {
        const auto profile = exact ? strength_measure(dict, {exact_max, false}) : strength_estimate(dict, samples, seed);
        slot = std::make_unique<LevelPartition>(partition_levels(profile));
    }
    return *slot;
}

KeypadLayout resolve_layout(const std::string& name_or_path)
{
    if (auto builtin = builtin_layout(name_or_path))
        return *builtin;
    if (std::filesystem::exists(name_or_path))
        return load_layout(text::read_file(name_or_path), std::filesystem::path(name_or_path).stem().string());
    throw Error("unknown layout '" + name_or_path + "' (not a built-in name or a readable file)");
}

std::vector<TrainingSample> training_samples(std::span<const ObservedEntry> entries, EntryPattern pattern)
{
    std::vector<TrainingSample> out;
    for (const auto& e : entries) {
        if (!e.true_pin)
            throw Error("training entry " + e.case_id + " lacks its PIN");
        const auto keys = entry_keys(*e.true_pin, pattern);
        if (keys.size() != e.sequence.size() + 1)
            throw Error("training entry " + e.case_id + " does not match the entry pattern");
        const int pairs = static_cast<int>(e.sequence.size());
        for (int i = 0; i < pairs; ++i) {
            const auto u = static_cast<std::size_t>(i);
            out.push_back({keys[u], keys[u + 1], e.sequence[u], i + 1, pairs});
        }
    }
    return out;
}

double max_cosine_deviation(const TimingDictionary& dict)
{
    const auto n = dict.size();
    const auto dim = dict.dim();
    std::vector<double> unit(n * dim);
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = dict.row(r);
        double ss = 0.0;
        for (double v : row)
            ss += v * v;
        const double norm = std::sqrt(ss);
        for (std::size_t i = 0; i < dim; ++i)
            unit[r * dim + i] = row[i] / norm;
    }
    auto dev = [&](std::size_t a, std::size_t b) {
        double d = 0.0;
        for (std::size_t i = 0; i < dim; ++i)
            d += unit[a * dim + i] * unit[b * dim + i];
        return std::fabs(1.0 - d);
    };
    double worst = 0.0;
    if (n <= 10000) {
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                worst = std::max(worst, dev(a, b));
    } else {
        for (std::size_t b = 1; b < n; ++b)
            worst = std::max(worst, dev(0, b));
    }
    return worst;
}

ExperimentReport run_general(const ExperimentPlan& plan, Workspace* ws)
{
    auto s = prepare(plan, ws);
    Stopwatch sw;
    auto outcomes = attack_entries(*s.dict, s.cohort.entries, plan.metric);
    s.timings.emplace_back("attack", sw.seconds());

    auto& r = s.report;
    r.mode = ExperimentMode::General;
    add_metadata(r, plan, s);
    summarize(r, plan, outcomes, s.cohort.levels, s.partition->level_count(), 0);
    level_order_note(r);
    r.outcomes = std::move(outcomes);
    r.timings = s.timings;
    return std::move(s.report);
}

ExperimentReport run_targeted(const ExperimentPlan& plan, Workspace* ws)
{
    auto s = prepare(plan, ws);
    if (!s.cohort.simulated)
        throw Error("insufficient per-subject training entries: targeted attacks need a simulated cohort");
    if (plan.targeted_training_pins < 1 || plan.targeted_training_entries < 1)
        throw Error("insufficient per-subject training entries");

    Stopwatch sw;
    const auto general = attack_entries(*s.dict, s.cohort.entries, plan.metric);
    std::vector<AttackOutcome> outcomes(s.cohort.entries.size());
    const auto space = pin_space_size(plan.pin_length);
    double b_sum = 0.0;
    double a_sum = 0.0;
    for (std::size_t subject = 0; subject < s.cohort.profiles.size(); ++subject) {
        const auto id = "s" + std::to_string(subject);
        std::vector<std::size_t> members;
        std::set<std::uint64_t> attacked;
        for (std::size_t i = 0; i < s.cohort.entries.size(); ++i)
            if (s.cohort.entries[i].subject_id == id) {
                members.push_back(i);
                attacked.insert(s.cohort.entries[i].true_pin->value());
            }
        if (members.empty())
            continue;

        // Per-subject training data: other PINs typed by the same subject.
        Rng rng(derive_seed(plan.seed, {kTargetedPins, subject}));
        std::vector<ObservedEntry> training;
        std::optional<Fit<FittsModel>> fit;
        for (int attempt = 0; attempt < 16 && !fit; ++attempt) {
            training.clear();
            for (auto v : sample_space(space, plan.targeted_training_pins, rng, attacked)) {
                const Pin pin(v, plan.pin_length);
                for (std::size_t e = 0; e < plan.targeted_training_entries; ++e)
                    training.push_back({id + "-train-" + pin.str(), id, pin,
                                        simulate_entry(s.truth, pin, s.cohort.profiles[subject], 1000000 + e)});
            }
            try {
                fit = fit_fitts(training_samples(training, EntryPattern::Standard), s.layout);
            } catch (const Error&) {
                // Redraw when the training PINs span a single index of difficulty.
            }
        }
        if (!fit)
            throw Error("insufficient per-subject training entries for subject " + id);
        a_sum += fit->model.a;
        b_sum += fit->model.b;

        const auto dict = build_dictionary(fit->model, s.layout, plan.pin_length);
        const Ranker ranker(dict, plan.metric);
        for (auto i : members) {
            const auto& e = s.cohort.entries[i];
            AttackOutcome o{e.case_id, e.true_pin, 0, 0.0, dict.size(), std::nullopt, {}};
            if (auto placed = ranker.place(e.sequence, *e.true_pin)) {
                o.rank = placed->rank;
                o.score = placed->score;
            }
            outcomes[i] = std::move(o);
        }
    }
    s.timings.emplace_back("attack", sw.seconds());

    auto& r = s.report;
    r.mode = ExperimentMode::Targeted;
    add_metadata(r, plan, s);
    summarize(r, plan, outcomes, s.cohort.levels, s.partition->level_count(), 0);
    const auto general_curve = success_curve(general, plan.xs);
    double general_rank = 0.0;
    for (const auto& o : general)
        general_rank += static_cast<double>(o.rank);
    r.diagnostics.emplace_back("general_mean_rank", general_rank / static_cast<double>(general.size()));
    for (std::size_t i = 0; i < plan.xs.size(); ++i) {
        r.diagnostics.emplace_back("general_x" + std::to_string(plan.xs[i]), general_curve[i].success_rate);
        r.diagnostics.emplace_back("targeted_minus_general_x" + std::to_string(plan.xs[i]),
                                   r.aggregate[i].success_rate - general_curve[i].success_rate);
    }
    const auto subjects = static_cast<double>(s.cohort.profiles.size());
    r.diagnostics.emplace_back("targeted_mean_a", a_sum / subjects);
    r.diagnostics.emplace_back("targeted_mean_b", b_sum / subjects);
    level_order_note(r);
    r.outcomes = std::move(outcomes);
    r.timings = s.timings;
    return std::move(s.report);
}

ExperimentReport run_multi_entry(const ExperimentPlan& plan, Workspace* ws)
{
    auto s = prepare(plan, ws);
    if (plan.multi_entry_k < 1)
        throw Error("multi-entry k must be at least 1");

    Stopwatch sw;
    const auto general = attack_entries(*s.dict, s.cohort.entries, plan.metric);
    const auto outcomes = run_attack(*s.dict, s.cohort.entries, AttackMode::multi_entry(plan.multi_entry_k), plan.metric);
    s.timings.emplace_back("attack", sw.seconds());

    // Level of each group comes from its true PIN.
    std::vector<int> levels;
    for (const auto& o : outcomes)
        levels.push_back(s.partition && o.true_pin ? s.partition->level[o.true_pin->value()] : 0);

    auto& r = s.report;
    r.mode = ExperimentMode::MultiEntry;
    add_metadata(r, plan, s);
    r.metadata.emplace_back("multi_entry_k", std::to_string(plan.multi_entry_k));
    summarize(r, plan, outcomes, levels, s.partition->level_count(), 0);

    double general_rank = 0.0;
    for (const auto& o : general)
        general_rank += static_cast<double>(o.rank);
    general_rank /= static_cast<double>(general.size());
    r.diagnostics.emplace_back("general_mean_rank", general_rank);
    r.diagnostics.emplace_back("multi_entry_mean_rank", r.mean_rank);
    const auto general_curve = success_curve(general, plan.xs);
    for (std::size_t i = 0; i < plan.xs.size(); ++i)
        r.diagnostics.emplace_back("general_x" + std::to_string(plan.xs[i]), general_curve[i].success_rate);
    if (r.mean_rank > general_rank)
        r.notes.push_back("soft: multi-entry mean rank exceeds general mean rank");
    r.outcomes = outcomes;
    r.timings = s.timings;
    return std::move(s.report);
}

ExperimentReport run_known_digits(const ExperimentPlan& plan, Workspace* ws)
{
    const int l = plan.pin_length;
    const int k = plan.revealed_digits;
    if (k < 1 || k >= l)
        throw Error("revealed digit count must be in [1, " + std::to_string(l - 1) + "]");
    auto s = prepare(plan, ws);

    // All position subsets of size k, in lexicographic order.
    std::vector<std::vector<int>> subsets;
    std::vector<int> pick(static_cast<std::size_t>(k));
    std::iota(pick.begin(), pick.end(), 1);
    while (true) {
        subsets.push_back(pick);
        int i = k - 1;
        while (i >= 0 && pick[static_cast<std::size_t>(i)] == l - k + i + 1)
            --i;
        if (i < 0)
            break;
        ++pick[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j)
            pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }

    Stopwatch sw;
    // Entries sharing a PIN share every reduced dictionary.
    std::map<std::uint64_t, std::vector<std::size_t>> by_pin;
    for (std::size_t i = 0; i < s.cohort.entries.size(); ++i)
        by_pin[s.cohort.entries[i].true_pin->value()].push_back(i);

    const auto n_sub = subsets.size();
    std::vector<AttackOutcome> outcomes(s.cohort.entries.size() * n_sub);
    std::vector<int> levels(outcomes.size());
    for (const auto& [value, members] : by_pin) {
        const Pin pin(value, l);
        for (std::size_t si = 0; si < n_sub; ++si) {
            std::vector<DigitConstraint> constraints;
            for (int pos : subsets[si])
                constraints.push_back({pos, pin.digit(pos)});
            const auto reduced = reduce_dictionary(*s.dict, constraints);
            const Ranker ranker(reduced, plan.metric);
            for (auto i : members) {
                const auto& e = s.cohort.entries[i];
                std::string tag;
                for (int pos : subsets[si])
                    tag += std::to_string(pos);
                AttackOutcome o{e.case_id + "@" + tag, e.true_pin, 0, 0.0, reduced.size(), std::nullopt, {}};
                if (auto placed = ranker.place(e.sequence, pin)) {
                    o.rank = placed->rank;
                    o.score = placed->score;
                }
                outcomes[i * n_sub + si] = std::move(o);
                levels[i * n_sub + si] = s.cohort.levels[i];
            }
        }
    }
    s.timings.emplace_back("attack", sw.seconds());

    auto& r = s.report;
    r.mode = ExperimentMode::KnownDigits;
    add_metadata(r, plan, s);
    r.metadata.emplace_back("revealed_digits", std::to_string(k));
    r.metadata.emplace_back("position_subsets", std::to_string(n_sub));
    summarize(r, plan, outcomes, levels, s.partition->level_count(), k);
    r.diagnostics.emplace_back("position_subsets", static_cast<double>(n_sub));
    level_order_note(r);
    r.outcomes = std::move(outcomes);
    r.timings = s.timings;
    return std::move(s.report);
}

ExperimentReport run_countermeasure(const ExperimentPlan& plan, Workspace*)
{
    validate(plan);
    Setup s;
    s.layout = plan.layout == "standard" || plan.layout == "circular" ? circular_layout(plan.circular_radius)
                                                                       : resolve_layout(plan.layout);
    if (plan.strict_circular) {
        const auto& enter = s.layout.key(Key::Enter);
        const double r0 = key_distance(s.layout, Key::D0, Key::Enter);
        for (int d = 0; d <= 9; ++d) {
            const auto& kd = s.layout.key(digit_key(d));
            if (std::fabs(key_distance(s.layout, digit_key(d), Key::Enter) - r0) > 1e-9 * r0
                || kd.effective_width != enter.effective_width)
                throw Error("layout '" + s.layout.name() + "' is not circular around ENTER");
        }
    }
    const auto pattern = plan.countermeasure_truncate ? EntryPattern::InterleavedShort : EntryPattern::Interleaved;
    s.truth = GroundTruth{plan.truth, s.layout, pattern};
    // Training on the countermeasure pad is rank-deficient (every hop has the
    // same difficulty), so the attacker reuses a model fitted elsewhere.
    s.attacker = plan.attacker_model.value_or(plan.truth);
    validate(s.attacker);

    Stopwatch sw;
    s.dict = std::make_unique<TimingDictionary>(build_dictionary(s.attacker, s.layout, plan.pin_length, pattern));
    const auto control = build_dictionary(s.attacker, standard_numpad(), plan.pin_length, pattern);
    s.timings.emplace_back("dictionary", sw.seconds());

    if (!plan.cohort.entries_file.empty()) {
        s.cohort = ingested_cohort(plan, nullptr);
    } else {
        Rng rng(derive_seed(plan.seed, {kUniformPins}));
        const auto pins = sample_space(pin_space_size(plan.pin_length), plan.cohort.uniform_pins, rng);
        const std::vector<int> zero(pins.size(), 0);
        s.cohort = simulate_pins(plan, s.truth, pins, zero, plan.cohort.entries_per_pin);
    }

    Stopwatch asw;
    const auto outcomes = attack_entries(*s.dict, s.cohort.entries, plan.metric);
    s.timings.emplace_back("attack", asw.seconds());

    auto& r = s.report;
    r.mode = ExperimentMode::Countermeasure;
    add_metadata(r, plan, s);
    r.metadata.emplace_back("entry_pattern", std::string(pattern_name(pattern)));
    r.metadata.emplace_back("circular_radius", text::format_exact(plan.circular_radius));
    summarize(r, plan, outcomes, s.cohort.levels, 0, 0);
    r.diagnostics.emplace_back("max_cosine_deviation", max_cosine_deviation(*s.dict));
    r.diagnostics.emplace_back("control_max_cosine_deviation", max_cosine_deviation(control));
    for (std::size_t i = 0; i < plan.xs.size(); ++i)
        r.diagnostics.emplace_back("ratio_to_baseline_x" + std::to_string(plan.xs[i]),
                                   r.aggregate[i].success_rate / r.baseline[i].success_rate);
    r.outcomes = outcomes;
    r.timings = s.timings;
    return std::move(s.report);
}

ExperimentReport run_experiment(const ExperimentPlan& plan, Workspace* ws)
{
    switch (plan.mode) {
    case ExperimentMode::General: return run_general(plan, ws);
    case ExperimentMode::Targeted: return run_targeted(plan, ws);
    case ExperimentMode::MultiEntry: return run_multi_entry(plan, ws);
    case ExperimentMode::KnownDigits: return run_known_digits(plan, ws);
    case ExperimentMode::Countermeasure: return run_countermeasure(plan, ws);
    }
    return run_general(plan, ws);
}

std::string format_report(const ExperimentReport& r, bool include_timings)
{
    std::string out = "# pinforge-report v1\n";
    for (const auto& [k, v] : r.metadata)
        out += "# " + k + "=" + v + "\n";
    out += "# cases=" + std::to_string(r.cases) + "\n";
    for (const auto& lc : r.levels)
        out += "# level" + std::to_string(lc.level) + "_cases=" + std::to_string(lc.cases) + "\n";
    for (const auto& [k, v] : r.diagnostics)
        out += "# diag " + k + "=" + text::format_exact(v) + "\n";
    for (const auto& n : r.notes)
        out += "# note " + n + "\n";
    if (include_timings)
        for (const auto& [k, v] : r.timings)
            out += "# time " + k + "=" + text::format_fixed(v, 3) + "s\n";

    out += "x,baseline,aggregate";
    for (const auto& lc : r.levels)
        out += ",level" + std::to_string(lc.level);
    out += '\n';
    for (std::size_t i = 0; i < r.aggregate.size(); ++i) {
        out += std::to_string(r.aggregate[i].x) + "," + text::format_exact(r.baseline[i].success_rate) + ","
            + text::format_exact(r.aggregate[i].success_rate);
        for (const auto& lc : r.levels)
            out += "," + (lc.curve.empty() ? std::string("-") : text::format_exact(lc.curve[i].success_rate));
        out += '\n';
    }
    return out;
}

}  // namespace pinforge
