#include "pinforge/simulator.hpp"

#include "pinforge/error.hpp"
#include "pinforge/rng.hpp"
#include "pinforge/text_io.hpp"

#include <algorithm>
#include <cmath>

namespace pinforge {

void validate(const TypistProfile& p)
{
    if (!std::isfinite(p.speed_scale) || !(p.speed_scale > 0.0))
        throw Error("typist speed_scale must be positive");
    if (!std::isfinite(p.noise_sd) || p.noise_sd < 0.0)
        throw Error("typist noise_sd must be non-negative");
    if (!std::isfinite(p.quantization) || p.quantization < 0.0)
        throw Error("typist quantization must be non-negative");
    if (!std::isfinite(p.min_interval) || !(p.min_interval > 0.0))
        throw Error("typist min_interval must be positive");
}

TimingSequence truth_sequence(const GroundTruth& truth, const Pin& pin)
{
    if (const auto* fitts = std::get_if<FittsModel>(&truth.model))
        return predict_sequence(*fitts, truth.layout, pin, truth.pattern);

    const auto& ext = std::get<ExtendedModel>(truth.model);
    if (truth.pattern != EntryPattern::Standard)
        throw Error("the extended model is defined only for the standard entry pattern");
    const auto keys = entry_keys(pin, truth.pattern);
    TimingSequence out;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i)
        out.push_back(predict_interkey(ext, truth.layout, keys[i], keys[i + 1], static_cast<int>(i + 1),
                                       pin.length()));
    return out;
}

double quantize(double value, double grid)
{
    if (grid <= 0.0)
        return value;
    return std::floor(value / grid + 0.5) * grid;
}

TimingSequence simulate_entry(const GroundTruth& truth, const Pin& pin, const TypistProfile& profile,
                              std::uint64_t entry_index)
{
    validate(profile);
    auto seq = truth_sequence(truth, pin);
    Rng rng(derive_seed(profile.seed, {static_cast<std::uint64_t>(pin.length()), pin.value(), entry_index}));
    for (double& v : seq) {
        double t = profile.speed_scale * v;
        if (profile.noise_sd > 0.0)
            t += profile.noise_sd * rng.normal();
        v = std::max(quantize(t, profile.quantization), profile.min_interval);
    }
    return seq;
}

std::vector<ObservedEntry> simulate_cohort(const GroundTruth& truth, std::span<const Pin> pins,
                                           std::span<const TypistProfile> profiles, std::size_t entries_per_pin)
{
    if (pins.empty() || profiles.empty())
        throw Error("cohort needs at least one PIN and one profile");
    if (entries_per_pin < 1)
        throw Error("cohort needs at least one entry per PIN");
    std::vector<ObservedEntry> out;
    out.reserve(pins.size() * profiles.size() * entries_per_pin);
    for (std::size_t p = 0; p < profiles.size(); ++p) {
        const auto subject = "s" + std::to_string(p);
        for (const auto& pin : pins)
            for (std::size_t e = 0; e < entries_per_pin; ++e)
                out.push_back({subject + "-" + pin.str() + "-" + std::to_string(e), subject, pin,
                               simulate_entry(truth, pin, profiles[p], e)});
    }
    return out;
}

std::string export_keystroke_log(std::span<const ObservedEntry> cohort, EntryPattern pattern)
{
    std::string out = "# session_id,key,key_down_ms\n";
    for (const auto& e : cohort) {
        if (!e.true_pin)
            throw Error("cannot export case " + e.case_id + " without its PIN");
        const auto keys = entry_keys(*e.true_pin, pattern);
        if (keys.size() != e.sequence.size() + 1)
            throw Error("case " + e.case_id + " has " + std::to_string(e.sequence.size())
                        + " intervals, entry pattern needs " + std::to_string(keys.size() - 1));
        const auto session = e.subject_id + "/" + e.case_id;
        double t = 0.0;
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (i > 0)
                t += e.sequence[i - 1];
            out += session + "," + key_symbol(keys[i]) + "," + text::format_exact(t) + "\n";
        }
    }
    return out;
}

std::vector<ObservedEntry> entries_from_keystroke_log(std::string_view text)
{
    std::vector<ObservedEntry> out;
    for (const auto& s : parse_keystroke_log(text)) {
        ObservedEntry e;
        const auto slash = s.id.find('/');
        e.subject_id = slash == std::string::npos ? s.id : s.id.substr(0, slash);
        e.case_id = slash == std::string::npos ? s.id : s.id.substr(slash + 1);
        std::string digits;
        for (auto k : s.keys)
            if (is_digit(k))
                digits += key_symbol(k);
        if (!digits.empty())
            e.true_pin = Pin::parse(digits);
        for (const auto& sample : session_samples(s))
            e.sequence.push_back(sample.observed_dt);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace pinforge
