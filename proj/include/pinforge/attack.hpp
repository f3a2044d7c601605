#pragma once

#include "pinforge/dictionary.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pinforge {

enum class Metric { Cosine, Euclidean, Pearson };

std::string_view metric_name(Metric m);
Metric parse_metric(std::string_view name);

double cosine_similarity(std::span<const double> a, std::span<const double> b);
/// Negated Euclidean distance, so that higher is better like the other metrics.
double euclidean_score(std::span<const double> a, std::span<const double> b);
/// Centered correlation; throws "undefined correlation" on a constant vector.
double pearson_score(std::span<const double> a, std::span<const double> b);
double similarity(Metric m, std::span<const double> a, std::span<const double> b);

/// Scores are snapped to a 1e-9 grid before ordering. Candidates whose
/// scores agree to that resolution are ties and fall back to ascending PIN
/// order, which keeps rankings stable under rounding noise from rescaling
/// or summation order.
double rank_key(double score);

struct RankedGuess {
    std::uint64_t pin = 0;
    double score = 0.0;  // grid-snapped, higher is better
    bool operator==(const RankedGuess&) const = default;
};

class RankedGuessList {
public:
    RankedGuessList(int pin_length, std::vector<RankedGuess> guesses);

    int pin_length() const { return pin_length_; }
    std::size_t size() const { return guesses_.size(); }
    const RankedGuess& operator[](std::size_t i) const { return guesses_[i]; }
    const std::vector<RankedGuess>& guesses() const { return guesses_; }
    Pin pin_at(std::size_t i) const { return Pin(guesses_[i].pin, pin_length_); }
    /// 1-based rank, if the PIN is in the list.
    std::optional<std::size_t> rank_of(const Pin& pin) const;

    bool operator==(const RankedGuessList&) const = default;

private:
    int pin_length_;
    std::vector<RankedGuess> guesses_;
};

/// Scores observations against one dictionary. Per-row norms are cached so
/// that scoring many observations costs one pass over the rows each.
class Ranker {
public:
    Ranker(const TimingDictionary& dict, Metric metric);

    const TimingDictionary& dictionary() const { return dict_; }
    Metric metric() const { return metric_; }

    /// Raw score of dictionary row `row` against the observation.
    double score(std::size_t row, std::span<const double> observed) const;

    RankedGuessList rank(std::span<const double> observed) const;

    struct Placement {
        std::size_t rank = 0;  // 1-based
        double score = 0.0;  // grid-snapped
    };
    /// Rank of one PIN without sorting the whole dictionary; agrees with
    /// rank(observed).rank_of(pin).
    std::optional<Placement> place(std::span<const double> observed, const Pin& pin) const;

private:
    struct Prepared {
        double mean = 0.0;
        double sumsq = 0.0;
        double centered_sumsq = 0.0;
    };
    Prepared prepare(std::span<const double> observed) const;
    double score_prepared(std::size_t row, std::span<const double> observed, const Prepared& obs) const;

    const TimingDictionary& dict_;
    Metric metric_;
    std::vector<double> row_sumsq_;
    std::vector<double> row_mean_;
    std::vector<double> row_centered_sumsq_;
};

RankedGuessList rank_candidates(const TimingDictionary& dict, std::span<const double> observed,
                                Metric metric = Metric::Cosine);

/// Speed-normalizes k entries to their mean total duration, then averages
/// them elementwise.
TimingSequence average_entries(std::span<const TimingSequence> entries);

/// Success probability of random guessing within x attempts when k of the l
/// digits are known: x / 10^(l-k).
double random_baseline(int pin_length, int known_digits, std::uint64_t attempts);

struct ObservedEntry {
    std::string case_id;
    std::string subject_id;
    std::optional<Pin> true_pin;
    TimingSequence sequence;

    bool operator==(const ObservedEntry&) const = default;
};

struct AttackOutcome {
    std::string case_id;
    std::optional<Pin> true_pin;
    std::size_t rank = 0;  // 1-based; 0 when the true PIN is unknown or excluded
    double score = 0.0;  // score of the true PIN, or of the top guess when unknown
    std::size_t dictionary_size = 0;
    std::optional<Pin> top_guess;
    std::string flag;  // non-empty for non-fatal problems

    bool operator==(const AttackOutcome&) const = default;
};

struct AttackMode {
    enum class Kind { General, MultiEntry, KnownDigits };
    Kind kind = Kind::General;
    std::size_t group_size = 1;  // multi-entry k
    std::vector<DigitConstraint> constraints;  // known-digits

    static AttackMode general() { return {}; }
    static AttackMode multi_entry(std::size_t k) { return {Kind::MultiEntry, k, {}}; }
    static AttackMode known_digits(std::vector<DigitConstraint> c) { return {Kind::KnownDigits, 1, std::move(c)}; }
};

/// Multi-entry groups are formed per (subject, true PIN) in input order, as
/// consecutive runs of k entries; a trailing run shorter than k is dropped.
std::vector<AttackOutcome> run_attack(const TimingDictionary& dict, std::span<const ObservedEntry> entries,
                                      const AttackMode& mode, Metric metric = Metric::Cosine);

struct CurvePoint {
    std::uint64_t x = 0;
    double success_rate = 0.0;

    bool operator==(const CurvePoint&) const = default;
};

/// Fraction of outcomes whose true PIN ranks within the top x.
std::vector<CurvePoint> success_curve(std::span<const AttackOutcome> outcomes, std::span<const std::uint64_t> xs);

// File formats.
std::vector<ObservedEntry> parse_observed_entries(std::string_view text);
std::string format_observed_entries(std::span<const ObservedEntry> entries);
std::string format_outcomes(std::span<const AttackOutcome> outcomes);
std::vector<AttackOutcome> parse_outcomes(std::string_view text);
std::string format_curve(std::span<const CurvePoint> curve);

}  // namespace pinforge
