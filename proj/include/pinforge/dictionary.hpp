#pragma once

#include "pinforge/geometry.hpp"
#include "pinforge/model.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pinforge {

inline constexpr int kMaxPinLength = 10;

/// Number of PINs of the given length, 10^length.
std::uint64_t pin_space_size(int length);

/// A PIN of fixed length, stored as its numeric value; "007" is value 7
/// with length 3.
class Pin {
public:
    Pin(std::uint64_t value, int length);

    /// Parses a digit string such as "007"; the length is the string length.
    static Pin parse(std::string_view digits);

    std::uint64_t value() const { return value_; }
    int length() const { return length_; }
    /// Digit at 1-based position.
    int digit(int position) const;
    std::string str() const;

    bool operator==(const Pin&) const = default;
    auto operator<=>(const Pin&) const = default;

private:
    std::uint64_t value_;
    int length_;
};

/// Inter-keystroke intervals (ms) of one entry; the last interval ends on ENTER.
using TimingSequence = std::vector<double>;

/// Key order used to type a PIN.
///   standard:    d1 d2 ... dl ENTER                  -> l intervals
///   interleaved: d1 ENTER d2 ENTER ... dl ENTER ENTER ENTER -> 2l+1 intervals
///   interleaved_short: as interleaved with one final ENTER less -> 2l intervals
enum class EntryPattern : std::uint8_t { Standard, Interleaved, InterleavedShort };

std::string_view pattern_name(EntryPattern p);
EntryPattern parse_pattern(std::string_view name);
std::vector<Key> entry_keys(const Pin& pin, EntryPattern pattern);
std::size_t sequence_length(int pin_length, EntryPattern pattern);

/// Predicted interval for each consecutive key pair of an entry.
TimingSequence predict_sequence(const FittsModel& model, const KeypadLayout& layout, const Pin& pin,
                                EntryPattern pattern = EntryPattern::Standard);

struct DigitConstraint {
    int position = 1;  // 1-based
    int digit = 0;
};

/// Identifies the (model, layout, pattern) a dictionary was generated from.
/// The layout name is informational; equality uses the layout hash.
struct DictionaryFingerprint {
    FittsModel model;
    std::string layout_name;
    std::array<std::uint8_t, 32> layout_hash{};
    EntryPattern pattern = EntryPattern::Standard;

    bool operator==(const DictionaryFingerprint& o) const
    {
        return model == o.model && layout_hash == o.layout_hash && pattern == o.pattern;
    }
};

DictionaryFingerprint make_fingerprint(const FittsModel& model, const KeypadLayout& layout,
                                       EntryPattern pattern = EntryPattern::Standard);

/// Predicted timing sequences for a PIN space, in ascending PIN order.
/// A complete dictionary covers all 10^l PINs and stores them implicitly
/// by row index; a reduced one stores the PIN value of every row.
class TimingDictionary {
public:
    TimingDictionary(int pin_length, std::size_t dim, DictionaryFingerprint fingerprint,
                     std::vector<std::uint64_t> pins, std::vector<double> values, bool complete);

    int pin_length() const { return pin_length_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return values_.size() / dim_; }
    bool complete() const { return complete_; }
    const DictionaryFingerprint& fingerprint() const { return fingerprint_; }

    Pin pin_at(std::size_t row) const { return Pin(pin_value_at(row), pin_length_); }
    std::uint64_t pin_value_at(std::size_t row) const { return complete_ ? row : pins_[row]; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * dim_, dim_}; }
    std::span<const double> values() const { return values_; }

    std::optional<std::size_t> find(const Pin& pin) const;

    bool operator==(const TimingDictionary& o) const
    {
        return pin_length_ == o.pin_length_ && dim_ == o.dim_ && fingerprint_ == o.fingerprint_
            && complete_ == o.complete_ && pins_ == o.pins_ && values_ == o.values_;
    }

private:
    int pin_length_;
    std::size_t dim_;
    DictionaryFingerprint fingerprint_;
    std::vector<std::uint64_t> pins_;
    std::vector<double> values_;
    bool complete_;
};

TimingDictionary build_dictionary(const FittsModel& model, const KeypadLayout& layout, int pin_length,
                                  EntryPattern pattern = EntryPattern::Standard);

TimingDictionary reduce_dictionary(const TimingDictionary& dict, std::span<const DigitConstraint> constraints);

bool matches(const Pin& pin, std::span<const DigitConstraint> constraints);

/// Text format; `decimals < 0` writes shortest round-trip values instead of
/// fixed decimals.
std::string save_dictionary_text(const TimingDictionary& dict, int decimals = 4);
std::string save_dictionary_binary(const TimingDictionary& dict);
/// Detects the format from the leading bytes.
TimingDictionary load_dictionary(std::string_view bytes);

/// Empty when the dictionary was generated from this model and layout;
/// otherwise a human-readable warning.
std::optional<std::string> fingerprint_warning(const TimingDictionary& dict, const FittsModel& model,
                                               const KeypadLayout& layout);

}  // namespace pinforge
