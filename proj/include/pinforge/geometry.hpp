#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pinforge {

/// One of the eleven keys involved in PIN entry: the digits and ENTER.
enum class Key : std::uint8_t { D0 = 0, D1, D2, D3, D4, D5, D6, D7, D8, D9, Enter };

inline constexpr std::size_t kKeyCount = 11;

constexpr Key digit_key(int d) { return static_cast<Key>(d); }
constexpr std::size_t key_index(Key k) { return static_cast<std::size_t>(k); }
constexpr bool is_digit(Key k) { return k != Key::Enter; }

/// "0".."9" or "ENTER"; throws on anything else.
Key parse_key(std::string_view symbol);
std::string key_symbol(Key k);

struct KeyGeometry {
    double center_x = 0.0;  // inches
    double center_y = 0.0;  // inches
    double effective_width = 0.5;  // inches

    bool operator==(const KeyGeometry&) const = default;
};

/// Planar geometry of a PIN pad. Immutable once built; construction
/// validates that all eleven keys are present with positive widths and
/// distinct centers.
class KeypadLayout {
public:
    using KeyTable = std::array<KeyGeometry, kKeyCount>;

    KeypadLayout(std::string name, const KeyTable& keys, bool allow_degenerate = false);

    const std::string& name() const { return name_; }
    const KeyGeometry& key(Key k) const { return keys_[key_index(k)]; }
    const KeyTable& keys() const { return keys_; }

    bool operator==(const KeypadLayout&) const = default;

private:
    std::string name_;
    KeyTable keys_;
};

/// The 0.75-inch pitch numeric pad used throughout the experiments.
KeypadLayout standard_numpad();

/// Digits evenly spaced on a circle (digit 0 at 12 o'clock, clockwise),
/// ENTER at the center. With `enter_at_center == false` ENTER is placed
/// one radius below the circle instead.
KeypadLayout circular_layout(double radius, bool enter_at_center = true);

/// Looks up a layout by name: "standard" or "circular" (radius 1 inch).
std::optional<KeypadLayout> builtin_layout(std::string_view name);

double key_distance(const KeypadLayout& layout, Key from, Key to);

/// log2(D/W + 1) with W the target key's effective width; 0 for a repeated key.
double index_of_difficulty(const KeypadLayout& layout, Key from, Key to);

/// Parses the `key,center_x_in,center_y_in,width_in` layout format. The
/// layout name is taken from an optional `# layout <name>` comment line.
KeypadLayout load_layout(std::string_view text, std::string_view fallback_name = "custom");
std::string save_layout(const KeypadLayout& layout);

/// SHA-256 of the canonical saved form, used to fingerprint dictionaries.
std::array<std::uint8_t, 32> layout_hash(const KeypadLayout& layout);

}  // namespace pinforge
