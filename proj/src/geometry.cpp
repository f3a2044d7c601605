#include "pinforge/geometry.hpp"

#include "pinforge/error.hpp"
#include "pinforge/text_io.hpp"

#include <openssl/sha.h>

#include <cmath>
#include <numbers>

namespace pinforge {

Key parse_key(std::string_view symbol)
{
    symbol = text::trim(symbol);
    if (symbol.size() == 1 && symbol[0] >= '0' && symbol[0] <= '9')
        return digit_key(symbol[0] - '0');
    if (symbol == "ENTER")
        return Key::Enter;
    throw Error("unknown key symbol '" + std::string(symbol) + "'");
}

std::string key_symbol(Key k)
{
    if (k == Key::Enter)
        return "ENTER";
    return std::string(1, static_cast<char>('0' + key_index(k)));
}

KeypadLayout::KeypadLayout(std::string name, const KeyTable& keys, bool allow_degenerate)
    : name_(std::move(name)), keys_(keys)
{
    if (name_.empty() || name_.find_first_of(" \t\n,") != std::string::npos)
        throw Error("invalid layout name '" + name_ + "'");
    for (std::size_t i = 0; i < kKeyCount; ++i) {
        const auto& g = keys_[i];
        if (!std::isfinite(g.center_x) || !std::isfinite(g.center_y) || !std::isfinite(g.effective_width))
            throw Error("non-finite geometry for key " + key_symbol(static_cast<Key>(i)));
        if (!(g.effective_width > 0.0))
            throw Error("non-positive width for key " + key_symbol(static_cast<Key>(i)));
    }
    if (allow_degenerate)
        return;
    for (std::size_t i = 0; i < kKeyCount; ++i)
        for (std::size_t j = i + 1; j < kKeyCount; ++j)
            if (keys_[i].center_x == keys_[j].center_x && keys_[i].center_y == keys_[j].center_y)
                throw Error("degenerate layout: keys " + key_symbol(static_cast<Key>(i)) + " and "
                            + key_symbol(static_cast<Key>(j)) + " share a center");
}

KeypadLayout standard_numpad()
{
    constexpr double pitch = 0.75;
    constexpr double width = 0.5;
    KeypadLayout::KeyTable keys{};
    for (int d = 1; d <= 9; ++d) {
        const int col = (d - 1) % 3;
        const int row = (d - 1) / 3 + 1;
        keys[d] = {col * pitch, row * pitch, width};
    }
    // Double-width '0' under '1'/'2'; tall ENTER beside the '3' row and the '0' row.
    keys[0] = {0.5 * pitch, 0.0, width};
    keys[key_index(Key::Enter)] = {3.0 * pitch, 0.5 * pitch, width};
    return KeypadLayout("standard", keys);
}

KeypadLayout circular_layout(double radius, bool enter_at_center)
{
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw Error("circular layout needs a positive radius");
    constexpr double width = 0.5;
    KeypadLayout::KeyTable keys{};
    for (int d = 0; d <= 9; ++d) {
        const double angle = 2.0 * std::numbers::pi * d / 10.0;
        keys[d] = {radius * std::sin(angle), radius * std::cos(angle), width};
    }
    keys[key_index(Key::Enter)] = enter_at_center ? KeyGeometry{0.0, 0.0, width}
                                                  : KeyGeometry{0.0, -2.0 * radius, width};
    return KeypadLayout(enter_at_center ? "circular" : "circular-offset", keys);
}

std::optional<KeypadLayout> builtin_layout(std::string_view name)
{
    if (name == "standard")
        return standard_numpad();
    if (name == "circular")
        return circular_layout(1.0);
    return std::nullopt;
}

double key_distance(const KeypadLayout& layout, Key from, Key to)
{
    if (from == to)
        return 0.0;
    const auto& a = layout.key(from);
    const auto& b = layout.key(to);
    return std::hypot(b.center_x - a.center_x, b.center_y - a.center_y);
}

double index_of_difficulty(const KeypadLayout& layout, Key from, Key to)
{
    if (from == to)
        return 0.0;
    return std::log2(key_distance(layout, from, to) / layout.key(to).effective_width + 1.0);
}

KeypadLayout load_layout(std::string_view text, std::string_view fallback_name)
{
    std::string name(fallback_name);
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos)
            pos = text.size();
        auto line = text::trim(text.substr(start, pos - start));
        if (line.starts_with("# layout "))
            name = std::string(text::trim(line.substr(9)));
        start = pos + 1;
    }

    KeypadLayout::KeyTable keys{};
    std::array<bool, kKeyCount> seen{};
    for (auto line : text::data_lines(text)) {
        const auto fields = text::split(line);
        if (fields.size() != 4)
            throw Error("malformed layout line: '" + std::string(line) + "'");
        const Key k = parse_key(fields[0]);
        if (seen[key_index(k)])
            throw Error("duplicate key " + key_symbol(k));
        seen[key_index(k)] = true;
        const double width = text::parse_double(fields[3], "width");
        if (!(width > 0.0))
            throw Error("non-positive width for key " + key_symbol(k));
        keys[key_index(k)] = {text::parse_double(fields[1], "center_x"),
                              text::parse_double(fields[2], "center_y"), width};
    }
    for (std::size_t i = 0; i < kKeyCount; ++i)
        if (!seen[i])
            throw Error("incomplete layout: missing key " + key_symbol(static_cast<Key>(i)));
    return KeypadLayout(name, keys);
}

std::string save_layout(const KeypadLayout& layout)
{
    std::string out = "# layout " + layout.name() + "\n# key,center_x_in,center_y_in,width_in\n";
    for (std::size_t i = 0; i < kKeyCount; ++i) {
        const auto& g = layout.keys()[i];
        out += key_symbol(static_cast<Key>(i)) + "," + text::format_exact(g.center_x) + ","
            + text::format_exact(g.center_y) + "," + text::format_exact(g.effective_width) + "\n";
    }
    return out;
}

std::array<std::uint8_t, 32> layout_hash(const KeypadLayout& layout)
{
    const auto canonical = save_layout(layout);
    std::array<std::uint8_t, 32> digest{};
    SHA256(reinterpret_cast<const unsigned char*>(canonical.data()), canonical.size(), digest.data());
    return digest;
}

}  // namespace pinforge
