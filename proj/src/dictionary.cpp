#include "pinforge/dictionary.hpp"

#include "pinforge/error.hpp"
#include "pinforge/parallel.hpp"
#include "pinforge/text_io.hpp"

#include <bit>
#include <cstring>
#include <new>

namespace pinforge {

std::uint64_t pin_space_size(int length)
{
    if (length < 1 || length > kMaxPinLength)
        throw Error("PIN length out of range [1, 10]: " + std::to_string(length));
    std::uint64_t n = 1;
    for (int i = 0; i < length; ++i)
        n *= 10;
    return n;
}

Pin::Pin(std::uint64_t value, int length) : value_(value), length_(length)
{
    if (value >= pin_space_size(length))
        throw Error("PIN value " + std::to_string(value) + " does not fit in " + std::to_string(length) + " digits");
}

Pin Pin::parse(std::string_view digits)
{
    digits = text::trim(digits);
    if (digits.empty() || digits.size() > static_cast<std::size_t>(kMaxPinLength))
        throw Error("invalid PIN '" + std::string(digits) + "'");
    std::uint64_t v = 0;
    for (char c : digits) {
        if (c < '0' || c > '9')
            throw Error("invalid PIN '" + std::string(digits) + "'");
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return Pin(v, static_cast<int>(digits.size()));
}

int Pin::digit(int position) const
{
    if (position < 1 || position > length_)
        throw Error("digit position out of range");
    std::uint64_t v = value_;
    for (int i = length_; i > position; --i)
        v /= 10;
    return static_cast<int>(v % 10);
}

std::string Pin::str() const
{
    std::string s(static_cast<std::size_t>(length_), '0');
    std::uint64_t v = value_;
    for (int i = length_ - 1; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = static_cast<char>('0' + v % 10);
        v /= 10;
    }
    return s;
}

std::string_view pattern_name(EntryPattern p)
{
    switch (p) {
    case EntryPattern::Standard: return "standard";
    case EntryPattern::Interleaved: return "interleaved";
    case EntryPattern::InterleavedShort: return "interleaved-short";
    }
    return "standard";
}

EntryPattern parse_pattern(std::string_view name)
{
    if (name == "standard")
        return EntryPattern::Standard;
    if (name == "interleaved")
        return EntryPattern::Interleaved;
    if (name == "interleaved-short")
        return EntryPattern::InterleavedShort;
    throw Error("unknown entry pattern '" + std::string(name) + "'");
}

std::size_t sequence_length(int pin_length, EntryPattern pattern)
{
    const auto l = static_cast<std::size_t>(pin_length);
    switch (pattern) {
    case EntryPattern::Standard: return l;
    case EntryPattern::Interleaved: return 2 * l + 1;
    case EntryPattern::InterleavedShort: return 2 * l;
    }
    return l;
}

std::vector<Key> entry_keys(const Pin& pin, EntryPattern pattern)
{
    std::vector<Key> keys;
    for (int p = 1; p <= pin.length(); ++p) {
        keys.push_back(digit_key(pin.digit(p)));
        if (pattern != EntryPattern::Standard)
            keys.push_back(Key::Enter);
    }
    keys.push_back(Key::Enter);
    if (pattern == EntryPattern::Interleaved)
        keys.push_back(Key::Enter);
    return keys;
}

TimingSequence predict_sequence(const FittsModel& model, const KeypadLayout& layout, const Pin& pin,
                                EntryPattern pattern)
{
    const auto keys = entry_keys(pin, pattern);
    TimingSequence out;
    out.reserve(keys.size() - 1);
    for (std::size_t i = 0; i + 1 < keys.size(); ++i)
        out.push_back(predict_interkey(model, layout, keys[i], keys[i + 1]));
    return out;
}

DictionaryFingerprint make_fingerprint(const FittsModel& model, const KeypadLayout& layout, EntryPattern pattern)
{
    return {model, layout.name(), layout_hash(layout), pattern};
}

TimingDictionary::TimingDictionary(int pin_length, std::size_t dim, DictionaryFingerprint fingerprint,
                                   std::vector<std::uint64_t> pins, std::vector<double> values, bool complete)
    : pin_length_(pin_length), dim_(dim), fingerprint_(std::move(fingerprint)), pins_(std::move(pins)),
      values_(std::move(values)), complete_(complete)
{
    const auto space = pin_space_size(pin_length_);
    if (dim_ != sequence_length(pin_length_, fingerprint_.pattern))
        throw Error("sequence dimension does not match PIN length and entry pattern");
    if (values_.size() % dim_ != 0)
        throw Error("dictionary value count is not a multiple of the sequence dimension");
    if (complete_) {
        if (!pins_.empty() || size() != space)
            throw Error("complete dictionary must hold exactly 10^l implicit rows");
        return;
    }
    if (pins_.size() != size())
        throw Error("reduced dictionary needs one PIN per row");
    for (std::size_t i = 0; i < pins_.size(); ++i) {
        if (pins_[i] >= space)
            throw Error("PIN index out of range in dictionary");
        if (i > 0 && pins_[i] <= pins_[i - 1])
            throw Error("dictionary PINs must be strictly ascending");
    }
}

std::optional<std::size_t> TimingDictionary::find(const Pin& pin) const
{
    if (pin.length() != pin_length_)
        return std::nullopt;
    if (complete_)
        return static_cast<std::size_t>(pin.value());
    auto it = std::lower_bound(pins_.begin(), pins_.end(), pin.value());
    if (it == pins_.end() || *it != pin.value())
        return std::nullopt;
    return static_cast<std::size_t>(it - pins_.begin());
}

TimingDictionary build_dictionary(const FittsModel& model, const KeypadLayout& layout, int pin_length,
                                  EntryPattern pattern)
{
    validate(model);
    const auto count = pin_space_size(pin_length);
    const auto dim = sequence_length(pin_length, pattern);

    std::array<std::array<double, kKeyCount>, kKeyCount> table{};
    for (std::size_t i = 0; i < kKeyCount; ++i)
        for (std::size_t j = 0; j < kKeyCount; ++j)
            table[i][j] = predict_interkey(model, layout, static_cast<Key>(i), static_cast<Key>(j));

    std::vector<double> values;
    try {
        values.resize(count * dim);
    } catch (const std::bad_alloc&) {
        throw Error("dictionary for length " + std::to_string(pin_length) + " does not fit in memory");
    }

    parallel_for(count, [&](std::size_t begin, std::size_t end) {
        std::array<std::size_t, 2 * kMaxPinLength + 2> keys{};
        const auto l = static_cast<std::size_t>(pin_length);
        for (std::size_t pin = begin; pin < end; ++pin) {
            std::size_t v = pin;
            std::array<std::size_t, kMaxPinLength> digits{};
            for (std::size_t i = l; i-- > 0;) {
                digits[i] = v % 10;
                v /= 10;
            }
            std::size_t n = 0;
            for (std::size_t i = 0; i < l; ++i) {
                keys[n++] = digits[i];
                if (pattern != EntryPattern::Standard)
                    keys[n++] = key_index(Key::Enter);
            }
            keys[n++] = key_index(Key::Enter);
            if (pattern == EntryPattern::Interleaved)
                keys[n++] = key_index(Key::Enter);
            double* out = values.data() + pin * dim;
            for (std::size_t i = 0; i + 1 < n; ++i)
                out[i] = table[keys[i]][keys[i + 1]];
        }
    }, 4096);

    return TimingDictionary(pin_length, dim, make_fingerprint(model, layout, pattern), {}, std::move(values), true);
}

bool matches(const Pin& pin, std::span<const DigitConstraint> constraints)
{
    for (const auto& c : constraints)
        if (pin.digit(c.position) != c.digit)
            return false;
    return true;
}

TimingDictionary reduce_dictionary(const TimingDictionary& dict, std::span<const DigitConstraint> constraints)
{
    std::array<bool, kMaxPinLength + 1> used{};
    for (const auto& c : constraints) {
        if (c.position < 1 || c.position > dict.pin_length())
            throw Error("constraint position " + std::to_string(c.position) + " out of range");
        if (c.digit < 0 || c.digit > 9)
            throw Error("constraint digit out of range");
        if (used[static_cast<std::size_t>(c.position)])
            throw Error("duplicate constraint position " + std::to_string(c.position));
        used[static_cast<std::size_t>(c.position)] = true;
    }
    if (constraints.empty())
        return dict;

    std::vector<std::uint64_t> pins;
    std::vector<double> values;
    for (std::size_t r = 0; r < dict.size(); ++r) {
        const auto pin = dict.pin_at(r);
        if (!matches(pin, constraints))
            continue;
        pins.push_back(pin.value());
        const auto row = dict.row(r);
        values.insert(values.end(), row.begin(), row.end());
    }
    return TimingDictionary(dict.pin_length(), dict.dim(), dict.fingerprint(), std::move(pins), std::move(values),
                            false);
}

namespace {

constexpr std::string_view kTextTag = "# pinforge-dict v1";
constexpr std::string_view kMagic = "PFDICT01";

std::string hex(const std::array<std::uint8_t, 32>& bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (auto b : bytes) {
        s += digits[b >> 4];
        s += digits[b & 0xf];
    }
    return s;
}

std::array<std::uint8_t, 32> unhex(std::string_view s)
{
    if (s.size() != 64)
        throw Error("malformed layout hash in dictionary header");
    std::array<std::uint8_t, 32> out{};
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw Error("malformed layout hash in dictionary header");
    };
    for (std::size_t i = 0; i < 32; ++i)
        out[i] = static_cast<std::uint8_t>(nibble(s[2 * i]) * 16 + nibble(s[2 * i + 1]));
    return out;
}

template <class T>
void put(std::string& out, T v)
{
    static_assert(std::endian::native == std::endian::little, "binary dictionary I/O assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <class T>
    T get()
    {
        if (bytes_.size() - pos_ < sizeof(T))
            throw Error("unexpected end of dictionary");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

TimingDictionary load_text(std::string_view text)
{
    const auto eol = text.find('\n');
    const auto header = text::trim(text.substr(0, eol));
    if (!header.starts_with(kTextTag))
        throw Error("missing dictionary header");

    int length = 0;
    DictionaryFingerprint fp;
    bool have_a = false, have_b = false, have_hash = false;
    for (auto token : text::split(header.substr(kTextTag.size()), ' ')) {
        if (token.empty())
            continue;
        const auto eq = token.find('=');
        if (eq == std::string_view::npos)
            throw Error("malformed dictionary header token '" + std::string(token) + "'");
        const auto key = token.substr(0, eq);
        const auto val = token.substr(eq + 1);
        if (key == "length") {
            length = static_cast<int>(text::parse_uint(val, "length"));
        } else if (key == "a") {
            fp.model.a = text::parse_double(val, "a");
            have_a = true;
        } else if (key == "b") {
            fp.model.b = text::parse_double(val, "b");
            have_b = true;
        } else if (key == "layout") {
            fp.layout_name = std::string(val);
        } else if (key == "hash") {
            fp.layout_hash = unhex(val);
            have_hash = true;
        } else if (key == "pattern") {
            fp.pattern = parse_pattern(val);
        }
    }
    if (!have_a || !have_b || length < 1 || length > kMaxPinLength)
        throw Error("incomplete dictionary header");
    if (!have_hash) {
        // Headers without a hash refer to a built-in layout by name.
        if (auto layout = builtin_layout(fp.layout_name))
            fp.layout_hash = layout_hash(*layout);
    }

    const auto dim = sequence_length(length, fp.pattern);
    std::vector<std::uint64_t> pins;
    std::vector<double> values;
    for (auto line : text::data_lines(text.substr(eol == std::string_view::npos ? text.size() : eol))) {
        const auto fields = text::split(line);
        if (fields.size() != dim + 1)
            throw Error("malformed dictionary record: '" + std::string(line) + "'");
        const auto pin = Pin::parse(fields[0]);
        if (pin.length() != length)
            throw Error("dictionary record PIN length mismatch: '" + std::string(fields[0]) + "'");
        if (!pins.empty() && pin.value() <= pins.back())
            throw Error("dictionary records are not in ascending PIN order");
        pins.push_back(pin.value());
        for (std::size_t i = 1; i <= dim; ++i)
            values.push_back(text::parse_double(fields[i], "interval"));
    }
    const bool complete = pins.size() == pin_space_size(length);
    if (complete)
        pins.clear();
    return TimingDictionary(length, dim, std::move(fp), std::move(pins), std::move(values), complete);
}

TimingDictionary load_binary(std::string_view bytes)
{
    Reader in(bytes.substr(kMagic.size()));
    const int length = in.get<std::uint8_t>();
    if (length < 1 || length > kMaxPinLength)
        throw Error("invalid PIN length in binary dictionary");
    const auto count = in.get<std::uint64_t>();
    DictionaryFingerprint fp;
    fp.model.a = in.get<double>();
    fp.model.b = in.get<double>();
    for (auto& byte : fp.layout_hash)
        byte = in.get<std::uint8_t>();

    const auto space = pin_space_size(length);
    if (count > space)
        throw Error("binary dictionary count exceeds the PIN space");
    const bool complete = count == space;
    const auto dim = static_cast<std::size_t>(length);
    if (bytes.size() < kMagic.size() + 1 + 8 + 16 + 32
            + count * (dim * sizeof(double) + (complete ? 0 : sizeof(std::uint32_t))))
        throw Error("unexpected end of dictionary");

    std::vector<std::uint64_t> pins;
    std::vector<double> values;
    values.reserve(count * dim);
    if (!complete)
        pins.reserve(count);
    for (std::uint64_t r = 0; r < count; ++r) {
        if (!complete)
            pins.push_back(in.get<std::uint32_t>());
        for (std::size_t i = 0; i < dim; ++i)
            values.push_back(in.get<double>());
    }
    if (!in.done())
        throw Error("trailing bytes after dictionary");
    return TimingDictionary(length, dim, std::move(fp), std::move(pins), std::move(values), complete);
}

}  // namespace

std::string save_dictionary_text(const TimingDictionary& dict, int decimals)
{
    const auto& fp = dict.fingerprint();
    std::string out;
    out.reserve(dict.size() * (dict.dim() * 10 + 12) + 200);
    out += kTextTag;
    out += " length=" + std::to_string(dict.pin_length()) + " a=" + text::format_exact(fp.model.a)
        + " b=" + text::format_exact(fp.model.b) + " layout=" + (fp.layout_name.empty() ? "unknown" : fp.layout_name)
        + " hash=" + hex(fp.layout_hash);
    if (fp.pattern != EntryPattern::Standard)
        out += " pattern=" + std::string(pattern_name(fp.pattern));
    out += '\n';
    for (std::size_t r = 0; r < dict.size(); ++r) {
        out += dict.pin_at(r).str();
        for (double v : dict.row(r)) {
            out += ',';
            out += decimals < 0 ? text::format_exact(v) : text::format_fixed(v, decimals);
        }
        out += '\n';
    }
    return out;
}

std::string save_dictionary_binary(const TimingDictionary& dict)
{
    if (dict.fingerprint().pattern != EntryPattern::Standard)
        throw Error("binary dictionaries support only the standard entry pattern");
    if (!dict.complete() && dict.pin_length() > 9)
        throw Error("reduced binary dictionaries support PIN lengths up to 9");
    std::string out(kMagic);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(dict.pin_length()));
    put<std::uint64_t>(out, dict.size());
    put<double>(out, dict.fingerprint().model.a);
    put<double>(out, dict.fingerprint().model.b);
    for (auto byte : dict.fingerprint().layout_hash)
        put<std::uint8_t>(out, byte);
    for (std::size_t r = 0; r < dict.size(); ++r) {
        if (!dict.complete())
            put<std::uint32_t>(out, static_cast<std::uint32_t>(dict.pin_value_at(r)));
        for (double v : dict.row(r))
            put<double>(out, v);
    }
    return out;
}

TimingDictionary load_dictionary(std::string_view bytes)
{
    if (bytes.starts_with(kMagic))
        return load_binary(bytes);
    if (bytes.starts_with(kTextTag))
        return load_text(bytes);
    throw Error("unrecognized dictionary format");
}

std::optional<std::string> fingerprint_warning(const TimingDictionary& dict, const FittsModel& model,
                                               const KeypadLayout& layout)
{
    const auto& fp = dict.fingerprint();
    if (fp.model != model)
        return "dictionary was built with a=" + text::format_exact(fp.model.a) + " b=" + text::format_exact(fp.model.b)
            + ", not a=" + text::format_exact(model.a) + " b=" + text::format_exact(model.b);
    if (fp.layout_hash != layout_hash(layout))
        return "dictionary was built for a different layout than '" + layout.name() + "'";
    return std::nullopt;
}

}  // namespace pinforge
