#include "pinforge/error.hpp"
#include "pinforge/geometry.hpp"
#include "pinforge/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace pinforge;

namespace {

Key k(const char* s) { return parse_key(s); }

std::string replace_line(std::string text, const std::string& prefix, const std::string& replacement)
{
    const auto pos = text.find("\n" + prefix);
    REQUIRE(pos != std::string::npos);
    const auto end = text.find('\n', pos + 1);
    text.replace(pos + 1, end - pos - 1, replacement);
    return text;
}

KeypadLayout random_layout(Rng& rng)
{
    KeypadLayout::KeyTable t;
    for (auto& g : t)
        g = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(0.1, 1.5)};
    return KeypadLayout("random", t);
}

}  // namespace

TEST_CASE("key symbols")
{
    CHECK(parse_key("0") == Key::D0);
    CHECK(parse_key("9") == Key::D9);
    CHECK(parse_key("ENTER") == Key::Enter);
    CHECK(key_symbol(Key::Enter) == "ENTER");
    CHECK_THROWS_AS(parse_key("10"), Error);
    CHECK_THROWS_AS(parse_key("A"), Error);
    CHECK_THROWS_AS(parse_key(""), Error);
    CHECK_THROWS_AS(parse_key("enter "), Error);
}

TEST_CASE("standard numpad")
{
    const auto L = standard_numpad();
    for (const auto& g : L.keys())
        CHECK(g.effective_width == 0.5);

    CHECK(key_distance(L, k("2"), k("2")) == 0.0);
    CHECK(key_distance(L, k("5"), k("0")) == doctest::Approx(std::sqrt(0.375 * 0.375 + 1.5 * 1.5)).epsilon(1e-15));
    CHECK(key_distance(L, k("5"), k("0")) == doctest::Approx(1.546165).epsilon(1e-6));
    CHECK(key_distance(L, k("4"), k("3")) == doctest::Approx(1.677051).epsilon(1e-6));
    CHECK(key_distance(L, k("3"), k("1")) == 1.5);

    CHECK(index_of_difficulty(L, k("3"), k("1")) == 2.0);
    CHECK(index_of_difficulty(L, k("9"), k("9")) == 0.0);
    CHECK(index_of_difficulty(L, k("6"), Key::Enter) == doctest::Approx(std::log2(1.352082 / 0.5 + 1.0)).epsilon(1e-6));
    CHECK(index_of_difficulty(L, k("6"), Key::Enter) == doctest::Approx(1.889150).epsilon(1e-6));
    CHECK(key_distance(L, k("6"), Key::Enter) == doctest::Approx(1.352082).epsilon(1e-6));
}

TEST_CASE("circular layout")
{
    const auto L = circular_layout(1.0);
    for (int d = 0; d < 10; ++d)
        CHECK(std::abs(key_distance(L, digit_key(d), Key::Enter) - 1.0) < 1e-12);
    CHECK(key_distance(L, k("0"), k("5")) == doctest::Approx(2.0).epsilon(1e-15));

    // Digit 0 at 12 o'clock, digits advancing clockwise.
    CHECK(L.key(Key::D0).center_x == doctest::Approx(0.0));
    CHECK(L.key(Key::D0).center_y == doctest::Approx(1.0));
    CHECK(L.key(Key::D1).center_x > 0.0);

    for (double r : {0.3, 2.5, 17.0}) {
        const auto C = circular_layout(r);
        for (int d = 0; d < 10; ++d)
            CHECK(std::abs(key_distance(C, digit_key(d), Key::Enter) - r) < 1e-12);
    }
    CHECK_THROWS_AS(circular_layout(0.0), Error);
    CHECK_THROWS_AS(circular_layout(-1.0), Error);
}

TEST_CASE("layout validation")
{
    auto t = standard_numpad().keys();
    t[3].effective_width = 0.0;
    CHECK_THROWS_WITH_AS(KeypadLayout("x", t), doctest::Contains("non-positive width"), Error);

    t = standard_numpad().keys();
    t[4].center_x = t[5].center_x;
    t[4].center_y = t[5].center_y;
    CHECK_THROWS_WITH_AS(KeypadLayout("x", t), doctest::Contains("degenerate"), Error);
    CHECK_NOTHROW(KeypadLayout("x", t, true));

    t = standard_numpad().keys();
    t[0].center_x = NAN;
    CHECK_THROWS_AS(KeypadLayout("x", t), Error);
}

TEST_CASE("layout file round trip")
{
    const auto std_text = save_layout(standard_numpad());
    CHECK(load_layout(std_text) == standard_numpad());
    CHECK(load_layout(save_layout(circular_layout(1.7))) == circular_layout(1.7));

    SUBCASE("missing ENTER")
    {
        const auto text = replace_line(std_text, "ENTER,", "# dropped");
        CHECK_THROWS_WITH_AS(load_layout(text), doctest::Contains("incomplete layout"), Error);
    }
    SUBCASE("zero width")
    {
        const auto text = replace_line(std_text, "5,", "5,0.75,1.5,0");
        CHECK_THROWS_WITH_AS(load_layout(text), doctest::Contains("non-positive width"), Error);
    }
    SUBCASE("duplicate key")
    {
        CHECK_THROWS_WITH_AS(load_layout(std_text + "5,9,9,0.5\n"), doctest::Contains("duplicate key"), Error);
    }
    SUBCASE("malformed line")
    {
        CHECK_THROWS_WITH_AS(load_layout(std_text + "7,1,2\n"), doctest::Contains("malformed"), Error);
        const auto text = replace_line(std_text, "5,", "5,0.75,abc,0.5");
        CHECK_THROWS_WITH_AS(load_layout(text), doctest::Contains("malformed"), Error);
    }
    SUBCASE("comments and blank lines")
    {
        CHECK(load_layout("# hello\n\n" + std_text + "\n# trailing\n") == standard_numpad());
    }
}

TEST_CASE("layout hash distinguishes geometry")
{
    CHECK(layout_hash(standard_numpad()) == layout_hash(standard_numpad()));
    CHECK(layout_hash(standard_numpad()) != layout_hash(circular_layout(1.0)));
    CHECK(layout_hash(circular_layout(1.0)) != layout_hash(circular_layout(1.0 + 1e-12)));
}

TEST_CASE("distance properties over random layouts")
{
    Rng rng(20240611);
    for (int trial = 0; trial < 200; ++trial) {
        const auto L = random_layout(rng);
        for (std::size_t i = 0; i < kKeyCount; ++i) {
            const auto a = static_cast<Key>(i);
            CHECK(key_distance(L, a, a) == 0.0);
            for (std::size_t j = 0; j < kKeyCount; ++j) {
                const auto b = static_cast<Key>(j);
                CHECK(key_distance(L, a, b) == key_distance(L, b, a));
                for (std::size_t m = 0; m < kKeyCount; ++m) {
                    const auto c = static_cast<Key>(m);
                    CHECK(key_distance(L, a, c) <= key_distance(L, a, b) + key_distance(L, b, c) + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("index of difficulty increases with distance")
{
    double prev = 0.0;
    for (int step = 1; step <= 400; ++step) {
        auto t = standard_numpad().keys();
        t[key_index(Key::D9)] = {0.0, 0.0, 0.5};
        t[key_index(Key::D1)] = {0.01 * step, 0.0, 0.5};
        t[key_index(Key::D2)] = {100.0, 100.0, 0.5};
        t[key_index(Key::D3)] = {-100.0, 100.0, 0.5};
        const KeypadLayout L("sweep", t);
        const double id = index_of_difficulty(L, Key::D9, Key::D1);
        CHECK(id > prev);
        CHECK(id == doctest::Approx(std::log2(0.01 * step / 0.5 + 1.0)).epsilon(1e-14));
        prev = id;
    }
}

TEST_CASE("target key width is used")
{
    auto t = standard_numpad().keys();
    t[key_index(Key::D1)].effective_width = 1.5;
    const KeypadLayout L("wide1", t);
    CHECK(index_of_difficulty(L, Key::D3, Key::D1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(index_of_difficulty(L, Key::D1, Key::D3) == doctest::Approx(2.0).epsilon(1e-15));
}
