#include "pinforge/attack.hpp"
#include "pinforge/error.hpp"
#include "pinforge/rng.hpp"
#include "pinforge/simulator.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace pinforge;

namespace {

const FittsModel kPaper{135.9120, 47.7334};

double naive_score(Metric m, std::span<const double> a, std::span<const double> b)
{
    const std::size_t n = a.size();
    switch (m) {
    case Metric::Cosine: {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        return dot / std::sqrt(na * nb);
    }
    case Metric::Euclidean: {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i)
            s += (a[i] - b[i]) * (a[i] - b[i]);
        return -std::sqrt(s);
    }
    case Metric::Pearson: {
        const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
        const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
        double c = 0, va = 0, vb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            c += (a[i] - ma) * (b[i] - mb);
            va += (a[i] - ma) * (a[i] - ma);
            vb += (b[i] - mb) * (b[i] - mb);
        }
        return c / std::sqrt(va * vb);
    }
    }
    return 0;
}

TimingSequence random_sequence(Rng& rng, std::size_t dim)
{
    TimingSequence v(dim);
    for (auto& x : v)
        x = rng.uniform(80.0, 400.0);
    return v;
}

}  // namespace

TEST_CASE("cosine similarity")
{
    const TimingSequence v{232.95, 199.01, 135.91, 244.28};
    CHECK(cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-15));
    TimingSequence scaled = v;
    for (auto& x : scaled)
        x *= 2.5;
    CHECK(cosine_similarity(v, scaled) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(TimingSequence{1, 100}, TimingSequence{100, 1}) == doctest::Approx(200.0 / 10001.0));
    CHECK(cosine_similarity(TimingSequence{1, 100}, TimingSequence{100, 1}) == doctest::Approx(0.019998).epsilon(1e-5));
    CHECK_THROWS_WITH_AS(cosine_similarity(v, TimingSequence{1, 2}), doctest::Contains("dimension mismatch"), Error);

    Rng rng(1);
    for (int i = 0; i < 500; ++i) {
        const auto a = random_sequence(rng, 6), b = random_sequence(rng, 6);
        const double c = cosine_similarity(a, b);
        CHECK(c > 0.0);
        CHECK(c <= 1.0);
        CHECK(c == cosine_similarity(b, a));
    }
}

TEST_CASE("euclidean and pearson")
{
    const TimingSequence v{232.95, 199.01, 135.91, 244.28};
    CHECK(euclidean_score(v, v) == 0.0);
    CHECK(euclidean_score(v, TimingSequence{232.95, 199.01, 135.91, 247.28}) == doctest::Approx(-3.0));
    TimingSequence affine = v;
    for (auto& x : affine)
        x = 3.0 * x + 17.0;
    CHECK(pearson_score(v, affine) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_WITH_AS(pearson_score(v, TimingSequence{5, 5, 5, 5}), doctest::Contains("undefined correlation"), Error);
    CHECK_THROWS_AS(euclidean_score(v, TimingSequence{1}), Error);
    CHECK(parse_metric("pearson") == Metric::Pearson);
    CHECK_THROWS_AS(parse_metric("manhattan"), Error);
}

TEST_CASE("rank_candidates agrees with a naive oracle on l=3")
{
    const auto L = standard_numpad();
    const auto dict = build_dictionary(FittsModel{135.912, 47.7334}, L, 3);
    Rng rng(31);
    for (Metric m : {Metric::Cosine, Metric::Euclidean, Metric::Pearson}) {
        for (int trial = 0; trial < 100; ++trial) {
            TimingSequence obs = trial % 2 == 0 ? random_sequence(rng, 3)
                                                : simulate_entry({kPaper, L}, Pin(rng.below(1000), 3), {1.1, 20, 0, 30, 5}, trial);
            const auto got = rank_candidates(dict, obs, m);
            std::vector<std::pair<double, std::uint64_t>> oracle;
            for (std::uint64_t p = 0; p < 1000; ++p)
                oracle.push_back({std::nearbyint(naive_score(m, dict.row(p), obs) * 1e9) / 1e9, p});
            std::stable_sort(oracle.begin(), oracle.end(), [](auto& x, auto& y) { return x.first > y.first; });
            REQUIRE(got.size() == 1000);
            for (std::size_t i = 0; i < 1000; ++i)
                CHECK(got[i].pin == oracle[i].second);
        }
    }

    // A slope-free model makes every row constant, which Pearson rejects.
    const auto flat = build_dictionary(FittsModel{135.912, 0.0}, L, 3);
    CHECK_THROWS_WITH_AS(rank_candidates(flat, random_sequence(rng, 3), Metric::Pearson),
                         doctest::Contains("undefined correlation"), Error);
}

TEST_CASE("ranking examples")
{
    const auto L = standard_numpad();
    const auto d6 = build_dictionary(kPaper, L, 6);
    const auto row = d6.row(504316);
    const TimingSequence obs(row.begin(), row.end());
    const auto list = rank_candidates(d6, obs);

    std::size_t ties = 0;
    for (std::size_t r = 0; r < d6.size(); ++r)
        ties += rank_key(cosine_similarity(d6.row(r), obs)) == 1.0;
    const auto rank = list.rank_of(Pin::parse("504316"));
    REQUIRE(rank.has_value());
    CHECK(list[*rank - 1].score == 1.0);
    CHECK(*rank <= ties);
    for (std::size_t i = 1; i < list.size(); ++i)
        CHECK(list[i - 1].score >= list[i].score);

    TimingSequence scaled = obs;
    for (auto& x : scaled)
        x *= 3.7;
    CHECK(rank_candidates(d6, scaled) == list);

    const std::vector<DigitConstraint> all{{1, 5}, {2, 0}, {3, 4}, {4, 3}, {5, 1}, {6, 6}};
    const auto single = reduce_dictionary(d6, all);
    REQUIRE(single.size() == 1);
    const auto one = rank_candidates(single, scaled);
    CHECK(one.size() == 1);
    CHECK(one.rank_of(Pin::parse("504316")) == 1);

    CHECK_THROWS_AS(rank_candidates(d6, TimingSequence{1, 2, 3}), Error);
}

TEST_CASE("Ranker::place agrees with the full ranking")
{
    const auto L = standard_numpad();
    const auto d4 = build_dictionary(kPaper, L, 4);
    Rng rng(8);
    for (Metric m : {Metric::Cosine, Metric::Euclidean}) {
        const Ranker ranker(d4, m);
        for (int trial = 0; trial < 20; ++trial) {
            const auto pin = Pin(rng.below(10000), 4);
            const auto obs = simulate_entry({kPaper, L}, pin, {1.0, 25, 15, 30, 17}, trial);
            const auto list = ranker.rank(obs);
            const auto placed = ranker.place(obs, pin);
            REQUIRE(placed.has_value());
            CHECK(placed->rank == list.rank_of(pin));
        }
    }
}

TEST_CASE("average_entries")
{
    const TimingSequence v{100, 250, 180};
    const std::vector<TimingSequence> same(4, v);
    const auto avg = average_entries(same);
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(avg[i] == doctest::Approx(v[i]).epsilon(1e-15));

    const std::vector<TimingSequence> speeds{v, {200, 500, 360}};
    CHECK(cosine_similarity(average_entries(speeds), v) == doctest::Approx(1.0).epsilon(1e-15));

    const std::vector<TimingSequence> hand{{100, 200}, {300, 100}};
    const auto h = average_entries(hand);
    CHECK(h[0] == doctest::Approx(189.583333).epsilon(1e-8));
    CHECK(h[1] == doctest::Approx(160.416667).epsilon(1e-8));

    CHECK_THROWS_AS(average_entries(std::vector<TimingSequence>{}), Error);
    CHECK_THROWS_AS(average_entries(std::vector<TimingSequence>{{1, 2}, {1, 2, 3}}), Error);
}

TEST_CASE("random baseline")
{
    CHECK(random_baseline(6, 0, 3) == 3e-6);
    CHECK(random_baseline(6, 2, 100) == 1e-2);
    CHECK(random_baseline(6, 0, 1000000) == 1.0);
    CHECK(random_baseline(4, 3, 10) == 1.0);
    CHECK_THROWS_AS(random_baseline(4, 4, 1), Error);
    CHECK_THROWS_AS(random_baseline(4, -1, 1), Error);
    CHECK_THROWS_AS(random_baseline(4, 0, 0), Error);
    CHECK_THROWS_AS(random_baseline(4, 0, 10001), Error);

    // Equals the paper's binomial ratio C(N-1, x-1) / C(N, x).
    for (int n_exp = 1; n_exp <= 3; ++n_exp) {
        const std::uint64_t N = pin_space_size(n_exp);
        for (std::uint64_t x = 1; x <= N; ++x) {
            const double ratio = std::exp(std::lgamma(double(N)) - std::lgamma(double(x)) - std::lgamma(double(N - x + 1))
                                          - (std::lgamma(double(N + 1)) - std::lgamma(double(x + 1)) - std::lgamma(double(N - x + 1))));
            CHECK(random_baseline(n_exp, 0, x) == doctest::Approx(ratio).epsilon(1e-9));
        }
    }
}

TEST_CASE("run_attack modes")
{
    const auto L = standard_numpad();
    const auto d4 = build_dictionary(kPaper, L, 4);
    const GroundTruth truth{kPaper, L};

    SUBCASE("zero-noise general attack scores exactly 1")
    {
        Rng rng(4);
        std::vector<ObservedEntry> entries;
        for (int i = 0; i < 1000; ++i) {
            const Pin pin(rng.below(10000), 4);
            entries.push_back({"c" + std::to_string(i), "s", pin, simulate_entry(truth, pin, TypistProfile::exact(), 0)});
        }
        const auto out = run_attack(d4, entries, AttackMode::general());
        REQUIRE(out.size() == 1000);
        for (const auto& o : out) {
            CHECK(o.score == 1.0);
            CHECK(o.rank >= 1);
            CHECK(o.dictionary_size == 10000);
        }
    }
    SUBCASE("all digits known")
    {
        const Pin pin = Pin::parse("8023");
        const auto seq = simulate_entry(truth, pin, {1.0, 25, 15, 30, 3}, 0);
        const std::vector<ObservedEntry> e{{"c", "s", pin, seq}};
        std::vector<DigitConstraint> c;
        for (int p = 1; p <= 4; ++p)
            c.push_back({p, pin.digit(p)});
        const auto out = run_attack(d4, e, AttackMode::known_digits(c));
        CHECK(out[0].rank == 1);
        CHECK(out[0].dictionary_size == 1);
        CHECK(out[0].flag.empty());

        const std::vector<DigitConstraint> wrong{{1, 9}};
        const auto flagged = run_attack(d4, e, AttackMode::known_digits(wrong));
        CHECK(flagged[0].flag.find("inconsistent") != std::string::npos);
    }
    SUBCASE("known-digit rank equals the restricted full rank")
    {
        Rng rng(12);
        for (int trial = 0; trial < 30; ++trial) {
            const Pin pin(rng.below(10000), 4);
            const auto seq = simulate_entry(truth, pin, {1.0, 25, 15, 30, 9}, trial);
            const std::vector<DigitConstraint> c{{2, pin.digit(2)}};
            const auto out = run_attack(d4, std::vector<ObservedEntry>{{"c", "s", pin, seq}}, AttackMode::known_digits(c));
            const auto full = rank_candidates(d4, seq);
            std::size_t restricted = 0;
            for (const auto& g : full.guesses()) {
                if (Pin(g.pin, 4).digit(2) != pin.digit(2))
                    continue;
                ++restricted;
                if (g.pin == pin.value())
                    break;
            }
            CHECK(out[0].rank == restricted);
        }
    }
    SUBCASE("multi-entry")
    {
        const Pin pin = Pin::parse("1397");
        std::vector<ObservedEntry> same;
        for (int i = 0; i < 10; ++i)
            same.push_back({"c" + std::to_string(i), "s", pin, simulate_entry(truth, pin, TypistProfile::exact(), i)});
        const auto multi = run_attack(d4, same, AttackMode::multi_entry(10));
        const auto general = run_attack(d4, std::span(same).first(1), AttackMode::general());
        REQUIRE(multi.size() == 1);
        CHECK(multi[0].rank == general[0].rank);
        CHECK(multi[0].score == general[0].score);

        CHECK_THROWS_WITH_AS(run_attack(d4, std::span(same).first(7), AttackMode::multi_entry(10)),
                             doctest::Contains("fewer than k"), Error);
        // Trailing partial groups are dropped.
        std::vector<ObservedEntry> many = same;
        many.insert(many.end(), same.begin(), same.begin() + 5);
        CHECK(run_attack(d4, many, AttackMode::multi_entry(10)).size() == 1);
        CHECK(run_attack(d4, many, AttackMode::multi_entry(5)).size() == 3);
    }
    SUBCASE("deployment mode reports the top guess")
    {
        const auto row = d4.row(4711);
        const std::vector<ObservedEntry> e{{"c", "s", std::nullopt, TimingSequence(row.begin(), row.end())}};
        const auto out = run_attack(d4, e, AttackMode::general());
        CHECK(out[0].rank == 0);
        REQUIRE(out[0].top_guess.has_value());
        CHECK(out[0].score == 1.0);
    }
}

TEST_CASE("success curves")
{
    std::vector<AttackOutcome> ones(5);
    for (auto& o : ones)
        o.rank = 1;
    const std::vector<std::uint64_t> xs{1, 10, 100};
    for (const auto& p : success_curve(ones, xs))
        CHECK(p.success_rate == 1.0);

    std::vector<AttackOutcome> single(1);
    single[0].rank = 57;
    const std::vector<std::uint64_t> around{1, 56, 57, 58, 10000};
    const auto c = success_curve(single, around);
    CHECK(c[0].success_rate == 0.0);
    CHECK(c[1].success_rate == 0.0);
    CHECK(c[2].success_rate == 1.0);
    CHECK(c[3].success_rate == 1.0);

    const std::uint64_t N = 1000;
    std::vector<AttackOutcome> uniform(N);
    for (std::uint64_t i = 0; i < N; ++i)
        uniform[i].rank = i + 1;
    const std::vector<std::uint64_t> grid{1, 3, 10, 100, 500, 1000};
    for (const auto& p : success_curve(uniform, grid))
        CHECK(p.success_rate == doctest::Approx(random_baseline(3, 0, p.x)));
}

TEST_CASE("observed entry and outcome files")
{
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ObservedEntry> entries;
        const int l = 1 + static_cast<int>(rng.below(6));
        for (int i = 0, n = 1 + static_cast<int>(rng.below(5)); i < n; ++i) {
            ObservedEntry e;
            e.case_id = "case" + std::to_string(rng.below(100000));
            e.subject_id = "sub" + std::to_string(rng.below(10));
            if (rng.below(4) != 0)
                e.true_pin = Pin(rng.below(pin_space_size(l)), l);
            for (int j = 0; j < l; ++j)
                e.sequence.push_back(std::ldexp(rng.uniform(), static_cast<int>(rng.below(20))) + 1e-300);
            entries.push_back(std::move(e));
        }
        CHECK(parse_observed_entries(format_observed_entries(entries)) == entries);
    }
    CHECK_THROWS_AS(parse_observed_entries("c,s,12\n"), Error);
    CHECK_THROWS_AS(parse_observed_entries("c,s,12,100,-3\n"), Error);

    std::vector<AttackOutcome> outs(2);
    outs[0] = {"a", Pin::parse("0042"), 17, 0.987654321, 0, {}, {}};
    outs[1] = {"b", std::nullopt, 0, 0.5, 0, {}, {}};
    CHECK(parse_outcomes(format_outcomes(outs)) == outs);
}
