#include "pinforge/error.hpp"
#include "pinforge/harness.hpp"
#include "pinforge/text_io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

using namespace pinforge;

namespace {

ExperimentPlan small_plan(ExperimentMode mode, int length = 3)
{
    ExperimentPlan p;
    p.mode = mode;
    p.pin_length = length;
    p.seed = 11;
    p.xs = {1, 3, 10, 30, 100, 300, 1000};
    p.cohort.default_pins_per_level = 20;
    p.cohort.entries_per_pin = 10;
    p.cohort.subjects = 3;
    p.cohort.uniform_pins = 100;
    return p;
}

ExperimentPlan noiseless(ExperimentPlan p)
{
    p.cohort.noise_sd = 0.0;
    p.cohort.quantization = 0.0;
    p.attacker_model = p.truth;
    return p;
}

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("pinforge_test_" + name);
}

}  // namespace

TEST_CASE("plan parsing")
{
    const auto plan = parse_plan("# comment\nmode = known-digits\nlength=5\nseed = 42\nxs = 1, 10, 100\n"
                                 "noise_sd = 12.5\npins_per_level = 5,6\nrevealed = 2\nattacker_b = 40\n");
    CHECK(plan.mode == ExperimentMode::KnownDigits);
    CHECK(plan.pin_length == 5);
    CHECK(plan.seed == 42);
    CHECK(plan.xs == std::vector<std::uint64_t>{1, 10, 100});
    CHECK(plan.cohort.noise_sd == 12.5);
    CHECK(plan.cohort.pins_per_level == std::vector<std::size_t>{5, 6});
    CHECK(plan.revealed_digits == 2);
    REQUIRE(plan.attacker_model.has_value());
    CHECK(plan.attacker_model->a == 135.912);
    CHECK(plan.attacker_model->b == 40.0);

    const auto again = parse_plan(format_plan(plan));
    CHECK(format_plan(again) == format_plan(plan));

    CHECK_THROWS_WITH_AS(parse_plan("bogus = 1\n"), doctest::Contains("unknown plan key"), Error);
    CHECK_THROWS_AS(parse_plan("seed 4\n"), Error);
    CHECK_THROWS_AS(parse_plan("mode = sideways\n"), Error);

    auto bad = small_plan(ExperimentMode::General);
    bad.xs = {10, 3};
    CHECK_THROWS_AS(validate(bad), Error);
    bad = small_plan(ExperimentMode::General);
    bad.cohort.pins_per_level = {0};
    CHECK_THROWS_AS(validate(bad), Error);
    bad = small_plan(ExperimentMode::General);
    bad.pin_length = 1;
    CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("general experiment structure")
{
    const auto plan = small_plan(ExperimentMode::General);
    const auto r = run_general(plan);
    CHECK(r.levels.size() == 2);
    CHECK(r.cases == 2 * 20 * 10);
    CHECK(r.levels[0].cases + r.levels[1].cases == r.cases);

    for (std::size_t i = 0; i < plan.xs.size(); ++i) {
        // Aggregate is the case-weighted mean of the level curves.
        double weighted = 0.0;
        for (const auto& lc : r.levels)
            weighted += lc.curve[i].success_rate * static_cast<double>(lc.cases);
        CHECK(r.aggregate[i].success_rate == doctest::Approx(weighted / static_cast<double>(r.cases)).epsilon(1e-15));
        CHECK(r.baseline[i].success_rate == static_cast<double>(plan.xs[i]) / 1000.0);
        if (i > 0)
            CHECK(r.aggregate[i].success_rate >= r.aggregate[i - 1].success_rate);
    }
    CHECK(r.success_at(1000) == 1.0);
    CHECK_THROWS_AS(r.success_at(7), Error);

    // Bitwise reproducible; timings stay out of the default output.
    CHECK(format_report(run_general(plan)) == format_report(r));
    CHECK(format_report(r).find("# time") == std::string::npos);
    CHECK(format_report(r, true).find("# time") != std::string::npos);

    auto other = plan;
    other.seed = 12;
    CHECK(format_report(run_general(other)) != format_report(r));
}

TEST_CASE("zero-noise general attack ranks within the tie class")
{
    const auto plan = noiseless(small_plan(ExperimentMode::General));
    const auto r = run_general(plan);
    const auto dict = build_dictionary(plan.truth, standard_numpad(), 3);
    for (const auto& o : r.outcomes) {
        CHECK(o.score == 1.0);
        const auto row = dict.row(o.true_pin->value());
        std::size_t ties = 0;
        for (std::size_t j = 0; j < dict.size(); ++j)
            ties += rank_key(cosine_similarity(dict.row(j), row)) == 1.0;
        CHECK(o.rank <= ties);
        if (ties == 1)
            CHECK(o.rank == 1);
    }
}

TEST_CASE("multi-entry experiments")
{
    auto plan = noiseless(small_plan(ExperimentMode::MultiEntry));
    plan.multi_entry_k = 10;
    const auto multi = run_multi_entry(plan);
    CHECK(multi.diagnostic("general_mean_rank") == multi.diagnostic("multi_entry_mean_rank"));

    auto one = small_plan(ExperimentMode::MultiEntry);
    one.multi_entry_k = 1;
    const auto k1 = run_multi_entry(one);
    const auto general = run_general(small_plan(ExperimentMode::General));
    CHECK(k1.aggregate == general.aggregate);
    CHECK(k1.mean_rank == general.mean_rank);

    auto too_big = small_plan(ExperimentMode::MultiEntry);
    too_big.multi_entry_k = 11;
    CHECK_THROWS_AS(run_multi_entry(too_big), Error);
}

TEST_CASE("known-digits experiments")
{
    auto plan = small_plan(ExperimentMode::KnownDigits, 4);
    plan.cohort.pins_per_level = {5, 5, 5};
    plan.cohort.entries_per_pin = 3;
    plan.xs = {1, 3, 10, 100};
    const int expected_subsets[] = {0, 4, 6, 4};
    std::vector<std::vector<CurvePoint>> curves;
    for (int k = 1; k <= 3; ++k) {
        plan.revealed_digits = k;
        const auto r = run_known_digits(plan);
        CHECK(r.diagnostic("position_subsets") == expected_subsets[k]);
        CHECK(r.cases == static_cast<std::size_t>(15 * 3 * expected_subsets[k]));
        for (std::size_t i = 0; i < plan.xs.size(); ++i) {
            const double space = std::pow(10.0, 4 - k);
            CHECK(r.baseline[i].success_rate == std::min(1.0, static_cast<double>(plan.xs[i]) / space));
        }
        curves.push_back(r.aggregate);
    }
    CHECK(curves[2][2].success_rate == 1.0);  // 10 candidates left
    for (std::size_t i = 0; i < plan.xs.size(); ++i) {
        CHECK(curves[1][i].success_rate >= curves[0][i].success_rate);
        CHECK(curves[2][i].success_rate >= curves[1][i].success_rate);
    }

    plan.revealed_digits = 4;
    CHECK_THROWS_AS(run_known_digits(plan), Error);
    plan.revealed_digits = 0;
    CHECK_THROWS_AS(run_known_digits(plan), Error);
}

TEST_CASE("targeted experiments")
{
    auto plan = noiseless(small_plan(ExperimentMode::Targeted));
    plan.cohort.speed_min = 1.3;
    plan.cohort.speed_max = 1.3;
    const auto r = run_targeted(plan);
    CHECK(r.diagnostic("targeted_mean_a").value() == doctest::Approx(1.3 * plan.truth.a).epsilon(1e-9));
    CHECK(r.diagnostic("targeted_mean_b").value() == doctest::Approx(1.3 * plan.truth.b).epsilon(1e-9));
    const auto general = run_general(noiseless(small_plan(ExperimentMode::General)));
    REQUIRE(r.outcomes.size() == general.outcomes.size());
    for (std::size_t i = 0; i < r.outcomes.size(); ++i)
        CHECK(r.outcomes[i].rank == general.outcomes[i].rank);

    auto noisy = small_plan(ExperimentMode::Targeted);
    const auto nr = run_targeted(noisy);
    CHECK(nr.diagnostic("targeted_minus_general_x10").has_value());
}

TEST_CASE("countermeasure")
{
    auto plan = small_plan(ExperimentMode::Countermeasure);
    plan.cohort.uniform_pins = 200;
    const auto r = run_countermeasure(plan);
    CHECK(r.diagnostic("max_cosine_deviation").value() < 1e-12);
    CHECK(r.diagnostic("control_max_cosine_deviation").value() > 1e-3);
    CHECK(r.levels.empty());
    // Pure tie-break ranking: the rank is the PIN's position in ascending order.
    for (const auto& o : r.outcomes)
        CHECK(o.rank == o.true_pin->value() + 1);

    plan.countermeasure_truncate = true;
    CHECK(run_countermeasure(plan).diagnostic("max_cosine_deviation").value() < 1e-12);

    const auto path = temp_file("std_layout.txt");
    text::write_file(path.string(), save_layout(standard_numpad()));
    plan.layout = path.string();
    CHECK_THROWS_WITH_AS(run_countermeasure(plan), doctest::Contains("not circular"), Error);
    plan.strict_circular = false;
    CHECK(run_countermeasure(plan).diagnostic("max_cosine_deviation").value() > 1e-3);
    std::filesystem::remove(path);
}

TEST_CASE("ingested inputs and disjointness")
{
    const auto entries_path = temp_file("entries.txt");
    const auto log_path = temp_file("log.txt");
    const GroundTruth truth{FittsModel{135.912, 47.7334}, standard_numpad()};
    std::vector<Pin> pins;
    for (int v : {12, 345, 678, 901, 234})
        pins.emplace_back(v, 3);
    const std::vector<TypistProfile> prof{{1.0, 20, 15, 30, 3}};
    const auto cohort = simulate_cohort(truth, pins, prof, 4);
    text::write_file(entries_path.string(), format_observed_entries(cohort));
    text::write_file(log_path.string(), export_keystroke_log(cohort));

    auto plan = small_plan(ExperimentMode::General);
    plan.cohort.entries_file = entries_path.string();
    plan.training_log = log_path.string();
    CHECK_THROWS_WITH_AS(run_general(plan), doctest::Contains("both training and testing"), Error);
    plan.require_disjoint = false;
    const auto r = run_general(plan);
    CHECK(r.cases == 20);

    plan.training_log.clear();
    const auto dict_path = temp_file("dict.bin");
    text::write_file(dict_path.string(),
                     save_dictionary_binary(build_dictionary(FittsModel{135.912, 47.7334}, standard_numpad(), 3)));
    plan.dictionary_file = dict_path.string();
    plan.require_disjoint = true;
    CHECK(run_general(plan).cases == 20);

    plan.pin_length = 4;
    CHECK_THROWS_AS(run_general(plan), Error);

    std::filesystem::remove(entries_path);
    std::filesystem::remove(log_path);
    std::filesystem::remove(dict_path);
}

TEST_CASE("Workspace caches partitions")
{
    Workspace ws;
    const auto dict = build_dictionary(FittsModel{135.912, 47.7334}, standard_numpad(), 3);
    const auto& a = ws.partition(dict, 4, 1000, 1);
    const auto& b = ws.partition(dict, 4, 1000, 1);
    CHECK(&a == &b);
    CHECK(a.sizes == std::vector<std::size_t>{100, 900});
}
