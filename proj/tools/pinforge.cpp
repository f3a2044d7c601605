// pinforge: command-line front end for the inter-keystroke timing toolkit.

#include "pinforge/attack.hpp"
#include "pinforge/dictionary.hpp"
#include "pinforge/error.hpp"
#include "pinforge/geometry.hpp"
#include "pinforge/harness.hpp"
#include "pinforge/model.hpp"
#include "pinforge/rng.hpp"
#include "pinforge/simulator.hpp"
#include "pinforge/strength.hpp"
#include "pinforge/text_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <set>

using namespace pinforge;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string metadata_header(const std::string& command, const std::vector<std::pair<std::string, std::string>>& params)
{
    std::string out = std::string("# pinforge ") + kVersion + " " + command + "\n";
    for (const auto& [k, v] : params)
        out += "# " + k + "=" + v + "\n";
    return out;
}

void emit(const std::string& path, const std::string& contents)
{
    if (path.empty() || path == "-")
        std::cout << contents;
    else
        text::write_file(path, contents);
}

FittsModel model_from(double a, double b)
{
    FittsModel m{a, b};
    validate(m);
    return m;
}

std::vector<DigitConstraint> parse_constraints(const std::vector<std::string>& specs)
{
    std::vector<DigitConstraint> out;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw Error("constraint must look like <position>=<digit>: '" + s + "'");
        const auto pos = text::parse_uint(std::string_view(s).substr(0, eq), "constraint position");
        const auto digit = text::parse_uint(std::string_view(s).substr(eq + 1), "constraint digit");
        if (digit > 9)
            throw Error("constraint digit must be 0-9");
        out.push_back({static_cast<int>(pos), static_cast<int>(digit)});
    }
    return out;
}

std::string format_fit(const FitReport& r)
{
    std::string out = "# parameter,estimate,std_error,t,p_value\n";
    for (std::size_t i = 0; i < r.names.size(); ++i)
        out += r.names[i] + "," + text::format_exact(r.coefficients[i]) + "," + text::format_exact(r.standard_errors[i])
            + "," + text::format_exact(r.t_statistics[i]) + "," + text::format_exact(r.p_values[i]) + "\n";
    out += "# residual_sd=" + text::format_exact(r.residual_sd) + " n=" + std::to_string(r.n_samples) + "\n";
    for (const auto& w : r.warnings)
        out += "# warning: " + w + "\n";
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"pinforge: inter-keystroke timing analysis of PIN entry"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // layout
    auto* layout_cmd = app.add_subcommand("layout", "Keypad layouts");
    layout_cmd->require_subcommand(1);
    std::string layout_name = "standard";
    double radius = 1.0;
    std::string out_path;
    auto* layout_export = layout_cmd->add_subcommand("export", "Write a built-in layout file");
    layout_export->add_option("--layout", layout_name, "standard | circular | layout file")->capture_default_str();
    layout_export->add_option("--radius", radius, "Radius for the circular layout (inches)")->capture_default_str();
    layout_export->add_option("--out", out_path, "Output file (default stdout)");
    auto* layout_info = layout_cmd->add_subcommand("info", "Print pairwise distances and difficulty indices");
    layout_info->add_option("--layout", layout_name)->capture_default_str();

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit timing models to a keystroke log");
    std::string log_path;
    int fit_length = 0;
    bool extended = false;
    fit_cmd->add_option("--log", log_path, "Keystroke log (session_id,key,key_down_ms)")->required();
    fit_cmd->add_option("--layout", layout_name)->capture_default_str();
    fit_cmd->add_flag("--extended", extended, "Fit the six-parameter word-end/segment model");
    fit_cmd->add_option("--length", fit_length, "PIN length (extended model; default: infer)");
    fit_cmd->add_option("--out", out_path);

    // dict
    auto* dict_cmd = app.add_subcommand("dict", "Timing dictionaries");
    dict_cmd->require_subcommand(1);
    int length = 4;
    double a = 135.912, b = 47.7334;
    std::string format = "text";
    std::string pattern = "standard";
    int decimals = 4;
    auto* dict_build = dict_cmd->add_subcommand("build", "Generate the dictionary for a PIN length");
    dict_build->add_option("--length", length)->capture_default_str();
    dict_build->add_option("--a", a)->capture_default_str();
    dict_build->add_option("--b", b)->capture_default_str();
    dict_build->add_option("--layout", layout_name)->capture_default_str();
    dict_build->add_option("--pattern", pattern, "standard | interleaved | interleaved-short")->capture_default_str();
    dict_build->add_option("--format", format, "text | binary")->capture_default_str();
    dict_build->add_option("--decimals", decimals, "Text decimals; -1 for exact values")->capture_default_str();
    dict_build->add_option("--out", out_path)->required();
    std::string dict_path;
    std::vector<std::string> constraint_specs;
    auto* dict_reduce = dict_cmd->add_subcommand("reduce", "Keep PINs with known digits");
    dict_reduce->add_option("--dict", dict_path)->required();
    dict_reduce->add_option("--constraint", constraint_specs, "<position>=<digit>, repeatable");
    dict_reduce->add_option("--format", format)->capture_default_str();
    dict_reduce->add_option("--decimals", decimals)->capture_default_str();
    dict_reduce->add_option("--out", out_path)->required();
    auto* dict_convert = dict_cmd->add_subcommand("convert", "Convert between text and binary formats");
    dict_convert->add_option("--dict", dict_path)->required();
    dict_convert->add_option("--format", format)->required();
    dict_convert->add_option("--decimals", decimals)->capture_default_str();
    dict_convert->add_option("--out", out_path)->required();

    // attack
    auto* attack_cmd = app.add_subcommand("attack", "Rank candidate PINs for observed entries");
    attack_cmd->require_subcommand(1);
    std::string entries_path, metric = "cosine", mode = "general", curve_path;
    std::size_t group_k = 10;
    std::vector<std::uint64_t> xs = {1, 3, 10, 100, 1000};
    auto* attack_rank = attack_cmd->add_subcommand("rank", "Attack every observed entry");
    attack_rank->add_option("--dict", dict_path)->required();
    attack_rank->add_option("--entries", entries_path, "case_id,subject_id,true_pin_or_dash,dt1,...")->required();
    attack_rank->add_option("--metric", metric)->capture_default_str();
    attack_rank->add_option("--mode", mode, "general | multi-entry | known-digits")->capture_default_str();
    attack_rank->add_option("--k", group_k, "Entries averaged per group (multi-entry)")->capture_default_str();
    attack_rank->add_option("--constraint", constraint_specs, "<position>=<digit> (known-digits)");
    attack_rank->add_option("--out", out_path)->required();
    attack_rank->add_option("--curve", curve_path, "Also write the success curve");
    attack_rank->add_option("--xs", xs, "Attempt thresholds for --curve");

    // strength
    auto* strength_cmd = app.add_subcommand("strength", "PIN strength levels");
    std::string freq_path, freq_out;
    bool full = false;
    std::uint64_t samples = 0, seed = 1;
    strength_cmd->add_option("--dict", dict_path, "Dictionary file (else built from --length/--a/--b/--layout)");
    strength_cmd->add_option("--length", length)->capture_default_str();
    strength_cmd->add_option("--a", a)->capture_default_str();
    strength_cmd->add_option("--b", b)->capture_default_str();
    strength_cmd->add_option("--layout", layout_name)->capture_default_str();
    strength_cmd->add_flag("--full", full, "Allow the exact computation beyond length 4 (slow)");
    strength_cmd->add_option("--samples", samples, "Use the sampling estimator with this many neighbors per PIN");
    strength_cmd->add_option("--seed", seed)->capture_default_str();
    strength_cmd->add_option("--freq", freq_path, "Frequency records (pin,count) to analyze");
    strength_cmd->add_option("--freq-out", freq_out, "Per-level frequency table");
    strength_cmd->add_option("--out", out_path)->required();

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic typist cohort");
    std::vector<std::string> pin_list;
    std::size_t random_pins = 0, entries_per_pin = 15, subjects = 1;
    TypistProfile profile;
    std::string log_out;
    sim_cmd->add_option("--length", length)->capture_default_str();
    sim_cmd->add_option("--a", a)->capture_default_str();
    sim_cmd->add_option("--b", b)->capture_default_str();
    sim_cmd->add_option("--layout", layout_name)->capture_default_str();
    sim_cmd->add_option("--pattern", pattern)->capture_default_str();
    sim_cmd->add_option("--pins", pin_list, "Explicit PINs");
    sim_cmd->add_option("--random", random_pins, "Number of random PINs");
    sim_cmd->add_option("--entries", entries_per_pin)->capture_default_str();
    sim_cmd->add_option("--subjects", subjects, "Profiles; speeds log-uniform in [0.7, 1.4] beyond the first")
        ->capture_default_str();
    sim_cmd->add_option("--noise", profile.noise_sd)->capture_default_str();
    sim_cmd->add_option("--quantization", profile.quantization)->capture_default_str();
    sim_cmd->add_option("--min-interval", profile.min_interval)->capture_default_str();
    sim_cmd->add_option("--speed", profile.speed_scale)->capture_default_str();
    sim_cmd->add_option("--seed", seed)->capture_default_str();
    sim_cmd->add_option("--out", out_path, "Observed-entry file")->required();
    sim_cmd->add_option("--log", log_out, "Also write a keystroke log");

    // eval / countermeasure
    auto* eval_cmd = app.add_subcommand("eval", "Run an experiment plan");
    std::string eval_mode = "general", plan_path, outcomes_path;
    std::vector<std::string> settings;
    std::optional<int> eval_length;
    std::optional<std::uint64_t> eval_seed;
    bool timings = false;
    eval_cmd->add_option("mode", eval_mode, "general | targeted | multi-entry | known-digits | countermeasure")
        ->capture_default_str();
    eval_cmd->add_option("--plan", plan_path, "Plan file (key = value lines)");
    eval_cmd->add_option("--set", settings, "Override a plan key: key=value (repeatable)");
    eval_cmd->add_option("--length", eval_length);
    eval_cmd->add_option("--seed", eval_seed);
    eval_cmd->add_option("--out", out_path, "Report file (default stdout)");
    eval_cmd->add_option("--outcomes", outcomes_path, "Per-case outcome file");
    eval_cmd->add_flag("--timings", timings, "Include wall-clock timings in the report");
    auto* cm_cmd = app.add_subcommand("countermeasure", "Evaluate the circular keypad countermeasure");
    cm_cmd->add_option("--plan", plan_path);
    cm_cmd->add_option("--set", settings);
    cm_cmd->add_option("--length", eval_length);
    cm_cmd->add_option("--seed", eval_seed);
    cm_cmd->add_option("--radius", radius)->capture_default_str();
    cm_cmd->add_option("--out", out_path);
    cm_cmd->add_option("--outcomes", outcomes_path);
    cm_cmd->add_flag("--timings", timings);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*layout_export) {
            auto layout = layout_name == "circular" ? circular_layout(radius) : resolve_layout(layout_name);
            emit(out_path, save_layout(layout));
        } else if (*layout_info) {
            const auto layout = resolve_layout(layout_name);
            std::string out = metadata_header("layout info", {{"layout", layout.name()}});
            out += "# from,to,distance_in,index_of_difficulty\n";
            for (std::size_t i = 0; i < kKeyCount; ++i)
                for (std::size_t j = 0; j < kKeyCount; ++j) {
                    const auto f = static_cast<Key>(i), t = static_cast<Key>(j);
                    out += key_symbol(f) + "," + key_symbol(t) + "," + text::format_fixed(key_distance(layout, f, t), 6)
                        + "," + text::format_fixed(index_of_difficulty(layout, f, t), 6) + "\n";
                }
            emit("", out);
        } else if (*fit_cmd) {
            const auto layout = resolve_layout(layout_name);
            const auto samples_in = ingest_keystroke_log(text::read_file(log_path));
            std::string out = metadata_header("fit", {{"log", log_path}, {"layout", layout.name()},
                                                      {"model", extended ? "extended" : "fitts"}});
            if (extended) {
                int l = fit_length;
                if (l == 0 && !samples_in.empty())
                    l = samples_in.front().pin_length;
                std::vector<TrainingSample> keep;
                for (const auto& s : samples_in)
                    if (s.pin_length == l)
                        keep.push_back(s);
                out += format_fit(fit_extended(keep, layout, l).report);
            } else {
                out += format_fit(fit_fitts(samples_in, layout).report);
            }
            emit(out_path, out);
        } else if (*dict_build) {
            const auto layout = resolve_layout(layout_name);
            const auto dict = build_dictionary(model_from(a, b), layout, length, parse_pattern(pattern));
            if (format == "binary")
                emit(out_path, save_dictionary_binary(dict));
            else {
                auto text_out = save_dictionary_text(dict, decimals);
                const auto eol = text_out.find('\n') + 1;
                text_out.insert(eol, metadata_header("dict build", {{"decimals", std::to_string(decimals)}}));
                emit(out_path, text_out);
            }
        } else if (*dict_reduce || *dict_convert) {
            auto dict = load_dictionary(text::read_file(dict_path));
            if (*dict_reduce)
                dict = reduce_dictionary(dict, parse_constraints(constraint_specs));
            emit(out_path, format == "binary" ? save_dictionary_binary(dict) : save_dictionary_text(dict, decimals));
        } else if (*attack_rank) {
            const auto dict = load_dictionary(text::read_file(dict_path));
            const auto entries = parse_observed_entries(text::read_file(entries_path));
            AttackMode attack_mode;
            if (mode == "multi-entry")
                attack_mode = AttackMode::multi_entry(group_k);
            else if (mode == "known-digits")
                attack_mode = AttackMode::known_digits(parse_constraints(constraint_specs));
            else if (mode != "general")
                throw Error("unknown attack mode '" + mode + "'");
            const auto outcomes = run_attack(dict, entries, attack_mode, parse_metric(metric));
            for (const auto& o : outcomes)
                if (!o.flag.empty())
                    std::cerr << "warning: " << o.case_id << ": " << o.flag << "\n";
            const auto header = metadata_header("attack rank", {{"dict", dict_path}, {"entries", entries_path},
                                                                {"metric", metric}, {"mode", mode}});
            emit(out_path, header + format_outcomes(outcomes));
            if (!curve_path.empty())
                emit(curve_path, header + format_curve(success_curve(outcomes, xs)));
        } else if (*strength_cmd) {
            const auto dict = dict_path.empty() ? build_dictionary(model_from(a, b), resolve_layout(layout_name), length)
                                                : load_dictionary(text::read_file(dict_path));
            const auto profile = samples > 0 ? strength_estimate(dict, samples, seed)
                                             : strength_measure(dict, {4, full});
            const auto part = partition_levels(profile);
            emit(out_path, metadata_header("strength", {{"samples", std::to_string(samples)}, {"seed", std::to_string(seed)}})
                               + format_strength_profile(profile, part));
            if (!freq_path.empty()) {
                const auto records = parse_frequency_records(text::read_file(freq_path));
                std::string out = "# level,size,mass,proportion,mean_frequency\n";
                for (const auto& lf : frequency_analysis(part, records))
                    out += std::to_string(lf.level) + "," + std::to_string(lf.size) + "," + std::to_string(lf.mass) + ","
                        + text::format_exact(lf.proportion) + "," + text::format_exact(lf.mean_frequency) + "\n";
                emit(freq_out, out);
            }
        } else if (*sim_cmd) {
            const auto layout = resolve_layout(layout_name);
            const auto pat = parse_pattern(pattern);
            GroundTruth truth{model_from(a, b), layout, pat};
            std::vector<Pin> pins;
            for (const auto& p : pin_list) {
                pins.push_back(Pin::parse(p));
                if (pins.back().length() != length)
                    throw Error("PIN " + p + " does not have length " + std::to_string(length));
            }
            Rng rng(derive_seed(seed, {0x70696e73u}));
            std::set<std::uint64_t> seen;
            const auto space = pin_space_size(length);
            while (seen.size() < std::min<std::uint64_t>(random_pins, space)) {
                const auto v = rng.below(space);
                if (seen.insert(v).second)
                    pins.emplace_back(v, length);
            }
            std::vector<TypistProfile> profiles;
            for (std::size_t s = 0; s < std::max<std::size_t>(subjects, 1); ++s) {
                TypistProfile p = profile;
                p.seed = derive_seed(seed, {s});
                if (s > 0) {
                    Rng speed(derive_seed(seed, {0x73706421u, s}));
                    p.speed_scale = speed.log_uniform(0.7, 1.4);
                }
                profiles.push_back(p);
            }
            const auto cohort = simulate_cohort(truth, pins, profiles, entries_per_pin);
            const auto header = metadata_header("simulate", {{"seed", std::to_string(seed)},
                                                             {"noise_sd", text::format_exact(profile.noise_sd)},
                                                             {"quantization", text::format_exact(profile.quantization)},
                                                             {"layout", layout.name()}, {"pattern", pattern}});
            emit(out_path, header + format_observed_entries(cohort));
            if (!log_out.empty())
                emit(log_out, header + export_keystroke_log(cohort, pat));
        } else if (*eval_cmd || *cm_cmd) {
            ExperimentPlan plan;
            if (!plan_path.empty())
                plan = parse_plan(text::read_file(plan_path));
            if (*cm_cmd) {
                plan.mode = ExperimentMode::Countermeasure;
                plan.circular_radius = radius;
            } else {
                plan.mode = parse_mode(eval_mode);
            }
            if (eval_length)
                plan.pin_length = *eval_length;
            if (eval_seed)
                plan.seed = *eval_seed;
            for (const auto& s : settings) {
                const auto eq = s.find('=');
                if (eq == std::string::npos)
                    throw Error("--set expects key=value, got '" + s + "'");
                apply_plan_setting(plan, std::string_view(s).substr(0, eq), std::string_view(s).substr(eq + 1));
            }
            Workspace ws;
            const auto report = run_experiment(plan, &ws);
            emit(out_path, format_report(report, timings));
            if (!outcomes_path.empty())
                emit(outcomes_path, metadata_header("eval", {{"mode", std::string(mode_name(plan.mode))},
                                                             {"seed", std::to_string(plan.seed)}})
                                        + format_outcomes(report.outcomes));
            for (const auto& n : report.notes)
                std::cerr << n << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "pinforge: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
