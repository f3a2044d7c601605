#pragma once

#include "pinforge/geometry.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pinforge {

/// Fitts's-law inter-keystroke model: T = a + b * log2(D/W + 1).
struct FittsModel {
    double a = 0.0;  // ms, repeated-key time
    double b = 0.0;  // ms per bit

    bool operator==(const FittsModel&) const = default;
};

/// Fitts model plus word-end (c) and word-segment (d, e, f) offsets.
struct ExtendedModel {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;
    double e = 0.0;
    double f = 0.0;

    bool operator==(const ExtendedModel&) const = default;
};

struct TrainingSample {
    Key from = Key::D0;
    Key to = Key::D0;
    double observed_dt = 0.0;  // ms
    std::optional<int> pair_position;  // 1-based; pin_length means "last digit -> ENTER"
    int pin_length = 0;
};

struct FitReport {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    std::vector<double> standard_errors;
    std::vector<double> t_statistics;
    std::vector<double> p_values;
    double residual_sd = 0.0;
    std::size_t n_samples = 0;
    std::vector<std::string> warnings;
};

template <class Model>
struct Fit {
    Model model;
    FitReport report;
};

void validate(const FittsModel& m);

double predict_interkey(const FittsModel& m, const KeypadLayout& layout, Key from, Key to);

/// Extended prediction for the key pair at `pair_position` (1-based) of a
/// PIN of length `pin_length`; position pin_length is the digit -> ENTER pair.
double predict_interkey(const ExtendedModel& m, const KeypadLayout& layout, Key from, Key to,
                        int pair_position, int pin_length);

/// Regressor row [1, I, E, S1, S2, S3] for the extended model.
std::array<double, 6> extended_regressors(const KeypadLayout& layout, Key from, Key to,
                                          int pair_position, int pin_length);

Fit<FittsModel> fit_fitts(std::span<const TrainingSample> samples, const KeypadLayout& layout);

/// Samples must carry pair_position; their pin_length must equal `pin_length`.
Fit<ExtendedModel> fit_extended(std::span<const TrainingSample> samples, const KeypadLayout& layout,
                                int pin_length);

/// Two-sided p-value of a t statistic with `dof` degrees of freedom.
double t_two_sided_p(double t, double dof);

/// One keystroke session of the key-down log.
struct KeystrokeSession {
    std::string id;
    std::vector<Key> keys;
    std::vector<double> key_down_ms;
};

/// Parses `session_id,key,key_down_ms` lines into sessions, in first-seen
/// order. Lines of one session may interleave with other sessions.
std::vector<KeystrokeSession> parse_keystroke_log(std::string_view text);

/// Consecutive key-down differences of every session as training samples.
std::vector<TrainingSample> ingest_keystroke_log(std::string_view text);
std::vector<TrainingSample> session_samples(const KeystrokeSession& session);

}  // namespace pinforge
