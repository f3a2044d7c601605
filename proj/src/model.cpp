#include "pinforge/model.hpp"

#include "pinforge/error.hpp"
#include "pinforge/text_io.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace pinforge {

void validate(const FittsModel& m)
{
    if (!std::isfinite(m.a) || !(m.a > 0.0))
        throw Error("model intercept a must be positive and finite");
    if (!std::isfinite(m.b))
        throw Error("model slope b must be finite");
}

double predict_interkey(const FittsModel& m, const KeypadLayout& layout, Key from, Key to)
{
    if (from == to)
        return m.a;
    return m.a + m.b * index_of_difficulty(layout, from, to);
}

std::array<double, 6> extended_regressors(const KeypadLayout& layout, Key from, Key to,
                                          int pair_position, int pin_length)
{
    return {1.0,
            index_of_difficulty(layout, from, to),
            pair_position == pin_length ? 1.0 : 0.0,
            pair_position == 2 ? 1.0 : 0.0,
            pair_position == 3 ? 1.0 : 0.0,
            pair_position == 4 ? 1.0 : 0.0};
}

double predict_interkey(const ExtendedModel& m, const KeypadLayout& layout, Key from, Key to,
                        int pair_position, int pin_length)
{
    const auto x = extended_regressors(layout, from, to, pair_position, pin_length);
    return m.a * x[0] + m.b * x[1] + m.c * x[2] + m.d * x[3] + m.e * x[4] + m.f * x[5];
}

double t_two_sided_p(double t, double dof)
{
    if (std::isnan(t))
        return 1.0;
    if (std::isinf(t))
        return 0.0;
    boost::math::students_t dist(dof);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    return std::clamp(p, 0.0, 1.0);
}

namespace {

// Ordinary least squares with fixed-order accumulation of the normal
// equations, so results are bitwise reproducible for a given input order.
FitReport ordinary_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 std::vector<std::string> names)
{
    const auto n = X.rows();
    const auto p = X.cols();
    if (n <= p)
        throw Error("too few samples: need more than " + std::to_string(p) + ", got " + std::to_string(n));

    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index i = 0; i < p; ++i) {
            xty(i) += X(r, i) * y(r);
            for (Eigen::Index j = 0; j < p; ++j)
                xtx(i, j) += X(r, i) * X(r, j);
        }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
    lu.setThreshold(1e-10);
    if (lu.rank() < p)
        throw Error("rank-deficient design");

    const Eigen::MatrixXd inv = lu.inverse();
    const Eigen::VectorXd beta = inv * xty;

    double rss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const double res = y(r) - X.row(r).dot(beta);
        rss += res * res;
    }
    const double dof = static_cast<double>(n - p);
    const double sigma2 = rss / dof;

    FitReport report;
    report.names = std::move(names);
    report.n_samples = static_cast<std::size_t>(n);
    report.residual_sd = std::sqrt(sigma2);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double se = std::sqrt(std::max(0.0, sigma2 * inv(i, i)));
        double t = 0.0;
        if (se > 0.0)
            t = beta(i) / se;
        else if (beta(i) != 0.0)
            t = std::copysign(std::numeric_limits<double>::infinity(), beta(i));
        report.coefficients.push_back(beta(i));
        report.standard_errors.push_back(se);
        report.t_statistics.push_back(t);
        report.p_values.push_back(t_two_sided_p(t, dof));
    }
    return report;
}

void check_sample(const TrainingSample& s)
{
    if (!std::isfinite(s.observed_dt) || !(s.observed_dt > 0.0))
        throw Error("training sample with non-positive interval");
}

}  // namespace

Fit<FittsModel> fit_fitts(std::span<const TrainingSample> samples, const KeypadLayout& layout)
{
    if (samples.size() < 3)
        throw Error("too few samples: need at least 3, got " + std::to_string(samples.size()));

    Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), 2);
    Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
    std::set<double> distinct;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        check_sample(samples[i]);
        const double id = index_of_difficulty(layout, samples[i].from, samples[i].to);
        distinct.insert(id);
        X(static_cast<Eigen::Index>(i), 0) = 1.0;
        X(static_cast<Eigen::Index>(i), 1) = id;
        y(static_cast<Eigen::Index>(i)) = samples[i].observed_dt;
    }
    if (distinct.size() < 2)
        throw Error("rank-deficient design: all samples share one index of difficulty");

    auto report = ordinary_least_squares(X, y, {"a", "b"});
    FittsModel model{report.coefficients[0], report.coefficients[1]};
    if (!(model.b >= 0.0))
        report.warnings.push_back("fitted slope b is negative");
    if (!(model.a > 0.0))
        report.warnings.push_back("fitted intercept a is not positive");
    return {model, std::move(report)};
}

Fit<ExtendedModel> fit_extended(std::span<const TrainingSample> samples, const KeypadLayout& layout,
                                int pin_length)
{
    if (pin_length < 1)
        throw Error("pin length must be positive");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), 6);
    Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        check_sample(s);
        if (!s.pair_position)
            throw Error("missing pair position in sample " + std::to_string(i));
        if (s.pin_length != pin_length || *s.pair_position < 1 || *s.pair_position > pin_length)
            throw Error("sample " + std::to_string(i) + " has a pair position outside the PIN length");
        const auto row = extended_regressors(layout, s.from, s.to, *s.pair_position, pin_length);
        for (int j = 0; j < 6; ++j)
            X(static_cast<Eigen::Index>(i), j) = row[static_cast<std::size_t>(j)];
        y(static_cast<Eigen::Index>(i)) = s.observed_dt;
    }
    auto report = ordinary_least_squares(X, y, {"a", "b", "c", "d", "e", "f"});
    const auto& c = report.coefficients;
    ExtendedModel model{c[0], c[1], c[2], c[3], c[4], c[5]};
    return {model, std::move(report)};
}

std::vector<KeystrokeSession> parse_keystroke_log(std::string_view text)
{
    std::vector<KeystrokeSession> sessions;
    std::map<std::string, std::size_t, std::less<>> index;
    for (auto line : text::data_lines(text)) {
        const auto fields = text::split(line);
        if (fields.size() != 3)
            throw Error("malformed keystroke log line: '" + std::string(line) + "'");
        if (fields[0].empty())
            throw Error("empty session id");
        const Key key = parse_key(fields[1]);
        const double t = text::parse_double(fields[2], "key-down time");
        if (t < 0.0)
            throw Error("negative key-down time in session " + std::string(fields[0]));

        auto it = index.find(fields[0]);
        if (it == index.end()) {
            it = index.emplace(std::string(fields[0]), sessions.size()).first;
            sessions.push_back({std::string(fields[0]), {}, {}});
        }
        auto& s = sessions[it->second];
        if (!s.key_down_ms.empty() && !(t > s.key_down_ms.back()))
            throw Error("non-monotonic key-down times in session " + s.id);
        s.keys.push_back(key);
        s.key_down_ms.push_back(t);
    }
    return sessions;
}

std::vector<TrainingSample> session_samples(const KeystrokeSession& session)
{
    if (session.keys.size() < 2)
        throw Error("session " + session.id + " too short: needs at least 2 keystrokes");
    const int pairs = static_cast<int>(session.keys.size()) - 1;
    std::vector<TrainingSample> out;
    out.reserve(static_cast<std::size_t>(pairs));
    for (int i = 0; i < pairs; ++i) {
        const auto u = static_cast<std::size_t>(i);
        out.push_back({session.keys[u], session.keys[u + 1],
                       session.key_down_ms[u + 1] - session.key_down_ms[u], i + 1, pairs});
    }
    return out;
}

std::vector<TrainingSample> ingest_keystroke_log(std::string_view text)
{
    std::vector<TrainingSample> out;
    for (const auto& s : parse_keystroke_log(text)) {
        auto part = session_samples(s);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

}  // namespace pinforge
