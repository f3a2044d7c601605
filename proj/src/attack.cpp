#include "pinforge/attack.hpp"

#include "pinforge/error.hpp"
#include "pinforge/parallel.hpp"
#include "pinforge/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace pinforge {

std::string_view metric_name(Metric m)
{
    switch (m) {
    case Metric::Cosine: return "cosine";
    case Metric::Euclidean: return "euclidean";
    case Metric::Pearson: return "pearson";
    }
    return "cosine";
}

Metric parse_metric(std::string_view name)
{
    if (name == "cosine")
        return Metric::Cosine;
    if (name == "euclidean")
        return Metric::Euclidean;
    if (name == "pearson")
        return Metric::Pearson;
    throw Error("unknown metric '" + std::string(name) + "'");
}

namespace {

void require_same_dim(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw Error("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    if (a.empty())
        throw Error("empty timing sequence");
}

double sum_squares(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return s;
}

double mean_of(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

double centered_sum_squares(std::span<const double> v, double mean)
{
    double s = 0.0;
    for (double x : v)
        s += (x - mean) * (x - mean);
    return s;
}

bool is_constant(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double cosine_from(double dot, double sumsq_a, double sumsq_b)
{
    return std::clamp(dot / std::sqrt(sumsq_a * sumsq_b), -1.0, 1.0);
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b)
{
    require_same_dim(a, b);
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        dot += a[i] * b[i];
    return cosine_from(dot, sum_squares(a), sum_squares(b));
}

double euclidean_score(std::span<const double> a, std::span<const double> b)
{
    require_same_dim(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return -std::sqrt(s);
}

double pearson_score(std::span<const double> a, std::span<const double> b)
{
    require_same_dim(a, b);
    if (is_constant(a) || is_constant(b))
        throw Error("undefined correlation: constant timing sequence");
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double cov = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        cov += (a[i] - ma) * (b[i] - mb);
    return cosine_from(cov, centered_sum_squares(a, ma), centered_sum_squares(b, mb));
}

double similarity(Metric m, std::span<const double> a, std::span<const double> b)
{
    switch (m) {
    case Metric::Cosine: return cosine_similarity(a, b);
    case Metric::Euclidean: return euclidean_score(a, b);
    case Metric::Pearson: return pearson_score(a, b);
    }
    return cosine_similarity(a, b);
}

double rank_key(double score)
{
    constexpr double grid = 1e9;
    return std::nearbyint(score * grid) / grid;
}

RankedGuessList::RankedGuessList(int pin_length, std::vector<RankedGuess> guesses)
    : pin_length_(pin_length), guesses_(std::move(guesses))
{
}

std::optional<std::size_t> RankedGuessList::rank_of(const Pin& pin) const
{
    if (pin.length() != pin_length_)
        return std::nullopt;
    for (std::size_t i = 0; i < guesses_.size(); ++i)
        if (guesses_[i].pin == pin.value())
            return i + 1;
    return std::nullopt;
}

Ranker::Ranker(const TimingDictionary& dict, Metric metric) : dict_(dict), metric_(metric)
{
    if (dict.size() == 0)
        throw Error("empty dictionary");
    const auto n = dict.size();
    if (metric == Metric::Cosine) {
        row_sumsq_.resize(n);
        for (std::size_t r = 0; r < n; ++r)
            row_sumsq_[r] = sum_squares(dict.row(r));
    } else if (metric == Metric::Pearson) {
        row_mean_.resize(n);
        row_centered_sumsq_.resize(n);
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = dict.row(r);
            if (is_constant(row))
                throw Error("undefined correlation: dictionary row for PIN " + dict.pin_at(r).str() + " is constant");
            row_mean_[r] = mean_of(row);
            row_centered_sumsq_[r] = centered_sum_squares(row, row_mean_[r]);
        }
    }
}

Ranker::Prepared Ranker::prepare(std::span<const double> observed) const
{
    if (observed.size() != dict_.dim())
        throw Error("dimension mismatch: observed " + std::to_string(observed.size()) + " intervals, dictionary has "
                    + std::to_string(dict_.dim()));
    Prepared p;
    if (metric_ == Metric::Cosine) {
        p.sumsq = sum_squares(observed);
    } else if (metric_ == Metric::Pearson) {
        if (is_constant(observed))
            throw Error("undefined correlation: constant timing sequence");
        p.mean = mean_of(observed);
        p.centered_sumsq = centered_sum_squares(observed, p.mean);
    }
    return p;
}

double Ranker::score_prepared(std::size_t r, std::span<const double> obs, const Prepared& p) const
{
    const auto row = dict_.row(r);
    switch (metric_) {
    case Metric::Cosine: {
        double dot = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i)
            dot += row[i] * obs[i];
        return cosine_from(dot, row_sumsq_[r], p.sumsq);
    }
    case Metric::Euclidean: {
        double s = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i)
            s += (row[i] - obs[i]) * (row[i] - obs[i]);
        return -std::sqrt(s);
    }
    case Metric::Pearson: {
        const double mr = row_mean_[r];
        double cov = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i)
            cov += (row[i] - mr) * (obs[i] - p.mean);
        return cosine_from(cov, row_centered_sumsq_[r], p.centered_sumsq);
    }
    }
    return 0.0;
}

double Ranker::score(std::size_t row, std::span<const double> observed) const
{
    return score_prepared(row, observed, prepare(observed));
}

RankedGuessList Ranker::rank(std::span<const double> observed) const
{
    const auto p = prepare(observed);
    const auto n = dict_.size();
    std::vector<RankedGuess> guesses(n);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r)
            guesses[r] = {dict_.pin_value_at(r), rank_key(score_prepared(r, observed, p))};
    }, 1 << 15);
    // Rows are already in ascending PIN order, so a stable sort on score
    // alone yields the ascending-PIN tie-break.
    std::stable_sort(guesses.begin(), guesses.end(),
                     [](const RankedGuess& x, const RankedGuess& y) { return x.score > y.score; });
    return RankedGuessList(dict_.pin_length(), std::move(guesses));
}

std::optional<Ranker::Placement> Ranker::place(std::span<const double> observed, const Pin& pin) const
{
    const auto p = prepare(observed);
    const auto target = dict_.find(pin);
    if (!target)
        return std::nullopt;
    const double key = rank_key(score_prepared(*target, observed, p));
    std::size_t better = 0;
    for (std::size_t r = 0; r < dict_.size(); ++r) {
        if (r == *target)
            continue;
        const double k = rank_key(score_prepared(r, observed, p));
        if (k > key || (k == key && r < *target))
            ++better;
    }
    return Placement{better + 1, key};
}

RankedGuessList rank_candidates(const TimingDictionary& dict, std::span<const double> observed, Metric metric)
{
    return Ranker(dict, metric).rank(observed);
}

TimingSequence average_entries(std::span<const TimingSequence> entries)
{
    if (entries.empty())
        throw Error("cannot average zero entries");
    const auto dim = entries.front().size();
    std::vector<double> sums;
    for (const auto& e : entries) {
        if (e.size() != dim || dim == 0)
            throw Error("dimension mismatch among averaged entries");
        double s = 0.0;
        for (double v : e)
            s += v;
        if (!(s > 0.0))
            throw Error("entry with non-positive total duration");
        sums.push_back(s);
    }
    const double k = static_cast<double>(entries.size());
    const double mean_sum = std::accumulate(sums.begin(), sums.end(), 0.0) / k;

    TimingSequence avg(dim, 0.0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const double scale = mean_sum / sums[i];
        for (std::size_t j = 0; j < dim; ++j)
            avg[j] += entries[i][j] * scale;
    }
    for (double& v : avg)
        v /= k;
    return avg;
}

double random_baseline(int pin_length, int known_digits, std::uint64_t attempts)
{
    if (known_digits < 0 || known_digits >= pin_length)
        throw Error("known digit count must be in [0, l)");
    const auto space = pin_space_size(pin_length - known_digits);
    if (attempts < 1 || attempts > space)
        throw Error("attempt count out of range");
    return static_cast<double>(attempts) / static_cast<double>(space);
}

namespace {

AttackOutcome attack_one(const Ranker& ranker, const std::string& case_id, const std::optional<Pin>& true_pin,
                         std::span<const double> sequence)
{
    AttackOutcome out;
    out.case_id = case_id;
    out.true_pin = true_pin;
    out.dictionary_size = ranker.dictionary().size();
    if (!true_pin) {
        const auto list = ranker.rank(sequence);
        out.top_guess = list.pin_at(0);
        out.score = list[0].score;
        return out;
    }
    if (auto placed = ranker.place(sequence, *true_pin)) {
        out.rank = placed->rank;
        out.score = placed->score;
    } else {
        ranker.score(0, sequence);  // still validates the dimension
        out.flag = "true PIN not in dictionary";
    }
    return out;
}

}  // namespace

std::vector<AttackOutcome> run_attack(const TimingDictionary& dict, std::span<const ObservedEntry> entries,
                                      const AttackMode& mode, Metric metric)
{
    std::vector<AttackOutcome> outcomes;
    switch (mode.kind) {
    case AttackMode::Kind::General: {
        const Ranker ranker(dict, metric);
        for (const auto& e : entries)
            outcomes.push_back(attack_one(ranker, e.case_id, e.true_pin, e.sequence));
        break;
    }
    case AttackMode::Kind::KnownDigits: {
        const auto reduced = reduce_dictionary(dict, mode.constraints);
        const Ranker ranker(reduced, metric);
        for (const auto& e : entries) {
            auto out = attack_one(ranker, e.case_id, e.true_pin, e.sequence);
            if (e.true_pin && !matches(*e.true_pin, mode.constraints))
                out.flag = "constraint inconsistent with true PIN";
            outcomes.push_back(std::move(out));
        }
        break;
    }
    case AttackMode::Kind::MultiEntry: {
        if (mode.group_size < 1)
            throw Error("multi-entry group size must be at least 1");
        std::vector<std::string> order;
        std::map<std::string, std::vector<const ObservedEntry*>> groups;
        for (const auto& e : entries) {
            const auto key = e.subject_id + '\x1f' + (e.true_pin ? e.true_pin->str() : std::string("-"));
            auto [it, inserted] = groups.try_emplace(key);
            if (inserted)
                order.push_back(key);
            it->second.push_back(&e);
        }
        const Ranker ranker(dict, metric);
        for (const auto& key : order) {
            const auto& members = groups[key];
            if (members.size() < mode.group_size)
                throw Error("group for subject '" + members.front()->subject_id + "' has " + std::to_string(members.size())
                            + " entries, fewer than k=" + std::to_string(mode.group_size));
            for (std::size_t start = 0; start + mode.group_size <= members.size(); start += mode.group_size) {
                std::vector<TimingSequence> seqs;
                for (std::size_t i = start; i < start + mode.group_size; ++i)
                    seqs.push_back(members[i]->sequence);
                const auto avg = average_entries(seqs);
                const auto case_id = mode.group_size == 1
                    ? members[start]->case_id
                    : members[start]->case_id + "+" + std::to_string(mode.group_size);
                outcomes.push_back(attack_one(ranker, case_id, members[start]->true_pin, avg));
            }
        }
        break;
    }
    }
    return outcomes;
}

std::vector<CurvePoint> success_curve(std::span<const AttackOutcome> outcomes, std::span<const std::uint64_t> xs)
{
    std::vector<CurvePoint> curve;
    if (outcomes.empty())
        return curve;
    for (auto x : xs) {
        std::size_t hits = 0;
        for (const auto& o : outcomes)
            if (o.rank >= 1 && o.rank <= x)
                ++hits;
        curve.push_back({x, static_cast<double>(hits) / static_cast<double>(outcomes.size())});
    }
    return curve;
}

std::vector<ObservedEntry> parse_observed_entries(std::string_view text)
{
    std::vector<ObservedEntry> out;
    for (auto line : text::data_lines(text)) {
        const auto f = text::split(line);
        if (f.size() < 4)
            throw Error("malformed observed entry: '" + std::string(line) + "'");
        ObservedEntry e;
        e.case_id = std::string(f[0]);
        e.subject_id = std::string(f[1]);
        if (f[2] != "-")
            e.true_pin = Pin::parse(f[2]);
        for (std::size_t i = 3; i < f.size(); ++i) {
            const double v = text::parse_double(f[i], "interval");
            if (!(v > 0.0))
                throw Error("non-positive interval in case " + e.case_id);
            e.sequence.push_back(v);
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::string format_observed_entries(std::span<const ObservedEntry> entries)
{
    std::string out = "# case_id,subject_id,true_pin,dt1,...\n";
    for (const auto& e : entries) {
        out += e.case_id + "," + e.subject_id + "," + (e.true_pin ? e.true_pin->str() : std::string("-"));
        for (double v : e.sequence)
            out += "," + text::format_exact(v);
        out += '\n';
    }
    return out;
}

std::string format_outcomes(std::span<const AttackOutcome> outcomes)
{
    std::string out = "# case_id,true_pin,rank,score\n";
    for (const auto& o : outcomes) {
        out += o.case_id + "," + (o.true_pin ? o.true_pin->str() : std::string("-")) + ","
            + (o.rank > 0 ? std::to_string(o.rank) : std::string("-")) + "," + text::format_exact(o.score) + "\n";
    }
    return out;
}

std::vector<AttackOutcome> parse_outcomes(std::string_view text)
{
    std::vector<AttackOutcome> out;
    for (auto line : text::data_lines(text)) {
        const auto f = text::split(line);
        if (f.size() != 4)
            throw Error("malformed outcome record: '" + std::string(line) + "'");
        AttackOutcome o;
        o.case_id = std::string(f[0]);
        if (f[1] != "-")
            o.true_pin = Pin::parse(f[1]);
        if (f[2] != "-")
            o.rank = static_cast<std::size_t>(text::parse_uint(f[2], "rank"));
        o.score = text::parse_double(f[3], "score");
        out.push_back(std::move(o));
    }
    return out;
}

std::string format_curve(std::span<const CurvePoint> curve)
{
    std::string out = "# x,success_rate\n";
    for (const auto& p : curve)
        out += std::to_string(p.x) + "," + text::format_exact(p.success_rate) + "\n";
    return out;
}

}  // namespace pinforge
