#include "pinforge/strength.hpp"

#include "pinforge/error.hpp"
#include "pinforge/parallel.hpp"
#include "pinforge/rng.hpp"
#include "pinforge/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace pinforge {

std::pair<std::size_t, std::size_t> band_range(int band)
{
    std::size_t lo = 1;
    for (int i = 1; i < band; ++i)
        lo *= 10;
    return {lo - 1, lo * 10 - 1};
}

namespace {

void require_complete(const TimingDictionary& dict)
{
    if (!dict.complete())
        throw Error("strength measurement needs a complete (unconstrained) dictionary");
    if (dict.pin_length() < 2)
        throw Error("strength measurement needs PIN length of at least 2");
}

std::vector<double> unit_rows(const TimingDictionary& dict)
{
    const auto n = dict.size();
    const auto dim = dict.dim();
    std::vector<double> unit(n * dim);
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = dict.row(r);
        double ss = 0.0;
        for (double v : row)
            ss += v * v;
        const double norm = std::sqrt(ss);
        for (std::size_t i = 0; i < dim; ++i)
            unit[r * dim + i] = row[i] / norm;
    }
    return unit;
}

double dot(const double* a, const double* b, std::size_t dim)
{
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
        s += a[i] * b[i];
    return s;
}

}  // namespace

StrengthProfile strength_measure(const TimingDictionary& dict, const StrengthOptions& options)
{
    require_complete(dict);
    const int l = dict.pin_length();
    if (l > options.max_exact_length && !options.allow_full)
        throw Error("exact strength measurement for length " + std::to_string(l)
                    + " is quadratic in 10^l; enable the full run explicitly or use the sampling estimator");

    const auto n = dict.size();
    const auto dim = dict.dim();
    const auto unit = unit_rows(dict);

    StrengthProfile profile;
    profile.pin_length = l;
    profile.g.assign(n * static_cast<std::size_t>(l), 0.0);

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> cos(n - 1);
        for (std::size_t i = begin; i < end; ++i) {
            const double* ui = unit.data() + i * dim;
            std::size_t k = 0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i)
                    cos[k++] = std::clamp(dot(ui, unit.data() + j * dim, dim), -1.0, 1.0);

            // Partition so that every band holds exactly its sorted ranks;
            // band means do not depend on the order within a band.
            for (int band = l - 1; band >= 1; --band) {
                const auto upper = band_range(band + 1).second;
                const auto split = band_range(band).second;
                std::nth_element(cos.begin(), cos.begin() + static_cast<std::ptrdiff_t>(split),
                                 cos.begin() + static_cast<std::ptrdiff_t>(upper), std::greater<>());
            }
            double* out = profile.g.data() + i * static_cast<std::size_t>(l);
            for (int band = 1; band <= l; ++band) {
                const auto [lo, hi] = band_range(band);
                double s = 0.0;
                for (std::size_t r = lo; r < hi; ++r)
                    s += cos[r];
                out[band - 1] = s / static_cast<double>(hi - lo);
            }
        }
    }, 64);
    return profile;
}

StrengthProfile strength_estimate(const TimingDictionary& dict, std::uint64_t samples, std::uint64_t seed)
{
    require_complete(dict);
    if (samples < 1)
        throw Error("sampling estimator needs at least one sample per PIN");
    const int l = dict.pin_length();
    const auto n = dict.size();
    const auto dim = dict.dim();
    const auto unit = unit_rows(dict);
    const auto neighbors = static_cast<double>(n - 1);
    const auto m = static_cast<std::size_t>(samples);

    StrengthProfile profile;
    profile.pin_length = l;
    profile.approximate = true;
    profile.samples_per_pin = samples;
    profile.g.assign(n * static_cast<std::size_t>(l), 0.0);

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> cos(m);
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(derive_seed(seed, {0x5354u, i}));
            const double* ui = unit.data() + i * dim;
            for (auto& c : cos) {
                auto j = static_cast<std::size_t>(rng.below(n - 1));
                if (j >= i)
                    ++j;
                c = std::clamp(dot(ui, unit.data() + j * dim, dim), -1.0, 1.0);
            }
            std::sort(cos.begin(), cos.end(), std::greater<>());

            std::vector<double> sum(static_cast<std::size_t>(l), 0.0);
            std::vector<std::size_t> count(static_cast<std::size_t>(l), 0);
            int band = 1;
            for (std::size_t s = 0; s < m; ++s) {
                const auto rank = static_cast<std::size_t>((static_cast<double>(s) + 0.5) * neighbors / static_cast<double>(m));
                while (band < l && rank >= band_range(band).second)
                    ++band;
                sum[static_cast<std::size_t>(band - 1)] += cos[s];
                ++count[static_cast<std::size_t>(band - 1)];
            }
            double* out = profile.g.data() + i * static_cast<std::size_t>(l);
            for (int b = 1; b <= l; ++b) {
                const auto u = static_cast<std::size_t>(b - 1);
                if (count[u] > 0) {
                    out[u] = sum[u] / static_cast<double>(count[u]);
                } else {
                    // Band narrower than the sample spacing: use the sample
                    // nearest to the band's middle rank.
                    const auto [lo, hi] = band_range(b);
                    const double mid = 0.5 * static_cast<double>(lo + hi);
                    const auto s = static_cast<std::size_t>(mid / neighbors * static_cast<double>(m));
                    out[u] = cos[std::min(s, m - 1)];
                }
            }
        }
    }, 64);
    return profile;
}

std::vector<std::uint64_t> LevelPartition::members(int lv) const
{
    if (lv < 1 || lv > level_count())
        throw Error("level out of range");
    std::size_t start = 0;
    for (int k = 1; k < lv; ++k)
        start += sizes[static_cast<std::size_t>(k - 1)];
    return {order.begin() + static_cast<std::ptrdiff_t>(start),
            order.begin() + static_cast<std::ptrdiff_t>(start + sizes[static_cast<std::size_t>(lv - 1)])};
}

LevelPartition partition_levels(const StrengthProfile& profile)
{
    const int l = profile.pin_length;
    if (l < 2)
        throw Error("partition needs PIN length of at least 2");
    const auto n = pin_space_size(l);
    if (profile.size() != n)
        throw Error("incomplete strength profile: expected " + std::to_string(n) + " tuples, got "
                    + std::to_string(profile.size()));

    LevelPartition part;
    part.pin_length = l;
    part.order.resize(n);
    std::iota(part.order.begin(), part.order.end(), std::uint64_t{0});
    std::stable_sort(part.order.begin(), part.order.end(), [&](std::uint64_t x, std::uint64_t y) {
        const auto tx = profile.tuple(x);
        const auto ty = profile.tuple(y);
        return std::lexicographical_compare(tx.begin(), tx.end(), ty.begin(), ty.end());
    });

    part.sizes.push_back(100);
    std::size_t size = 900;
    for (int lv = 2; lv <= l - 1; ++lv, size *= 10)
        part.sizes.push_back(size);

    part.level.assign(n, 0);
    std::size_t pos = 0;
    for (std::size_t lv = 0; lv < part.sizes.size(); ++lv)
        for (std::size_t k = 0; k < part.sizes[lv]; ++k)
            part.level[part.order[pos++]] = static_cast<std::uint8_t>(lv + 1);
    return part;
}

std::vector<LevelFrequency> frequency_analysis(const LevelPartition& partition, std::span<const FrequencyRecord> records)
{
    if (records.empty())
        throw Error("empty frequency record list");
    std::vector<LevelFrequency> out(partition.sizes.size());
    std::uint64_t total = 0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].level = static_cast<int>(k + 1);
        out[k].size = partition.sizes[k];
    }
    for (const auto& r : records) {
        if (r.pin.length() != partition.pin_length)
            throw Error("frequency record PIN " + r.pin.str() + " does not match partition length "
                        + std::to_string(partition.pin_length));
        if (r.count < 1)
            throw Error("frequency record with zero count");
        out[partition.level[r.pin.value()] - 1u].mass += r.count;
        total += r.count;
    }
    for (auto& lf : out) {
        lf.proportion = static_cast<double>(lf.mass) / static_cast<double>(total);
        lf.mean_frequency = static_cast<double>(lf.mass) / static_cast<double>(lf.size);
    }
    return out;
}

std::vector<FrequencyRecord> parse_frequency_records(std::string_view text)
{
    std::vector<FrequencyRecord> out;
    for (auto line : text::data_lines(text)) {
        const auto f = text::split(line);
        if (f.size() != 2)
            throw Error("malformed frequency record: '" + std::string(line) + "'");
        const auto count = text::parse_uint(f[1], "count");
        if (count < 1)
            throw Error("frequency record with zero count");
        out.push_back({Pin::parse(f[0]), count});
    }
    return out;
}

std::string format_strength_profile(const StrengthProfile& profile, const LevelPartition& partition)
{
    std::string out = "# pin,g1..g" + std::to_string(profile.pin_length) + ",level";
    if (profile.approximate)
        out += " (approximate: " + std::to_string(profile.samples_per_pin) + " sampled neighbors per PIN)";
    out += '\n';
    for (std::size_t i = 0; i < profile.size(); ++i) {
        out += Pin(i, profile.pin_length).str();
        for (double g : profile.tuple(i))
            out += "," + text::format_fixed(g, 6);
        out += "," + std::to_string(partition.level[i]) + "\n";
    }
    return out;
}

}  // namespace pinforge
