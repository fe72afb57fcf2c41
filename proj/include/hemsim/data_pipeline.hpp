#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "hemsim/device_models.hpp"
#include "hemsim/error.hpp"
#include "hemsim/scenario_config.hpp"

namespace hemsim {

// Weather per step. timestamps are ISO-8601 "YYYY-MM-DDTHH:MM:SS".
struct WeatherSeries {
    double dt_hours = 1.0 / 6.0;
    std::vector<std::string> timestamps;
    std::vector<double> ghi;        // W/m²
    std::vector<double> t_ambient;  // °C
    std::vector<double> wind;       // m/s

    std::size_t size() const { return ghi.size(); }
    bool operator==(const WeatherSeries&) const = default;
};

// Desired prioritized load energy per profile and step, kWh.
struct LoadSeries {
    double dt_hours = 1.0 / 6.0;
    std::vector<std::string> timestamps;
    std::vector<std::string> profile_ids;
    std::vector<std::vector<LoadVector>> energy;  // [profile][step]

    std::size_t steps() const { return energy.empty() ? 0 : energy.front().size(); }
    std::optional<std::size_t> find(const std::string& id) const
    {
        auto it = std::find(profile_ids.begin(), profile_ids.end(), id);
        if (it == profile_ids.end()) return std::nullopt;
        return static_cast<std::size_t>(it - profile_ids.begin());
    }
    bool operator==(const LoadSeries&) const = default;
};

struct LoadWarnings {
    std::size_t clamped_negatives = 0;
    std::vector<std::string> unmapped_columns;
    std::vector<int> empty_priorities;  // 1-based
};

// Column name -> priority index 0..7, or -1 for an explicitly ignored column.
struct CircuitMapping {
    std::map<std::string, int> columns;

    bool operator==(const CircuitMapping&) const = default;
};

namespace csv {

inline std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && (std::isspace(static_cast<unsigned char>(s[b])) || s[b] == '"')) ++b;
    while (e > b && (std::isspace(static_cast<unsigned char>(s[e - 1])) || s[e - 1] == '"')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    bool quoted = false;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i < line.size() && line[i] == '"') quoted = !quoted;
        if (i == line.size() || (line[i] == ',' && !quoted)) {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline std::string lower(std::string s)
{
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::optional<double> number(const std::string& s)
{
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [p, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path, std::string_view what)
{
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("{} file not found: {}", what, path.string()));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Timestamps, seconds since 1970-01-01 with any UTC offset suffix dropped.

inline std::int64_t civil_seconds(int y, unsigned mo, unsigned d, int h, int mi, int s)
{
    using namespace std::chrono;
    const sys_days day{year{y} / month{mo} / std::chrono::day{d}};
    return day.time_since_epoch().count() * 86400LL + h * 3600LL + mi * 60LL + s;
}

inline std::optional<std::int64_t> parse_timestamp(std::string_view s)
{
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    const std::string t(s);
    const int n = std::sscanf(t.c_str(), "%d-%d-%d%*[T ]%d:%d:%d", &y, &mo, &d, &h, &mi, &sec);
    if (n < 3) return std::nullopt;
    if (n == 3 && t.size() > 10) return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec > 60)
        return std::nullopt;
    return civil_seconds(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, sec);
}

inline std::string format_timestamp(std::int64_t t)
{
    using namespace std::chrono;
    const std::int64_t days_since = (t >= 0 ? t : t - 86399) / 86400;
    const std::int64_t rem = t - days_since * 86400;
    const year_month_day ymd{sys_days{days{days_since}}};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), rem / 3600,
                       (rem % 3600) / 60, rem % 60);
}

namespace detail {

inline std::int64_t step_seconds(double dt_hours)
{
    const double s = dt_hours * 3600.0;
    const auto r = static_cast<std::int64_t>(std::llround(s));
    if (r <= 0 || std::abs(s - static_cast<double>(r)) > 1e-6)
        throw DataError(fmt::format("dt_hours={} is not a whole number of seconds", dt_hours));
    return r;
}

// Native spacing; errors name the offending data row (1-based, header excluded).
inline std::int64_t uniform_spacing(const std::vector<std::int64_t>& t, std::string_view what)
{
    if (t.size() < 2) throw DataError(fmt::format("{}: at least two rows required", what));
    const std::int64_t s = t[1] - t[0];
    for (std::size_t i = 1; i < t.size(); ++i) {
        const std::int64_t diff = t[i] - t[i - 1];
        if (diff <= 0) throw DataError(fmt::format("{}: non-monotonic timestamps at row {}", what, i + 1));
        if (diff > s) throw DataError(fmt::format("{}: gap larger than one native step at row {}", what, i + 1));
        if (diff != s) throw DataError(fmt::format("{}: irregular spacing at row {}", what, i + 1));
    }
    if (s <= 0) throw DataError(fmt::format("{}: non-monotonic timestamps at row 2", what));
    return s;
}

inline double interpolate(const std::vector<std::int64_t>& t, const std::vector<double>& v, std::int64_t at)
{
    auto it = std::upper_bound(t.begin(), t.end(), at);
    if (it == t.begin()) return v.front();
    if (it == t.end()) return v.back();
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    const double w = static_cast<double>(at - t[i - 1]) / static_cast<double>(t[i] - t[i - 1]);
    return v[i - 1] + w * (v[i] - v[i - 1]);
}

inline std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                              std::initializer_list<std::string_view> aliases)
{
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string h = csv::lower(header[i]);
        for (auto a : aliases)
            if (h == a) return i;
    }
    return std::nullopt;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weather

inline constexpr int kMaxForwardFill = 3;

/// Reads NSRDB-style weather (metadata lines before the header are skipped;
/// Year/Month/Day/Hour[/Minute] or a single timestamp column) and resamples
/// to `dt_hours`: GHI and wind are block means, temperature is interpolated
/// at each target timestamp. A native step coarser than the target is an
/// error unless `allow_upsample`, which interpolates all three linearly.
inline WeatherSeries load_weather_csv(const std::filesystem::path& path, double dt_hours, bool allow_upsample = false)
{
    const std::string what = fmt::format("weather {}", path.filename().string());
    const auto lines = csv::read_lines(path, "weather");

    std::size_t header_row = lines.size();
    std::vector<std::string> header;
    for (std::size_t r = 0; r < std::min<std::size_t>(lines.size(), 16); ++r) {
        auto fields = csv::split(lines[r]);
        if (detail::find_column(fields, {"ghi", "ghi_w_m2"})) {
            header_row = r;
            header = std::move(fields);
            break;
        }
    }
    if (header_row == lines.size()) throw DataError(fmt::format("{}: missing column GHI", what));
    const auto c_ghi = detail::find_column(header, {"ghi", "ghi_w_m2"});
    const auto c_temp = detail::find_column(header, {"temperature", "t_ambient", "temp_air", "air temperature"});
    const auto c_wind = detail::find_column(header, {"wind speed", "wind_speed", "wind"});
    if (!c_temp) throw DataError(fmt::format("{}: missing column Temperature", what));
    if (!c_wind) throw DataError(fmt::format("{}: missing column Wind Speed", what));
    const auto c_ts = detail::find_column(header, {"timestamp", "time", "datetime", "time_stamp"});
    const auto c_year = detail::find_column(header, {"year"});
    const auto c_month = detail::find_column(header, {"month"});
    const auto c_day = detail::find_column(header, {"day"});
    const auto c_hour = detail::find_column(header, {"hour"});
    const auto c_min = detail::find_column(header, {"minute"});
    if (!c_ts && !(c_year && c_month && c_day && c_hour))
        throw DataError(fmt::format("{}: missing column timestamp (or Year/Month/Day/Hour)", what));

    std::vector<std::int64_t> t;
    std::vector<double> ghi, temp, wind;
    std::array<int, 3> fill_run{};
    for (std::size_t r = header_row + 1; r < lines.size(); ++r) {
        if (csv::trim(lines[r]).empty()) continue;
        const auto f = csv::split(lines[r]);
        const std::size_t row = t.size() + 1;
        if (f.size() < header.size()) throw DataError(fmt::format("{}: malformed row {}", what, row));
        std::optional<std::int64_t> ts;
        if (c_ts) {
            ts = parse_timestamp(f[*c_ts]);
        } else {
            auto num = [&](std::optional<std::size_t> c) { return c ? csv::number(f[*c]) : std::optional<double>(0.0); };
            const auto y = num(c_year), mo = num(c_month), d = num(c_day), h = num(c_hour), mi = num(c_min);
            if (y && mo && d && h && mi)
                ts = civil_seconds(static_cast<int>(*y), static_cast<unsigned>(*mo), static_cast<unsigned>(*d),
                                   static_cast<int>(*h), static_cast<int>(*mi), 0);
        }
        if (!ts) throw DataError(fmt::format("{}: bad timestamp at row {}", what, row));
        t.push_back(*ts);

        const std::array<std::size_t, 3> cols{*c_ghi, *c_temp, *c_wind};
        std::array<std::vector<double>*, 3> dst{&ghi, &temp, &wind};
        for (std::size_t k = 0; k < 3; ++k) {
            auto v = csv::number(f[cols[k]]);
            if (v && (std::isnan(*v) || *v <= -9999.0)) v.reset();
            if (!v) {
                if (dst[k]->empty() || ++fill_run[k] > kMaxForwardFill)
                    throw DataError(fmt::format("{}: missing value in column '{}' at row {} (forward-fill limit {})",
                                                what, header[cols[k]], row, kMaxForwardFill));
                dst[k]->push_back(dst[k]->back());
            } else {
                fill_run[k] = 0;
                dst[k]->push_back(*v);
            }
        }
    }

    const std::int64_t native = detail::uniform_spacing(t, what);
    const std::int64_t target = detail::step_seconds(dt_hours);
    WeatherSeries w;
    w.dt_hours = dt_hours;
    if (native <= target) {
        if (target % native != 0)
            throw DataError(fmt::format("{}: target step {} s is not a multiple of native step {} s", what, target,
                                        native));
        const std::size_t f = static_cast<std::size_t>(target / native);
        for (std::size_t b = 0; b + f <= t.size(); b += f) {
            double g = 0.0, ws = 0.0;
            for (std::size_t i = b; i < b + f; ++i) {
                g += ghi[i];
                ws += wind[i];
            }
            w.timestamps.push_back(format_timestamp(t[b]));
            w.ghi.push_back(g / static_cast<double>(f));
            w.wind.push_back(ws / static_cast<double>(f));
            w.t_ambient.push_back(detail::interpolate(t, temp, t[b]));
        }
    } else {
        if (!allow_upsample)
            throw DataError(fmt::format("{}: native resolution coarser than target ({} s > {} s); use allow-upsample",
                                        what, native, target));
        for (std::int64_t at = t.front(); at <= t.back(); at += target) {
            w.timestamps.push_back(format_timestamp(at));
            w.ghi.push_back(detail::interpolate(t, ghi, at));
            w.t_ambient.push_back(detail::interpolate(t, temp, at));
            w.wind.push_back(detail::interpolate(t, wind, at));
        }
    }
    for (auto& g : w.ghi) g = std::max(0.0, g);
    for (auto& v : w.wind) v = std::max(0.0, v);
    return w;
}

// ---------------------------------------------------------------------------
// Circuit mapping

inline std::optional<int> parse_priority(std::string s)
{
    s = csv::lower(csv::trim(s));
    if (s == "ignore" || s == "-") return -1;
    if (!s.empty() && s[0] == 'p') s = s.substr(1);
    const auto v = csv::number(s);
    if (!v || *v < 1 || *v > 8 || *v != std::floor(*v)) return std::nullopt;
    return static_cast<int>(*v) - 1;
}

inline CircuitMapping parse_circuit_mapping(const std::vector<std::string>& lines, std::string_view what)
{
    CircuitMapping m;
    bool first = true;
    for (std::size_t r = 0; r < lines.size(); ++r) {
        const std::string line = csv::trim(lines[r]);
        if (line.empty() || line[0] == '#') continue;
        const auto f = csv::split(line);
        if (f.size() != 2) throw ParseError(fmt::format("{}: line {}: expected 'column,priority'", what, r + 1));
        if (std::exchange(first, false) && csv::lower(f[0]) == "column") continue;
        const auto p = parse_priority(f[1]);
        if (!p) throw ParseError(fmt::format("{}: line {}: bad priority '{}'", what, r + 1, f[1]));
        if (m.columns.count(f[0]) && m.columns[f[0]] != *p)
            throw ValidationError(fmt::format("{}: column '{}' mapped to two priorities", what, f[0]));
        m.columns[f[0]] = *p;
    }
    return m;
}

inline CircuitMapping load_circuit_mapping(const std::filesystem::path& path)
{
    return parse_circuit_mapping(csv::read_lines(path, "circuit map"), path.string());
}

/// Stand-in grouping of Pecan Street circuit columns; data/circuit_map.csv
/// holds the same table. AC and heating circuits are ignored because the
/// thermal model supplies the AC load.
inline CircuitMapping default_circuit_mapping()
{
    static const char* const kTable[] = {
        "refrigerator1,P1", "refrigerator2,P1", "freezer1,P1",
        "lights_plugs1,P2", "lights_plugs2,P2", "lights_plugs3,P2", "lights_plugs4,P2",
        "kitchenapp1,P3", "kitchenapp2,P3", "microwave1,P3", "oven1,P3", "oven2,P3", "range1,P3",
        "bedroom1,P4", "bedroom2,P4", "bedroom3,P4", "livingroom1,P4", "livingroom2,P4", "office1,P4",
        "dishwasher1,P5", "disposal1,P5",
        "clotheswasher1,P6", "clotheswasher_dryg1,P6", "drye1,P6", "dryg1,P6",
        "waterheater1,P7", "waterheater2,P7", "pool1,P7", "poolpump1,P7", "pump1,P7", "sprinkler1,P7",
        "wellpump1,P7",
        "car1,P8", "car2,P8",
        "P1,P1", "P2,P2", "P3,P3", "P4,P4", "P5,P5", "P6,P6", "P7,P7", "P8,P8",
        "grid,ignore", "solar,ignore", "solar2,ignore", "battery1,ignore", "air1,ignore", "air2,ignore",
        "air3,ignore", "airwindowunit1,ignore", "furnace1,ignore", "furnace2,ignore", "heater1,ignore",
        "leg1v,ignore", "leg2v,ignore",
    };
    std::vector<std::string> lines(std::begin(kTable), std::end(kTable));
    return parse_circuit_mapping(lines, "built-in circuit map");
}

// ---------------------------------------------------------------------------
// Loads

inline constexpr double kNegativeClamp = 0.01;  // kW

/// Reads Pecan-Street-style circuit power (kW, one timestamp column, an
/// optional dataid column) and converts to per-step prioritized energy by
/// overlap-weighted averaging. Empty cells read as 0 kW.
inline LoadSeries load_pecan_csv(const std::filesystem::path& path, const CircuitMapping& mapping, double dt_hours,
                                 LoadWarnings* warnings = nullptr, bool allow_upsample = false)
{
    const std::string what = fmt::format("loads {}", path.filename().string());
    const auto lines = csv::read_lines(path, "loads");
    if (lines.empty()) throw DataError(fmt::format("{}: empty file", what));
    const auto header = csv::split(lines[0]);
    const auto c_ts = detail::find_column(header, {"localminute", "local_15min", "local_1min", "timestamp", "time",
                                                   "datetime", "time_stamp"});
    if (!c_ts) throw DataError(fmt::format("{}: missing column timestamp", what));
    const auto c_id = detail::find_column(header, {"dataid", "data_id"});

    LoadWarnings warn;
    std::vector<int> prio(header.size(), -1);
    std::array<bool, kPriorities> used{};
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == *c_ts || (c_id && c == *c_id)) continue;
        auto it = mapping.columns.find(header[c]);
        if (it == mapping.columns.end()) {
            warn.unmapped_columns.push_back(header[c]);
            continue;
        }
        prio[c] = it->second;
        if (it->second >= 0) used[static_cast<std::size_t>(it->second)] = true;
    }
    for (std::size_t j = 0; j < kPriorities; ++j)
        if (!used[j]) warn.empty_priorities.push_back(static_cast<int>(j) + 1);

    struct Profile {
        std::vector<std::int64_t> t;
        std::vector<LoadVector> kw;
    };
    std::map<std::string, Profile> profiles;
    std::vector<std::string> order;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (csv::trim(lines[r]).empty()) continue;
        const auto f = csv::split(lines[r]);
        if (f.size() != header.size())
            throw DataError(fmt::format("{}: malformed row {} ({} fields, expected {})", what, r, f.size(),
                                        header.size()));
        const auto ts = parse_timestamp(f[*c_ts]);
        if (!ts) throw DataError(fmt::format("{}: bad timestamp at row {}", what, r));
        const std::string id = c_id ? f[*c_id] : std::string("1");
        auto [it, fresh] = profiles.try_emplace(id);
        if (fresh) order.push_back(id);
        LoadVector kw{};
        for (std::size_t c = 0; c < f.size(); ++c) {
            if (prio[c] < 0) continue;
            if (f[c].empty()) continue;
            auto v = csv::number(f[c]);
            if (!v) throw DataError(fmt::format("{}: malformed value '{}' at row {}, column '{}'", what, f[c], r,
                                                header[c]));
            if (*v < 0.0) {
                if (*v <= -kNegativeClamp)
                    throw DataError(fmt::format("{}: negative power {} kW at row {}, column '{}'", what, *v, r,
                                                header[c]));
                ++warn.clamped_negatives;
                v = 0.0;
            }
            kw[static_cast<std::size_t>(prio[c])] += *v;
        }
        it->second.t.push_back(*ts);
        it->second.kw.push_back(kw);
    }
    if (order.empty()) throw DataError(fmt::format("{}: no data rows", what));

    const std::int64_t target = detail::step_seconds(dt_hours);
    LoadSeries out;
    out.dt_hours = dt_hours;
    std::size_t steps = std::numeric_limits<std::size_t>::max();
    for (const auto& id : order) {
        const Profile& p = profiles.at(id);
        const std::int64_t native = detail::uniform_spacing(p.t, fmt::format("{} dataid {}", what, id));
        if (native > target && !allow_upsample)
            throw DataError(fmt::format("{}: native resolution coarser than target ({} s > {} s); use allow-upsample",
                                        what, native, target));
        const std::int64_t t0 = p.t.front();
        const std::int64_t span = static_cast<std::int64_t>(p.t.size()) * native;
        const std::size_t n = static_cast<std::size_t>(span / target);
        std::vector<LoadVector> e(n, LoadVector{});
        for (std::size_t i = 0; i < p.t.size(); ++i) {
            const std::int64_t a = p.t[i] - t0, b = a + native;
            for (std::int64_t k = a / target; k < static_cast<std::int64_t>(n) && k * target < b; ++k) {
                const std::int64_t lo = std::max(a, k * target), hi = std::min(b, (k + 1) * target);
                if (hi <= lo) continue;
                const double hours = static_cast<double>(hi - lo) / 3600.0;
                for (std::size_t j = 0; j < kPriorities; ++j) e[static_cast<std::size_t>(k)][j] += p.kw[i][j] * hours;
            }
        }
        if (out.timestamps.empty())
            for (std::size_t k = 0; k < n; ++k) out.timestamps.push_back(format_timestamp(t0 + static_cast<std::int64_t>(k) * target));
        steps = std::min(steps, n);
        out.profile_ids.push_back(id);
        out.energy.push_back(std::move(e));
    }
    for (auto& e : out.energy) e.resize(steps);
    out.timestamps.resize(steps);
    if (warnings) *warnings = std::move(warn);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic disturbances
//
// Generator: std::mt19937_64 seeded with the integer seed. Uniforms are the
// top 53 bits of a draw scaled to [0, 1); normals use the Marsaglia polar
// method on those uniforms. Draw order: per day a cloud factor and a
// temperature offset, then per step GHI, temperature and wind noise; then
// loads profile by profile, step by step, P1..P8.

class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double normal()
    {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        return u * m;
    }

private:
    std::mt19937_64 gen_;
    std::optional<double> spare_;
};

struct SyntheticData {
    WeatherSeries weather;
    LoadSeries loads;
};

inline double occupancy_factor(const SyntheticSpec& s, double hour)
{
    if (hour < 6.0) return s.night_factor;
    if (hour >= 17.0 && hour < 22.0) return s.evening_factor;
    return 1.0;
}

inline SyntheticData synth_disturbances(const SyntheticSpec& spec, std::uint64_t seed, double dt_hours = 1.0 / 6.0,
                                        std::size_t profiles = 1)
{
    if (spec.days <= 0) throw ValidationError("synthetic days > 0 violated");
    if (profiles == 0) throw ValidationError("synthetic profiles > 0 violated");
    const std::int64_t step_s = detail::step_seconds(dt_hours);
    if (86400 % step_s != 0) throw ValidationError("synthetic dt_hours must divide one day");
    const auto t0 = parse_timestamp(spec.start);
    if (!t0) throw ValidationError(fmt::format("synthetic start '{}' is not an ISO-8601 timestamp", spec.start));

    const std::size_t per_day = static_cast<std::size_t>(86400 / step_s);
    const std::size_t n = per_day * static_cast<std::size_t>(spec.days);
    SynthRng rng(seed);
    SyntheticData out;
    WeatherSeries& w = out.weather;
    w.dt_hours = dt_hours;
    w.timestamps.reserve(n);
    w.ghi.reserve(n);
    w.t_ambient.reserve(n);
    w.wind.reserve(n);

    const double day_len = spec.sunset_hour - spec.sunrise_hour;
    for (int day = 0; day < spec.days; ++day) {
        const double cloud = 1.0 - spec.cloudiness * rng.uniform();
        const double t_offset = rng.normal();
        for (std::size_t k = 0; k < per_day; ++k) {
            const double hour = static_cast<double>(k) * dt_hours;
            const double sun = day_len > 0.0 ? std::sin(std::numbers::pi * (hour - spec.sunrise_hour) / day_len) : 0.0;
            const double noise = std::max(0.0, 1.0 + 0.1 * rng.normal());
            const double in_day = (hour > spec.sunrise_hour && hour < spec.sunset_hour) ? 1.0 : 0.0;
            w.ghi.push_back(std::max(0.0, spec.peak_ghi * std::max(0.0, sun) * in_day * cloud * noise));
            w.t_ambient.push_back(spec.t_mean + 0.5 * spec.t_range * std::cos(2.0 * std::numbers::pi * (hour - 15.0) / 24.0) +
                                  t_offset + 0.3 * rng.normal());
            w.wind.push_back(std::max(0.0, spec.wind_mean * (1.0 + 0.3 * rng.normal())));
            w.timestamps.push_back(format_timestamp(*t0 + static_cast<std::int64_t>(day * per_day + k) * step_s));
        }
    }

    LoadSeries& l = out.loads;
    l.dt_hours = dt_hours;
    l.timestamps = w.timestamps;
    const double sig = spec.load_sigma;
    for (std::size_t p = 0; p < profiles; ++p) {
        l.profile_ids.push_back(std::to_string(p + 1));
        std::vector<LoadVector> e(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double occ = occupancy_factor(spec, static_cast<double>(k % per_day) * dt_hours);
            for (std::size_t j = 0; j < kPriorities; ++j)
                e[k][j] = spec.mean_kw[j] * occ * std::exp(sig * rng.normal() - 0.5 * sig * sig) * dt_hours;
        }
        l.energy.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV writers (readable back by the loaders above)

inline void write_weather_csv(const WeatherSeries& w, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    out << "timestamp,GHI,Temperature,Wind Speed\n";
    for (std::size_t k = 0; k < w.size(); ++k)
        out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", w.timestamps[k], w.ghi[k], w.t_ambient[k], w.wind[k]);
}

/// Average power per priority (kW) in columns P1..P8.
inline void write_loads_csv(const LoadSeries& l, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    out << "timestamp,dataid,P1,P2,P3,P4,P5,P6,P7,P8\n";
    for (std::size_t p = 0; p < l.profile_ids.size(); ++p)
        for (std::size_t k = 0; k < l.steps(); ++k) {
            out << l.timestamps[k] << ',' << l.profile_ids[p];
            for (double e : l.energy[p][k]) out << fmt::format(",{:.17g}", e / l.dt_hours);
            out << '\n';
        }
}

// ---------------------------------------------------------------------------
// Scenario disturbances aligned to the horizon

/// Exogenous inputs indexed by step, loads flattened as [step][house].
struct DisturbanceSeries {
    std::size_t steps = 0;
    std::size_t houses = 0;
    std::vector<std::string> timestamps;
    std::vector<double> ghi, t_ambient, wind;
    std::vector<LoadVector> loads;

    std::span<const LoadVector> desired(std::size_t k) const { return {loads.data() + k * houses, houses}; }
    bool operator==(const DisturbanceSeries&) const = default;
};

/// Profile of each house: data_id (or the house id) when present; otherwise
/// the single profile, or the profile at the house index modulo the count.
inline std::vector<std::size_t> assign_profiles(const std::vector<HouseConfig>& houses, const LoadSeries& loads)
{
    std::vector<std::size_t> idx(houses.size());
    for (std::size_t i = 0; i < houses.size(); ++i) {
        const std::string key = houses[i].data_id.empty() ? houses[i].id : houses[i].data_id;
        if (auto f = loads.find(key))
            idx[i] = *f;
        else if (!houses[i].data_id.empty())
            throw DataError(fmt::format("house '{}': load profile '{}' not found", houses[i].id, key));
        else
            idx[i] = i % loads.profile_ids.size();
    }
    return idx;
}

inline DisturbanceSeries align_disturbances(const WeatherSeries& w, const LoadSeries& l,
                                            const std::vector<HouseConfig>& houses, std::size_t horizon)
{
    if (w.size() < horizon)
        throw DataError(fmt::format("disturbance shorter than horizon (weather {} < {})", w.size(), horizon));
    if (l.steps() < horizon)
        throw DataError(fmt::format("disturbance shorter than horizon (loads {} < {})", l.steps(), horizon));
    DisturbanceSeries d;
    d.steps = horizon;
    d.houses = houses.size();
    d.timestamps.assign(w.timestamps.begin(), w.timestamps.begin() + static_cast<std::ptrdiff_t>(horizon));
    d.ghi.assign(w.ghi.begin(), w.ghi.begin() + static_cast<std::ptrdiff_t>(horizon));
    d.t_ambient.assign(w.t_ambient.begin(), w.t_ambient.begin() + static_cast<std::ptrdiff_t>(horizon));
    d.wind.assign(w.wind.begin(), w.wind.begin() + static_cast<std::ptrdiff_t>(horizon));
    const auto idx = assign_profiles(houses, l);
    d.loads.resize(horizon * houses.size());
    for (std::size_t k = 0; k < horizon; ++k)
        for (std::size_t i = 0; i < houses.size(); ++i) d.loads[k * houses.size() + i] = l.energy[idx[i]][k];
    return d;
}

/// Loads or generates the scenario's disturbances. `seed` overrides the
/// synthetic spec's seed when given.
inline DisturbanceSeries load_disturbances(const ScenarioConfig& s, std::optional<std::uint64_t> seed = std::nullopt,
                                           LoadWarnings* warnings = nullptr)
{
    const auto& src = s.disturbances;
    if (src.synthetic) {
        const std::size_t profiles =
            src.synthetic->profiles > 0 ? static_cast<std::size_t>(src.synthetic->profiles) : s.houses.size();
        const SyntheticData data =
            synth_disturbances(*src.synthetic, seed.value_or(src.synthetic->seed), s.dt_hours, profiles);
        return align_disturbances(data.weather, data.loads, s.houses, s.horizon_steps);
    }
    const WeatherSeries w = load_weather_csv(src.weather_path, s.dt_hours, src.allow_upsample);
    const CircuitMapping map =
        src.circuit_map_path.empty() ? default_circuit_mapping() : load_circuit_mapping(src.circuit_map_path);
    const LoadSeries l = load_pecan_csv(src.loads_path, map, s.dt_hours, warnings, src.allow_upsample);
    return align_disturbances(w, l, s.houses, s.horizon_steps);
}

}  // namespace hemsim
