#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gplaplace/errors.hpp"
#include "gplaplace/field.hpp"
#include "gplaplace/gp_model.hpp"
#include "gplaplace/trajectory.hpp"

#ifndef GPLAPLACE_VERSION
#define GPLAPLACE_VERSION "0.0.0"
#endif

namespace gplaplace {

inline constexpr double kEarthRadiusKm = 6371.0;

struct IngestWarning {
    long line = 0;  // 0 when the warning concerns a whole agent
    std::string message;
};

/// Local equirectangular projection used for geographic input, and the shared time origin.
struct ProjectionInfo {
    double lon0_deg = 0.0, lat0_deg = 0.0;
    double radius_km = kEarthRadiusKm;
    double time_origin_unix = 0.0;  // seconds; trajectory times are hours after this
};

struct TrajectorySet {
    std::vector<Trajectory> trajectories;
    std::vector<IngestWarning> warnings;
    std::optional<ProjectionInfo> projection;  // set for geographic (Movebank) input
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Splits one CSV record. Fields may be double-quoted; "" inside quotes is a literal quote.
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
            else if (ch == '"') quoted = false;
            else cur += ch;
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else if (ch != '\r' && ch != '\n') {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

/// Lower case with '_', '.', and spaces mapped to '-'.
inline std::string normalize_header(const std::string& h) {
    std::string s = trim(h);
    if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF && static_cast<unsigned char>(s[1]) == 0xBB &&
        static_cast<unsigned char>(s[2]) == 0xBF)
        s = s.substr(3);
    for (auto& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (c == '_' || c == '.' || c == ' ') c = '-';
    }
    return s;
}

/// Index of the first synonym present in the header, in synonym priority order.
inline std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                              std::initializer_list<const char*> synonyms) {
    for (const char* syn : synonyms)
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == syn) return i;
    return std::nullopt;
}

inline const auto& id_synonyms() {
    static const std::initializer_list<const char*> s{"individual-local-identifier", "individual-id", "animal-id",
                                                      "bird-id", "agent-id", "tag-local-identifier", "individual",
                                                      "id"};
    return s;
}
inline const auto& time_synonyms() {
    static const std::initializer_list<const char*> s{"timestamp", "study-local-timestamp", "datetime", "date-time",
                                                      "time"};
    return s;
}
inline const auto& lon_synonyms() {
    static const std::initializer_list<const char*> s{"location-long", "location-lon", "longitude", "long", "lon",
                                                      "lng"};
    return s;
}
inline const auto& lat_synonyms() {
    static const std::initializer_list<const char*> s{"location-lat", "latitude", "lat"};
    return s;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Days since 1970-01-01 in the proleptic Gregorian calendar.
constexpr long days_from_civil(long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

}  // namespace detail

/// Seconds since the Unix epoch for "YYYY-MM-DD[(T| )hh:mm[:ss[.fff]]][Z|(+|-)hh[:]mm]".
/// Timestamps without an offset are taken as UTC.
[[nodiscard]] inline std::optional<double> parse_iso8601(const std::string& text) {
    const std::string s = detail::trim(text);
    std::size_t p = 0;
    auto read_int = [&](std::size_t digits, long& out) {
        if (p + digits > s.size()) return false;
        long v = 0;
        for (std::size_t i = 0; i < digits; ++i) {
            const char c = s[p + i];
            if (c < '0' || c > '9') return false;
            v = v * 10 + (c - '0');
        }
        out = v;
        p += digits;
        return true;
    };
    auto expect = [&](char c) {
        if (p < s.size() && s[p] == c) return ++p, true;
        return false;
    };
    long Y = 0, M = 0, D = 0, h = 0, mi = 0, sec = 0;
    if (!read_int(4, Y) || !expect('-') || !read_int(2, M) || !expect('-') || !read_int(2, D)) return std::nullopt;
    if (M < 1 || M > 12 || D < 1 || D > 31) return std::nullopt;
    static constexpr int mdays[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (D > mdays[M - 1]) return std::nullopt;
    const bool leap = (Y % 4 == 0 && Y % 100 != 0) || Y % 400 == 0;
    if (M == 2 && D == 29 && !leap) return std::nullopt;
    double frac = 0.0;
    if (p < s.size() && (s[p] == 'T' || s[p] == 't' || s[p] == ' ')) {
        ++p;
        if (!read_int(2, h) || !expect(':') || !read_int(2, mi)) return std::nullopt;
        if (expect(':')) {
            if (!read_int(2, sec)) return std::nullopt;
            if (p < s.size() && (s[p] == '.' || s[p] == ',')) {
                const std::size_t b = ++p;
                while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) ++p;
                if (p == b) return std::nullopt;
                frac = std::stod("0." + s.substr(b, p - b));
            }
        }
        if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
    }
    long offset_min = 0;
    if (p < s.size()) {
        if (s[p] == 'Z' || s[p] == 'z') {
            ++p;
        } else if (s[p] == '+' || s[p] == '-') {
            const int sign = s[p] == '-' ? -1 : 1;
            ++p;
            long oh = 0, om = 0;
            if (!read_int(2, oh)) return std::nullopt;
            expect(':');
            if (p < s.size() && !read_int(2, om)) return std::nullopt;
            if (oh > 23 || om > 59) return std::nullopt;
            offset_min = sign * (oh * 60 + om);
        }
    }
    if (p != s.size()) return std::nullopt;
    const long days = detail::days_from_civil(Y, static_cast<unsigned>(M), static_cast<unsigned>(D));
    return static_cast<double>(days * 86400 + h * 3600 + mi * 60 + sec - offset_min * 60) + frac;
}

namespace detail {

struct CsvTable {
    std::string path;
    std::vector<std::string> header;  // normalised
    std::vector<std::pair<long, std::vector<std::string>>> rows;  // (1-based line, fields)
};

inline CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    CsvTable t{path, {}, {}};
    std::string line;
    long n = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        if (!have_header) {
            for (const auto& h : split_csv(line)) t.header.push_back(normalize_header(h));
            have_header = true;
            continue;
        }
        t.rows.emplace_back(n, split_csv(line));
    }
    if (!have_header) throw FormatError(path + ": empty file, header row required", path, 1);
    return t;
}

inline std::size_t require_column(const CsvTable& t, std::initializer_list<const char*> synonyms) {
    if (auto c = find_column(t.header, synonyms)) return *c;
    std::string names;
    for (const char* s : synonyms) names += (names.empty() ? "" : ", ") + std::string(s);
    throw FormatError(t.path + ": missing required column '" + *synonyms.begin() + "' (accepted names: " + names + ")",
                      t.path, 1);
}

struct RawPoint {
    double t, a, b;  // time and two coordinates
};

/// Groups by agent in order of first appearance, stable-sorts by time, keeps the first of
/// duplicate timestamps and drops agents with fewer than 3 points.
inline std::vector<std::pair<std::string, std::vector<RawPoint>>> group_agents(
    const std::vector<std::pair<std::string, RawPoint>>& pts, std::vector<IngestWarning>& warnings) {
    std::vector<std::pair<std::string, std::vector<RawPoint>>> groups;
    std::map<std::string, std::size_t> index;
    for (const auto& [id, p] : pts) {
        auto [it, fresh] = index.try_emplace(id, groups.size());
        if (fresh) groups.push_back({id, {}});
        groups[it->second].second.push_back(p);
    }
    std::vector<std::pair<std::string, std::vector<RawPoint>>> kept;
    for (auto& [id, v] : groups) {
        std::stable_sort(v.begin(), v.end(), [](const RawPoint& x, const RawPoint& y) { return x.t < y.t; });
        std::vector<RawPoint> u;
        for (const auto& p : v)
            if (u.empty() || p.t != u.back().t) u.push_back(p);
        if (u.size() < v.size())
            warnings.push_back({0, "agent '" + id + "': dropped " + std::to_string(v.size() - u.size()) +
                                       " duplicate timestamp(s), keeping the first"});
        if (u.size() < 3) {
            warnings.push_back({0, "agent '" + id + "' skipped: " + std::to_string(u.size()) +
                                       " distinct point(s), at least 3 required"});
            continue;
        }
        kept.push_back({id, std::move(u)});
    }
    return kept;
}

}  // namespace detail

/// Movebank-style CSV: identifier, ISO-8601 timestamp, longitude and latitude in degrees,
/// matched by header name in any order. Times become hours since the earliest record in the
/// file; positions become kilometres in a local equirectangular projection about the centroid.
[[nodiscard]] inline TrajectorySet load_trajectories_csv(const std::string& path) {
    const auto t = detail::read_csv_table(path);
    const auto ci = detail::require_column(t, detail::id_synonyms());
    const auto ct = detail::require_column(t, detail::time_synonyms());
    const auto clon = detail::require_column(t, detail::lon_synonyms());
    const auto clat = detail::require_column(t, detail::lat_synonyms());
    const std::size_t need = std::max({ci, ct, clon, clat}) + 1;

    TrajectorySet out;
    std::vector<std::pair<std::string, detail::RawPoint>> pts;
    for (const auto& [line, f] : t.rows) {
        auto bad = [&, line = line](const std::string& why) {
            out.warnings.push_back({line, path + ":" + std::to_string(line) + ": row skipped, " + why});
        };
        if (f.size() < need) {
            bad("expected at least " + std::to_string(need) + " fields, found " + std::to_string(f.size()));
            continue;
        }
        if (f[ci].empty()) { bad("empty identifier"); continue; }
        const auto ts = parse_iso8601(f[ct]);
        if (!ts) { bad("unparseable timestamp '" + f[ct] + "'"); continue; }
        const auto lon = detail::parse_double(f[clon]), lat = detail::parse_double(f[clat]);
        if (!lon || !lat) { bad("unparseable coordinates"); continue; }
        if (std::abs(*lat) > 90.0 || std::abs(*lon) > 360.0) { bad("coordinates out of range"); continue; }
        pts.push_back({f[ci], {*ts, *lon, *lat}});
    }
    const auto groups = detail::group_agents(pts, out.warnings);
    if (groups.empty()) return out;

    ProjectionInfo proj;
    double t0 = groups.front().second.front().t, slon = 0.0, slat = 0.0;
    std::size_t n = 0;
    for (const auto& [id, v] : groups)
        for (const auto& p : v) {
            t0 = std::min(t0, p.t);
            slon += p.a, slat += p.b, ++n;
        }
    proj.lon0_deg = slon / static_cast<double>(n);
    proj.lat0_deg = slat / static_cast<double>(n);
    proj.time_origin_unix = t0;
    constexpr double deg = std::numbers::pi / 180.0;
    const double coslat0 = std::cos(proj.lat0_deg * deg);
    for (const auto& [id, v] : groups) {
        Trajectory tr{id, Eigen::VectorXd(static_cast<Eigen::Index>(v.size())),
                      Eigen::MatrixXd(static_cast<Eigen::Index>(v.size()), 2)};
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            tr.times[k] = (v[i].t - t0) / 3600.0;
            tr.positions(k, 0) = proj.radius_km * (v[i].a - proj.lon0_deg) * deg * coslat0;
            tr.positions(k, 1) = proj.radius_km * (v[i].b - proj.lat0_deg) * deg;
        }
        out.trajectories.push_back(std::move(tr));
    }
    out.projection = proj;
    return out;
}

/// Planar trajectories with columns agent_id, t, x, y (any order, case-insensitive).
[[nodiscard]] inline TrajectorySet load_planar_csv(const std::string& path) {
    const auto t = detail::read_csv_table(path);
    const auto ci = detail::require_column(t, {"agent-id", "id", "individual-local-identifier", "agent"});
    const auto ct = detail::require_column(t, {"t", "time"});
    const auto cx = detail::require_column(t, {"x"});
    const auto cy = detail::require_column(t, {"y"});
    const std::size_t need = std::max({ci, ct, cx, cy}) + 1;
    TrajectorySet out;
    std::vector<std::pair<std::string, detail::RawPoint>> pts;
    for (const auto& [line, f] : t.rows) {
        const auto tv = f.size() >= need ? detail::parse_double(f[ct]) : std::nullopt;
        const auto xv = f.size() >= need ? detail::parse_double(f[cx]) : std::nullopt;
        const auto yv = f.size() >= need ? detail::parse_double(f[cy]) : std::nullopt;
        if (!tv || !xv || !yv || f[ci].empty()) {
            out.warnings.push_back({line, path + ":" + std::to_string(line) + ": row skipped, malformed fields"});
            continue;
        }
        pts.push_back({f[ci], {*tv, *xv, *yv}});
    }
    for (const auto& [id, v] : detail::group_agents(pts, out.warnings)) {
        Trajectory tr{id, Eigen::VectorXd(static_cast<Eigen::Index>(v.size())),
                      Eigen::MatrixXd(static_cast<Eigen::Index>(v.size()), 2)};
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            tr.times[k] = v[i].t;
            tr.positions.row(k) << v[i].a, v[i].b;
        }
        out.trajectories.push_back(std::move(tr));
    }
    return out;
}

/// Geographic input when the header carries longitude and latitude columns, planar otherwise.
[[nodiscard]] inline TrajectorySet load_any_trajectories(const std::string& path) {
    const auto t = detail::read_csv_table(path);
    const bool geo = detail::find_column(t.header, detail::lon_synonyms()) &&
                     detail::find_column(t.header, detail::lat_synonyms());
    return geo ? load_trajectories_csv(path) : load_planar_csv(path);
}

namespace detail {

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    out << s;
    out.flush();
    if (!out) throw IoError("write to '" + p.string() + "' failed");
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw IoError("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
}

}  // namespace detail

inline void write_planar_csv(const std::string& path, const std::vector<Trajectory>& trajs) {
    std::string s = "agent_id,t,x,y\n";
    for (const auto& tr : trajs)
        for (Eigen::Index i = 0; i < tr.size(); ++i)
            s += tr.agent_id + "," + detail::g17(tr.times[i]) + "," + detail::g17(tr.positions(i, 0)) + "," +
                 detail::g17(tr.positions(i, 1)) + "\n";
    detail::write_text(path, s);
}

inline constexpr const char* kGridHeader =
    "x,y,t,vx_mean,vx_var,vy_mean,vy_var,div_mean,div_var,curl_mean,curl_var,signed_kl";

[[nodiscard]] inline std::string grid_file_name(std::size_t time_index) {
    return "grid_t" + std::to_string(time_index) + ".csv";
}

/// CSV text for one evaluation time: y outer, x inner, 17 significant digits.
[[nodiscard]] inline std::string grid_csv(const GridResult& r, std::size_t time_index) {
    std::string s = std::string(kGridHeader) + "\n";
    const auto& g = r.spec;
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const auto& n = r.at(time_index, ix, iy);
            const double v[] = {n.x,  n.y,  n.t,  n.vx.mean, n.vx.variance, n.vy.mean, n.vy.variance, n.divergence.mean,
                                n.divergence.variance, n.curl.mean, n.curl.variance, n.signed_kl};
            for (std::size_t k = 0; k < std::size(v); ++k) s += (k ? "," : "") + detail::g17(v[k]);
            s += '\n';
        }
    return s;
}

namespace detail {

inline nlohmann::ordered_json hyper_json(const SEHyperparams& h) {
    return {{"output_scale", h.output_scale},
            {"length_scales", std::vector<double>(h.length_scales.data(), h.length_scales.data() + h.dims())},
            {"noise_variance", h.noise_variance}};
}

}  // namespace detail

/// Extra context recorded in the grid manifest.
struct ExportContext {
    std::optional<ProjectionInfo> projection;
    std::string source;  // input description, e.g. a file path
};

/// Writes grid_t<k>.csv for every evaluation time plus manifest.json into `dir`.
/// Returns the written paths, manifest last.
inline std::vector<std::string> export_grid(const GridResult& r, const FieldModel& fm, const std::string& dir,
                                            const ExportContext& ctx = {}) {
    const std::filesystem::path root(dir);
    detail::ensure_dir(root);
    std::vector<std::string> written;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < r.spec.times.size(); ++k) {
        const auto p = root / grid_file_name(k);
        detail::write_text(p, grid_csv(r, k));
        written.push_back(p.string());
        files.push_back({{"file", grid_file_name(k)}, {"t", r.spec.times[k]}});
    }
    nlohmann::ordered_json m;
    m["software"] = {{"name", "gp_laplace"}, {"version", GPLAPLACE_VERSION}};
    m["grid"] = {{"x_min", r.spec.x_min}, {"x_max", r.spec.x_max}, {"nx", r.spec.nx}, {"y_min", r.spec.y_min},
                 {"y_max", r.spec.y_max}, {"ny", r.spec.ny},       {"times", r.spec.times}};
    m["columns"] = kGridHeader;
    m["row_order"] = "y outer, x inner";
    m["files"] = files;
    m["target_kind"] = to_string(fm.target_kind);
    m["kl"] = {{"variant", to_string(r.kl.variant)}, {"sign_at_zero", r.kl.sign_at_zero}};
    m["prior_divergence"] = {{"mean", r.prior.mean}, {"variance", r.prior.variance}};
    m["hyperparameters"] = {{"vx", detail::hyper_json(fm.model_vx.hyper())},
                            {"vy", detail::hyper_json(fm.model_vy.hyper())},
                            {"input_columns", {"x", "y", "t"}}};
    m["mode"] = fm.model_vx.mode() == GPMode::exact ? "exact" : "sparse";
    m["training_points"] = fm.model_vx.size();
    if (fm.model_vx.mode() == GPMode::sparse) m["inducing_points"] = fm.model_vx.inducing_inputs().rows();
    if (ctx.projection)
        m["projection"] = {{"type", "equirectangular"},
                           {"lon0_deg", ctx.projection->lon0_deg},
                           {"lat0_deg", ctx.projection->lat0_deg},
                           {"radius_km", ctx.projection->radius_km},
                           {"time_origin_unix_s", ctx.projection->time_origin_unix},
                           {"units", {{"x", "km"}, {"y", "km"}, {"t", "hours"}}}};
    if (!ctx.source.empty()) m["source"] = ctx.source;
    const auto mp = root / "manifest.json";
    detail::write_text(mp, m.dump(2) + "\n");
    written.push_back(mp.string());
    return written;
}

/// One parsed grid row, columns in header order.
using GridRow = std::array<double, 12>;

/// Reads a grid CSV written by export_grid; rejects any other layout.
[[nodiscard]] inline std::vector<GridRow> parse_grid_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != kGridHeader)
        throw FormatError(path + ":1: unexpected grid header", path, 1);
    std::vector<GridRow> rows;
    long n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 12)
            throw FormatError(path + ":" + std::to_string(n) + ": expected 12 fields, found " + std::to_string(f.size()),
                              path, n);
        GridRow r{};
        for (std::size_t k = 0; k < 12; ++k) {
            const char* b = f[k].data();
            const auto [p, ec] = std::from_chars(b, b + f[k].size(), r[k]);
            if (ec != std::errc() || p != b + f[k].size())
                throw FormatError(path + ":" + std::to_string(n) + ": bad number '" + f[k] + "'", path, n);
        }
        rows.push_back(r);
    }
    return rows;
}

/// The rows export_grid writes for one time, as numbers.
[[nodiscard]] inline std::vector<GridRow> grid_rows(const GridResult& r, std::size_t time_index) {
    std::vector<GridRow> out;
    for (int iy = 0; iy < r.spec.ny; ++iy)
        for (int ix = 0; ix < r.spec.nx; ++ix) {
            const auto& n = r.at(time_index, ix, iy);
            out.push_back({n.x, n.y, n.t, n.vx.mean, n.vx.variance, n.vy.mean, n.vy.variance, n.divergence.mean,
                           n.divergence.variance, n.curl.mean, n.curl.variance, n.signed_kl});
        }
    return out;
}

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& M) {
    auto a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        a.push_back(std::move(row));
    }
    return a;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::MatrixXd json_matrix(const nlohmann::json& j, Eigen::Index cols, const std::string& what) {
    if (!j.is_array()) throw FormatError("model file: '" + what + "' must be an array", "");
    Eigen::MatrixXd M(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != static_cast<std::size_t>(cols))
            throw FormatError("model file: row " + std::to_string(i) + " of '" + what + "' has wrong width", "");
        for (Eigen::Index c = 0; c < cols; ++c) M(static_cast<Eigen::Index>(i), c) = j[i][static_cast<std::size_t>(c)].get<double>();
    }
    return M;
}

inline Eigen::VectorXd json_vector(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json gp_json(const GPModel& m) {
    const auto& p = m.jitter_policy();
    nlohmann::json j;
    j["mode"] = m.mode() == GPMode::exact ? "exact" : "sparse";
    j["hyper"] = hyper_json(m.hyper());
    j["inputs"] = matrix_json(m.training_inputs());
    j["targets"] = vector_json(m.raw_targets());
    j["noise_extra"] = vector_json(m.noise_extra());
    if (m.mode() == GPMode::sparse) j["inducing_inputs"] = matrix_json(m.inducing_inputs());
    j["jitter_policy"] = {{"initial_relative", p.initial_relative}, {"max_relative", p.max_relative}, {"growth", p.growth}};
    return j;
}

inline GPModel json_gp(const nlohmann::json& j) {
    const auto& h = j.at("hyper");
    const SEHyperparams hyper(h.at("output_scale").get<double>(), json_vector(h.at("length_scales")),
                              h.at("noise_variance").get<double>());
    hyper.validate();
    const auto D = hyper.dims();
    const Eigen::MatrixXd X = json_matrix(j.at("inputs"), D, "inputs");
    const Eigen::VectorXd y = json_vector(j.at("targets"));
    const Eigen::VectorXd extra = json_vector(j.at("noise_extra"));
    const auto& jp = j.at("jitter_policy");
    const JitterPolicy policy{jp.at("initial_relative").get<double>(), jp.at("max_relative").get<double>(),
                              jp.at("growth").get<double>()};
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "exact") return GPModel::condition(X, y, hyper, extra, policy);
    if (mode == "sparse")
        return GPModel::condition_sparse(X, y, json_matrix(j.at("inducing_inputs"), D, "inducing_inputs"), hyper, extra,
                                         policy);
    throw FormatError("model file: unknown mode '" + mode + "'", "");
}

}  // namespace detail

/// Stores the training data, fitted hyperparameters and inducing inputs; loading re-conditions
/// with the same numbers and therefore reproduces the model's predictions exactly.
inline void save_field_model(const std::string& path, const FieldModel& fm) {
    nlohmann::json j;
    j["format"] = "gp_laplace field model";
    j["format_version"] = 1;
    j["software_version"] = GPLAPLACE_VERSION;
    j["target_kind"] = to_string(fm.target_kind);
    j["vx"] = detail::gp_json(fm.model_vx);
    j["vy"] = detail::gp_json(fm.model_vy);
    detail::write_text(path, j.dump() + "\n");
}

[[nodiscard]] inline FieldModel load_field_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.value("format", std::string()) != "gp_laplace field model")
            throw FormatError(path + ": not a gp_laplace field model file", path);
        const std::string tk = j.at("target_kind").get<std::string>();
        if (tk != "acceleration" && tk != "velocity") throw FormatError(path + ": bad target_kind '" + tk + "'", path);
        return FieldModel{detail::json_gp(j.at("vx")), detail::json_gp(j.at("vy")),
                          tk == "velocity" ? TargetKind::velocity : TargetKind::acceleration};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what(), path);
    } catch (const FormatError& e) {
        if (!e.file().empty()) throw;
        throw FormatError(path + ": " + e.what(), path);
    }
}

}  // namespace gplaplace
