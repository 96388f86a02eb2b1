#include "mgs/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

#include "mgs/io.hpp"

namespace mgs {

namespace {

struct ValueError {
    std::string message;
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view s) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValueError{"expected a number, got \"" + std::string(s) + "\""};
    }
    return v;
}

bool parse_bool(std::string_view s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ValueError{"expected true or false, got \"" + std::string(s) + "\""};
}

std::vector<int> parse_int_list(std::string_view s) {
    std::vector<int> out;
    for (auto item : split(s, ',')) out.push_back(parse_number<int>(item));
    return out;
}

std::vector<ScheduleEntry> parse_schedule(std::string_view s) {
    std::vector<ScheduleEntry> out;
    for (auto item : split(s, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw ValueError{"schedule entries look like iteration:resolution"};
        out.push_back({parse_number<int>(parts[0]), parse_number<int>(parts[1])});
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
    return s;
}

struct Key {
    const char* name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define MGS_DOUBLE(name, member)                                                          \
    Key{name, [](RunConfig& c, std::string_view v) { c.member = parse_number<double>(v); }, \
        [](const RunConfig& c) { return fmt(c.member); }}
#define MGS_INT(name, member)                                                          \
    Key{name, [](RunConfig& c, std::string_view v) { c.member = parse_number<int>(v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define MGS_BOOL(name, member)                                                  \
    Key{name, [](RunConfig& c, std::string_view v) { c.member = parse_bool(v); }, \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}
#define MGS_INT_LIST(name, member)                                                  \
    Key{name, [](RunConfig& c, std::string_view v) { c.member = parse_int_list(v); }, \
        [](const RunConfig& c) { return join(c.member); }}

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        MGS_DOUBLE("lr_position", train.lr_position),
        MGS_DOUBLE("lr_intensity", train.lr_intensity),
        MGS_DOUBLE("lr_scale", train.lr_scale),
        MGS_DOUBLE("lr_rotation", train.lr_rotation),
        MGS_DOUBLE("lr_nrf", train.lr_nrf),
        MGS_DOUBLE("lr_transform", train.lr_transform),
        MGS_DOUBLE("lambda_ssim", train.lambda_ssim),
        MGS_DOUBLE("lambda_aniso", train.lambda_aniso),
        MGS_DOUBLE("lambda_r", train.lambda_r),
        MGS_INT("block_radius", train.block_radius),
        Key{"resolution_schedule",
            [](RunConfig& c, std::string_view v) { c.train.resolution_schedule = parse_schedule(v); },
            [](const RunConfig& c) { return schedule_to_string(c.train.resolution_schedule); }},
        MGS_INT("nrf_activation_iter", train.nrf_activation_iter),
        MGS_BOOL("use_nrf", train.use_nrf),
        MGS_BOOL("optimize_transforms", train.optimize_transforms),
        MGS_INT("total_iters", train.total_iters),
        MGS_INT("batch_points", train.batch_points),
        MGS_DOUBLE("adam_beta1", train.adam_beta1),
        MGS_DOUBLE("adam_beta2", train.adam_beta2),
        MGS_DOUBLE("adam_eps", train.adam_eps),
        Key{"seed", [](RunConfig& c, std::string_view v) { c.train.seed = parse_number<std::uint64_t>(v); },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }},
        Key{"phantom",
            [](RunConfig& c, std::string_view v) {
                try {
                    c.sim.phantom = phantom_from_string(v);
                } catch (const Error& e) {
                    throw ValueError{e.what()};
                }
            },
            [](const RunConfig& c) { return std::string(to_string(c.sim.phantom)); }},
        MGS_INT("phantom_size", sim.phantom_size),
        Key{"stacks",
            [](RunConfig& c, std::string_view v) {
                c.sim.stacks.clear();
                try {
                    for (auto item : split(v, ',')) c.sim.stacks.push_back(orientation_from_string(item));
                } catch (const Error& e) {
                    throw ValueError{e.what()};
                }
            },
            [](const RunConfig& c) {
                std::string s;
                for (std::size_t i = 0; i < c.sim.stacks.size(); ++i) {
                    s += (i ? ", " : "") + std::string(to_string(c.sim.stacks[i]));
                }
                return s;
            }},
        MGS_DOUBLE("in_plane_spacing", sim.in_plane_spacing),
        MGS_DOUBLE("slice_thickness", sim.slice_thickness),
        MGS_DOUBLE("slice_gap", sim.slice_gap),
        MGS_DOUBLE("motion_sigma", sim.motion_sigma),
        MGS_DOUBLE("noise_sigma", sim.noise_sigma),
        MGS_DOUBLE("registration_sigma", sim.registration_sigma),
        MGS_DOUBLE("foreground_threshold", foreground_threshold),
        MGS_INT("output_size", output_size),
        MGS_INT_LIST("bench_radii", bench.radii),
        MGS_INT_LIST("bench_resolutions", bench.resolutions),
        MGS_INT("bench_perf_lattice", bench.perf_lattice),
        MGS_INT("bench_perf_queries", bench.perf_queries),
        MGS_INT("bench_perf_dense_queries", bench.perf_dense_queries),
    };
    return table;
}

#undef MGS_DOUBLE
#undef MGS_INT
#undef MGS_BOOL
#undef MGS_INT_LIST

[[noreturn]] void parse_error(int line, std::size_t column, const std::string& what) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what);
}

void range(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::OutOfRangeValue, what);
}

void validate(const RunConfig& c) {
    c.train.validate();
    range(c.sim.phantom_size >= 16, "phantom_size must be at least 16");
    range(!c.sim.stacks.empty(), "at least one stack is required");
    range(c.sim.in_plane_spacing > 0, "in_plane_spacing must be positive");
    range(c.sim.slice_thickness >= c.sim.in_plane_spacing, "slice_thickness must be at least in_plane_spacing");
    range(c.sim.slice_gap >= 0, "slice_gap must be non-negative");
    range(c.sim.motion_sigma >= 0 && c.sim.noise_sigma >= 0 && c.sim.registration_sigma >= 0,
          "sigmas must be non-negative");
    range(c.foreground_threshold >= 0 && c.foreground_threshold < 1, "foreground_threshold must lie in [0, 1)");
    range(c.output_size >= 0, "output_size must be non-negative");
    range(!c.bench.radii.empty(), "bench_radii is empty");
    for (int r : c.bench.radii) range(r >= 0, "bench radii must be non-negative");
    for (int r : c.bench.resolutions) range(r >= 2, "bench resolutions must be at least 2");
    range(c.bench.perf_lattice >= 2, "bench_perf_lattice must be at least 2");
    range(c.bench.perf_queries >= 1 && c.bench.perf_dense_queries >= 1, "bench query counts must be positive");
}

}  // namespace

std::string schedule_to_string(const std::vector<ScheduleEntry>& schedule) {
    std::string s;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        s += (i ? ", " : "") + std::to_string(schedule[i].iteration) + ":" + std::to_string(schedule[i].resolution);
    }
    return s;
}

RunConfig parse_config(std::string_view text) {
    RunConfig cfg;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;

        const auto eq = line.find('=');
        const std::size_t key_col = line.find_first_not_of(" \t") + 1;
        if (eq == std::string_view::npos) parse_error(line_no, key_col, "expected \"key = value\"");
        const std::string_view key = trim(line.substr(0, eq));
        if (key.empty()) parse_error(line_no, key_col, "missing key before '='");
        for (std::size_t i = 0; i < key.size(); ++i) {
            const char ch = key[i];
            if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) {
                parse_error(line_no, key_col + i, std::string("unexpected character '") + ch + "' in key");
            }
        }
        const std::string_view rest = line.substr(eq + 1);
        const std::string_view value = trim(rest);
        const std::size_t value_col = eq + 2 + (rest.find_first_not_of(" \t") == std::string_view::npos
                                                    ? 0
                                                    : rest.find_first_not_of(" \t"));
        if (value.empty()) parse_error(line_no, value_col, "missing value for \"" + std::string(key) + "\"");

        const Key* match = nullptr;
        for (const Key& k : keys()) {
            if (key == k.name) match = &k;
        }
        if (!match) throw Error(ErrorCode::UnknownKey, "unknown key \"" + std::string(key) + "\" on line " +
                                                           std::to_string(line_no));
        try {
            match->set(cfg, value);
        } catch (const ValueError& e) {
            parse_error(line_no, value_col, e.message);
        }
    }
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string to_config_text(const RunConfig& cfg) {
    std::string out;
    for (const Key& k : keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
    return out;
}

RunConfig desk_config() {
    RunConfig c;
    c.train.resolution_schedule = {{0, 16}, {188, 24}, {375, 32}, {750, 40}, {1125, 48}};
    c.train.total_iters = 1500;
    c.train.nrf_activation_iter = 600;
    c.train.batch_points = 4096;
    return c;
}

}  // namespace mgs
