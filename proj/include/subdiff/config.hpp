#pragma once

// Experiment configuration: a JSON document (comments allowed) with a
// documented default for every field. Unknown keys are errors.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "subdiff/channels.hpp"
#include "subdiff/detect.hpp"
#include "subdiff/errors.hpp"
#include "subdiff/scene.hpp"

namespace subdiff {

struct ScenarioConfig {
    ObjectSpec pre = shattered_square_pre();
    ObjectSpec post = shattered_square_post();
    double gamma = 0.25;
    std::vector<double> gamma_grid;  // empty: per-experiment default grid
    double photons_per_step = 500.0;
    PsfKind psf = PsfKind::gaussian;

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct DirectConfig {
    std::optional<double> pitch;        // empty: PSF-specific default
    std::optional<double> half_extent;  // empty: PSF-specific default
    int airy_object_cells = 16;

    PixelGrid grid(PsfKind kind) const {
        PixelGrid g = default_pixel_grid(kind);
        if (pitch) g.pitch = *pitch;
        if (half_extent) g.half_extent = *half_extent;
        return g;
    }

    friend bool operator==(const DirectConfig&, const DirectConfig&) = default;
};

struct QreConfig {
    int n_max = 8;
    friend bool operator==(const QreConfig&, const QreConfig&) = default;
};

struct DetectorConfig {
    std::optional<double> threshold;  // empty: ln(window / pfa)
    double pfa = 0.001;
    std::int64_t window = 25;
    std::vector<double> h_grid{5, 6, 7, 8, 9, 10, 11, 12};
    std::int64_t change_time = 25;
    std::int64_t n_trials = 2000;
    std::int64_t direct_trials = 200;  // direct imaging needs far longer runs
    std::int64_t fa_trials = 500;      // no-change runs per point (0: use the e^h bound)
    std::int64_t max_steps = 10'000'000;
    double fa_cap_factor = 50.0;       // no-change runs stop at fa_cap_factor * e^h steps
    std::uint64_t master_seed = 20231;

    double resolved_threshold() const { return threshold.value_or(threshold_for_pfa(pfa, window)); }

    friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

struct OutputConfig {
    std::string directory = "results";
    std::vector<std::string> formats{"csv", "svg", "json"};

    bool wants(const std::string& f) const {
        for (const auto& x : formats)
            if (x == f) return true;
        return false;
    }

    friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct ExperimentConfig {
    ScenarioConfig scenario;
    std::vector<Receiver> receivers{Receiver::trispade, Receiver::direct};
    DirectConfig direct;
    QreConfig qre;
    DetectorConfig detector;
    OutputConfig output;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace config_detail {

using json = nlohmann::ordered_json;

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(join(path, key), "unknown key");
    }
}

inline double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

inline std::int64_t get_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
    return j.get<std::int64_t>();
}

inline std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

inline Vec2 get_vec2(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(path, "expected [x, y]");
    return {get_number(j[0], path + "[0]"), get_number(j[1], path + "[1]")};
}

inline std::vector<double> get_numbers(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline ObjectSpec parse_object(const json& j, const std::string& path) {
    check_keys(j, path, {"label", "kind", "points", "rectangles", "vertices", "raster", "raster_cells"});
    ObjectSpec spec;
    if (j.contains("label")) spec.label = get_string(j["label"], join(path, "label"));
    if (j.contains("raster_cells")) {
        spec.raster_cells = static_cast<int>(get_int(j["raster_cells"], join(path, "raster_cells")));
        if (spec.raster_cells < 1) throw ConfigError(join(path, "raster_cells"), "must be >= 1");
    }
    if (!j.contains("kind")) throw ConfigError(join(path, "kind"), "missing object kind");
    const std::string kind = get_string(j["kind"], join(path, "kind"));
    auto require = [&](const char* key) -> const json& {
        if (!j.contains(key)) throw ConfigError(join(path, key), "required for kind '" + kind + "'");
        return j[key];
    };
    if (kind == "points") {
        PointsSpec p;
        const json& a = require("points");
        const std::string pp = join(path, "points");
        if (!a.is_array() || a.empty()) throw ConfigError(pp, "expected a non-empty array of [x, y] or [x, y, weight]");
        for (std::size_t i = 0; i < a.size(); ++i) {
            const std::string ip = pp + "[" + std::to_string(i) + "]";
            if (!a[i].is_array() || (a[i].size() != 2 && a[i].size() != 3))
                throw ConfigError(ip, "expected [x, y] or [x, y, weight]");
            PointMass m{{get_number(a[i][0], ip), get_number(a[i][1], ip)}, 1.0};
            if (a[i].size() == 3) m.weight = get_number(a[i][2], ip);
            if (m.weight < 0.0) throw ConfigError(ip, "weight must be non-negative");
            p.points.push_back(m);
        }
        spec.shape = p;
    } else if (kind == "rectangles") {
        RectanglesSpec r;
        const json& a = require("rectangles");
        const std::string rp = join(path, "rectangles");
        if (!a.is_array() || a.empty()) throw ConfigError(rp, "expected a non-empty array");
        for (std::size_t i = 0; i < a.size(); ++i) {
            const std::string ip = rp + "[" + std::to_string(i) + "]";
            check_keys(a[i], ip, {"center", "size", "weight"});
            Rectangle rect;
            rect.center = a[i].contains("center") ? get_vec2(a[i]["center"], join(ip, "center")) : Vec2{};
            if (!a[i].contains("size")) throw ConfigError(join(ip, "size"), "missing rectangle size");
            rect.size = get_vec2(a[i]["size"], join(ip, "size"));
            if (!(rect.size.x > 0.0 && rect.size.y > 0.0)) throw ConfigError(join(ip, "size"), "must be positive");
            if (a[i].contains("weight")) {
                rect.weight = get_number(a[i]["weight"], join(ip, "weight"));
                if (*rect.weight < 0.0) throw ConfigError(join(ip, "weight"), "must be non-negative");
            }
            r.rectangles.push_back(rect);
        }
        spec.shape = r;
    } else if (kind == "polygon") {
        PolygonSpec p;
        const json& a = require("vertices");
        const std::string vp = join(path, "vertices");
        if (!a.is_array() || a.size() < 3) throw ConfigError(vp, "expected at least 3 vertices");
        for (std::size_t i = 0; i < a.size(); ++i) p.vertices.push_back(get_vec2(a[i], vp + "[" + std::to_string(i) + "]"));
        spec.shape = p;
    } else if (kind == "raster") {
        const json& r = require("raster");
        const std::string rp = join(path, "raster");
        check_keys(r, rp, {"origin", "cell", "nx", "ny", "weights"});
        RasterSpec rs;
        for (const char* k : {"origin", "cell", "nx", "ny", "weights"})
            if (!r.contains(k)) throw ConfigError(join(rp, k), "missing raster field");
        rs.raster.origin = get_vec2(r["origin"], join(rp, "origin"));
        rs.raster.cell = get_number(r["cell"], join(rp, "cell"));
        rs.raster.nx = static_cast<int>(get_int(r["nx"], join(rp, "nx")));
        rs.raster.ny = static_cast<int>(get_int(r["ny"], join(rp, "ny")));
        rs.raster.weights = get_numbers(r["weights"], join(rp, "weights"));
        if (!(rs.raster.cell > 0.0) || rs.raster.nx < 1 || rs.raster.ny < 1 ||
            rs.raster.weights.size() != static_cast<std::size_t>(rs.raster.nx) * rs.raster.ny)
            throw ConfigError(rp, "inconsistent raster dimensions");
        spec.shape = rs;
    } else {
        throw ConfigError(join(path, "kind"), "unknown object kind '" + kind + "'");
    }
    return spec;
}

inline json object_to_json(const ObjectSpec& s) {
    json j;
    j["label"] = s.label;
    if (const auto* p = std::get_if<PointsSpec>(&s.shape)) {
        j["kind"] = "points";
        json a = json::array();
        for (const auto& m : p->points) a.push_back({m.position.x, m.position.y, m.weight});
        j["points"] = a;
    } else if (const auto* r = std::get_if<RectanglesSpec>(&s.shape)) {
        j["kind"] = "rectangles";
        json a = json::array();
        for (const auto& rect : r->rectangles) {
            json e;
            e["center"] = {rect.center.x, rect.center.y};
            e["size"] = {rect.size.x, rect.size.y};
            if (rect.weight) e["weight"] = *rect.weight;
            a.push_back(e);
        }
        j["rectangles"] = a;
    } else if (const auto* g = std::get_if<PolygonSpec>(&s.shape)) {
        j["kind"] = "polygon";
        json a = json::array();
        for (const auto& v : g->vertices) a.push_back({v.x, v.y});
        j["vertices"] = a;
    } else {
        const Raster& r = std::get<RasterSpec>(s.shape).raster;
        j["kind"] = "raster";
        j["raster"] = {{"origin", {r.origin.x, r.origin.y}}, {"cell", r.cell}, {"nx", r.nx}, {"ny", r.ny},
                       {"weights", r.weights}};
    }
    j["raster_cells"] = s.raster_cells;
    return j;
}

inline void apply_preset(const std::string& name, ScenarioConfig& sc, const std::string& path) {
    if (name == "shattered-square") {
        sc.pre = shattered_square_pre();
        sc.post = shattered_square_post();
    } else if (name == "two-point") {
        sc.pre = {"two-point", PointsSpec{{{{-0.5, 0.0}, 0.5}, {{0.5, 0.0}, 0.5}}}, 256};
        sc.post = {"point", PointsSpec{{{{0.0, 0.0}, 1.0}}}, 256};
    } else if (name == "identical") {
        sc.pre = shattered_square_pre();
        sc.post = shattered_square_pre();
    } else {
        throw ConfigError(path, "unknown preset '" + name + "' (shattered-square, two-point, identical)");
    }
}

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace config_detail

/// Parses and validates an experiment config, applying defaults.
inline ExperimentConfig parse_config(const std::string& text) {
    using config_detail::json;
    using namespace config_detail;
    json doc;
    try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ConfigError("", "syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                                  ": " + e.what());
    }
    check_keys(doc, "", {"scenario", "receivers", "direct", "qre", "detector", "output"});
    ExperimentConfig cfg;

    if (doc.contains("scenario")) {
        const json& s = doc["scenario"];
        check_keys(s, "scenario", {"preset", "pre", "post", "gamma", "gamma_grid", "photons_per_step", "psf"});
        if (s.contains("preset")) apply_preset(get_string(s["preset"], "scenario.preset"), cfg.scenario, "scenario.preset");
        if (s.contains("pre")) cfg.scenario.pre = parse_object(s["pre"], "scenario.pre");
        if (s.contains("post")) cfg.scenario.post = parse_object(s["post"], "scenario.post");
        if (s.contains("gamma")) cfg.scenario.gamma = get_number(s["gamma"], "scenario.gamma");
        if (s.contains("gamma_grid")) cfg.scenario.gamma_grid = get_numbers(s["gamma_grid"], "scenario.gamma_grid");
        if (s.contains("photons_per_step"))
            cfg.scenario.photons_per_step = get_number(s["photons_per_step"], "scenario.photons_per_step");
        if (s.contains("psf")) {
            try {
                cfg.scenario.psf = parse_psf_kind(get_string(s["psf"], "scenario.psf"));
            } catch (const InvalidInput& e) {
                throw ConfigError("scenario.psf", e.what());
            }
        }
    }
    if (!(cfg.scenario.gamma > 0.0)) throw ConfigError("scenario.gamma", "must be > 0");
    for (std::size_t i = 0; i < cfg.scenario.gamma_grid.size(); ++i)
        if (!(cfg.scenario.gamma_grid[i] > 0.0))
            throw ConfigError("scenario.gamma_grid[" + std::to_string(i) + "]", "must be > 0");
    if (!(cfg.scenario.photons_per_step > 0.0)) throw ConfigError("scenario.photons_per_step", "must be > 0");

    if (doc.contains("receivers")) {
        const json& r = doc["receivers"];
        if (!r.is_array() || r.empty()) throw ConfigError("receivers", "expected a non-empty array");
        cfg.receivers.clear();
        std::set<std::string> seen;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const std::string p = "receivers[" + std::to_string(i) + "]";
            const std::string name = get_string(r[i], p);
            if (!seen.insert(name).second) throw ConfigError(p, "duplicate receiver");
            try {
                cfg.receivers.push_back(parse_receiver(name));
            } catch (const InvalidInput& e) {
                throw ConfigError(p, e.what());
            }
        }
    }

    if (doc.contains("direct")) {
        const json& d = doc["direct"];
        check_keys(d, "direct", {"pitch", "half_extent", "airy_object_cells"});
        if (d.contains("pitch") && !d["pitch"].is_null()) cfg.direct.pitch = get_number(d["pitch"], "direct.pitch");
        if (d.contains("half_extent") && !d["half_extent"].is_null())
            cfg.direct.half_extent = get_number(d["half_extent"], "direct.half_extent");
        if (d.contains("airy_object_cells"))
            cfg.direct.airy_object_cells = static_cast<int>(get_int(d["airy_object_cells"], "direct.airy_object_cells"));
    }
    if (cfg.direct.pitch && !(*cfg.direct.pitch > 0.0)) throw ConfigError("direct.pitch", "must be > 0");
    if (cfg.direct.half_extent && !(*cfg.direct.half_extent >= 3.0))
        throw ConfigError("direct.half_extent", "must be >= 3");
    if (cfg.direct.airy_object_cells < 1) throw ConfigError("direct.airy_object_cells", "must be >= 1");

    if (doc.contains("qre")) {
        const json& q = doc["qre"];
        check_keys(q, "qre", {"n_max"});
        if (q.contains("n_max")) cfg.qre.n_max = static_cast<int>(get_int(q["n_max"], "qre.n_max"));
    }
    if (cfg.qre.n_max < 2) throw ConfigError("qre.n_max", "must be >= 2");

    if (doc.contains("detector")) {
        const json& d = doc["detector"];
        check_keys(d, "detector",
                   {"threshold", "pfa", "window", "h_grid", "change_time", "n_trials", "direct_trials", "fa_trials",
                    "max_steps", "fa_cap_factor", "master_seed"});
        DetectorConfig& c = cfg.detector;
        if (d.contains("threshold") && !d["threshold"].is_null())
            c.threshold = get_number(d["threshold"], "detector.threshold");
        if (d.contains("pfa")) c.pfa = get_number(d["pfa"], "detector.pfa");
        if (d.contains("window")) c.window = get_int(d["window"], "detector.window");
        if (d.contains("h_grid")) c.h_grid = get_numbers(d["h_grid"], "detector.h_grid");
        if (d.contains("change_time")) c.change_time = get_int(d["change_time"], "detector.change_time");
        if (d.contains("n_trials")) c.n_trials = get_int(d["n_trials"], "detector.n_trials");
        if (d.contains("direct_trials")) c.direct_trials = get_int(d["direct_trials"], "detector.direct_trials");
        if (d.contains("fa_trials")) c.fa_trials = get_int(d["fa_trials"], "detector.fa_trials");
        if (d.contains("max_steps")) c.max_steps = get_int(d["max_steps"], "detector.max_steps");
        if (d.contains("fa_cap_factor")) c.fa_cap_factor = get_number(d["fa_cap_factor"], "detector.fa_cap_factor");
        if (d.contains("master_seed")) {
            if (!d["master_seed"].is_number_unsigned()) throw ConfigError("detector.master_seed", "expected a non-negative integer");
            c.master_seed = d["master_seed"].get<std::uint64_t>();
        }
    }
    {
        const DetectorConfig& c = cfg.detector;
        if (c.threshold && !(*c.threshold > 0.0)) throw ConfigError("detector.threshold", "must be > 0");
        if (!(c.pfa > 0.0 && c.pfa < 1.0)) throw ConfigError("detector.pfa", "must lie in (0, 1)");
        if (c.window < 1) throw ConfigError("detector.window", "must be >= 1");
        for (std::size_t i = 0; i < c.h_grid.size(); ++i)
            if (!(c.h_grid[i] > 0.0)) throw ConfigError("detector.h_grid[" + std::to_string(i) + "]", "must be > 0");
        if (c.change_time < 0) throw ConfigError("detector.change_time", "must be >= 0");
        if (c.n_trials < 1) throw ConfigError("detector.n_trials", "must be >= 1");
        if (c.direct_trials < 1) throw ConfigError("detector.direct_trials", "must be >= 1");
        if (c.fa_trials < 0) throw ConfigError("detector.fa_trials", "must be >= 0");
        if (c.max_steps < 1) throw ConfigError("detector.max_steps", "must be >= 1");
        if (!(c.fa_cap_factor > 0.0)) throw ConfigError("detector.fa_cap_factor", "must be > 0");
    }

    if (doc.contains("output")) {
        const json& o = doc["output"];
        check_keys(o, "output", {"directory", "formats"});
        if (o.contains("directory")) cfg.output.directory = get_string(o["directory"], "output.directory");
        if (o.contains("formats")) {
            const json& f = o["formats"];
            if (!f.is_array()) throw ConfigError("output.formats", "expected an array");
            cfg.output.formats.clear();
            for (std::size_t i = 0; i < f.size(); ++i) {
                const std::string p = "output.formats[" + std::to_string(i) + "]";
                const std::string name = get_string(f[i], p);
                if (name != "csv" && name != "svg" && name != "json")
                    throw ConfigError(p, "unknown format '" + name + "' (csv, svg, json)");
                cfg.output.formats.push_back(name);
            }
        }
    }
    return cfg;
}

/// Fully resolved config as JSON; parse_config(to_json(c).dump()) == c.
inline nlohmann::ordered_json to_json(const ExperimentConfig& cfg) {
    using config_detail::json;
    json j;
    json& s = j["scenario"];
    s["pre"] = config_detail::object_to_json(cfg.scenario.pre);
    s["post"] = config_detail::object_to_json(cfg.scenario.post);
    s["gamma"] = cfg.scenario.gamma;
    s["gamma_grid"] = cfg.scenario.gamma_grid;
    s["photons_per_step"] = cfg.scenario.photons_per_step;
    s["psf"] = std::string(to_string(cfg.scenario.psf));
    json r = json::array();
    for (auto rc : cfg.receivers) r.push_back(std::string(to_string(rc)));
    j["receivers"] = r;
    json& d = j["direct"];
    d["pitch"] = cfg.direct.pitch ? json(*cfg.direct.pitch) : json(nullptr);
    d["half_extent"] = cfg.direct.half_extent ? json(*cfg.direct.half_extent) : json(nullptr);
    d["airy_object_cells"] = cfg.direct.airy_object_cells;
    j["qre"]["n_max"] = cfg.qre.n_max;
    const DetectorConfig& c = cfg.detector;
    json& det = j["detector"];
    det["threshold"] = c.threshold ? json(*c.threshold) : json(nullptr);
    det["pfa"] = c.pfa;
    det["window"] = c.window;
    det["h_grid"] = c.h_grid;
    det["change_time"] = c.change_time;
    det["n_trials"] = c.n_trials;
    det["direct_trials"] = c.direct_trials;
    det["fa_trials"] = c.fa_trials;
    det["max_steps"] = c.max_steps;
    det["fa_cap_factor"] = c.fa_cap_factor;
    det["master_seed"] = c.master_seed;
    j["output"]["directory"] = cfg.output.directory;
    j["output"]["formats"] = cfg.output.formats;
    return j;
}

inline std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

/// Builds validated object models and the scenario for one gamma.
inline Scenario scenario_from_config(const ExperimentConfig& cfg, double gamma) {
    return make_scenario(build_object(cfg.scenario.pre), build_object(cfg.scenario.post), gamma,
                         cfg.scenario.photons_per_step, Psf::make(cfg.scenario.psf));
}

}  // namespace subdiff
