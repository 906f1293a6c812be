#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbv/camera.hpp"
#include "nbv/common.hpp"
#include "nbv/gp.hpp"
#include "nbv/planner.hpp"
#include "nbv/tasks.hpp"

namespace nbv {

// One tree with every knob the harness understands. User files (TOML subset
// or JSON) are deep-merged over this, and unknown keys are rejected so typos
// fail loudly instead of silently running the defaults.
inline nlohmann::json default_config() {
    return {
        {"task", "classification"},  // classification|segmentation|heat|reconstruction
        {"acquisition", "cross_entropy"},
        {"strategies", {"bayes_discrete", "fps", "uncertainty", "random"}},
        {"scenes", {"pyramid:cross"}},
        {"seeds", {1, 2, 3}},
        {"n_views", 5},
        {"n_target", 20.0},
        {"initial_view", 0},  // pool index, or the string "per_scene_random"
        {"out_dir", "out"},
        {"threads", 1},
        {"scanner",
         {{"fov_deg", 45.0},
          {"res_w", 40},
          {"res_h", 40},
          {"noise_sigma", 0.002},
          {"max_range", 8.0},
          {"sphere_radius", 2.5},
          {"n_candidates", 120}}},
        {"spsr",
         {{"lengthscale", 0.35},
          {"amplitude", 0.2},
          {"k_max", 4},
          {"sigma_v", 1e-3},
          {"sigma_n", 1e-2},
          {"grid_n", 100},
          {"grid_extent", 1.75},
          {"mean_offset", -0.35},
          {"max_obs_rows", 8000},
          {"n_mc_samples", 16}}},
        {"refine", {{"n_starts", 6}, {"n_iters", 20}, {"step0", 0.35}}},
        {"heat",
         {{"h", 0.1},
          {"T", 1.0},
          {"k", 12},
          {"bandwidth", 0.0},
          {"u0", 0.0},
          {"max_points", 600},
          {"source",
           {{"type", "gaussian"},
            {"center", {0.0, 0.0, 0.45}},
            {"width", 0.35},
            {"strength", 1.0}}}}},
        {"classifier",
         {{"epochs", 1000}, {"train_seeds_per_class", 12}, {"train_views", 3},
          {"seed", 9000}}},
        {"segmentation", {{"epsilon", 0.1}}},
        {"ground_truth", {{"n_surface_samples", 20000}}},
    };
}

// Objects merge key-by-key; scalars and arrays replace.
inline void deep_merge(nlohmann::json& base, const nlohmann::json& overlay) {
    if (!overlay.is_object() || !base.is_object()) {
        base = overlay;
        return;
    }
    for (const auto& [key, value] : overlay.items()) {
        if (base.contains(key) && base[key].is_object() && value.is_object())
            deep_merge(base[key], value);
        else
            base[key] = value;
    }
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& user,
                                const nlohmann::json& defaults,
                                const std::string& prefix) {
    for (const auto& [key, value] : user.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!defaults.contains(key)) throw ConfigError("unknown config key: " + path);
        if (value.is_object()) {
            if (!defaults[key].is_object())
                throw ConfigError("config key is not a table: " + path);
            reject_unknown_keys(value, defaults[key], path);
        }
    }
}

// ------------------------------------------------------ tiny TOML subset ---
// Sections, dotted keys, strings, bools, numbers, and (nested) arrays. No
// dates, inline tables, or multiline strings; comments start at '#'.

struct TomlCursor {
    const std::string& text;
    size_t pos = 0;
    int line = 1;

    explicit TomlCursor(const std::string& t) : text(t) {}
    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("TOML line " + std::to_string(line) + ": " + what);
    }
    void skip_ws_inline() {
        while (!done() && (peek() == ' ' || peek() == '\t')) ++pos;
    }
    void skip_comment() {
        if (!done() && peek() == '#')
            while (!done() && peek() != '\n') ++pos;
    }
};

inline nlohmann::json toml_value(TomlCursor& cur);

inline nlohmann::json toml_array(TomlCursor& cur) {
    nlohmann::json arr = nlohmann::json::array();
    ++cur.pos;  // consume '['
    while (true) {
        cur.skip_ws_inline();
        if (!cur.done() && cur.peek() == '\n') {  // arrays may span lines
            ++cur.pos;
            ++cur.line;
            continue;
        }
        cur.skip_comment();
        if (cur.done()) cur.fail("unterminated array");
        if (cur.peek() == ']') {
            ++cur.pos;
            return arr;
        }
        arr.push_back(toml_value(cur));
        cur.skip_ws_inline();
        if (!cur.done() && cur.peek() == ',') ++cur.pos;
    }
}

inline nlohmann::json toml_string(TomlCursor& cur) {
    ++cur.pos;  // consume '"'
    std::string out;
    while (!cur.done() && cur.peek() != '"') {
        char c = cur.text[cur.pos++];
        if (c == '\\') {
            if (cur.done()) cur.fail("dangling escape");
            char e = cur.text[cur.pos++];
            if (e == '"' || e == '\\')
                out.push_back(e);
            else if (e == 'n')
                out.push_back('\n');
            else if (e == 't')
                out.push_back('\t');
            else
                cur.fail("unsupported escape");
        } else if (c == '\n') {
            cur.fail("newline in string");
        } else {
            out.push_back(c);
        }
    }
    if (cur.done()) cur.fail("unterminated string");
    ++cur.pos;  // closing quote
    return out;
}

inline nlohmann::json toml_value(TomlCursor& cur) {
    cur.skip_ws_inline();
    if (cur.done()) cur.fail("missing value");
    const char c = cur.peek();
    if (c == '[') return toml_array(cur);
    if (c == '"') return toml_string(cur);
    std::string tok;
    while (!cur.done()) {
        const char t = cur.peek();
        if (t == ',' || t == ']' || t == '#' || t == '\n' || t == ' ' || t == '\t')
            break;
        tok.push_back(t);
        ++cur.pos;
    }
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok.empty()) cur.fail("missing value");
    try {
        size_t used = 0;
        if (tok.find_first_of(".eE") == std::string::npos) {
            const long long v = std::stoll(tok, &used);
            if (used == tok.size()) return v;
        }
        const double v = std::stod(tok, &used);
        if (used == tok.size()) return v;
    } catch (const std::exception&) {
    }
    cur.fail("cannot parse value '" + tok + "'");
}

inline std::vector<std::string> toml_key_path(TomlCursor& cur, char terminator) {
    std::vector<std::string> path;
    std::string part;
    while (!cur.done()) {
        const char c = cur.peek();
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
            part.push_back(c);
            ++cur.pos;
        } else if (c == '.') {
            if (part.empty()) cur.fail("empty key segment");
            path.push_back(part);
            part.clear();
            ++cur.pos;
        } else if (c == ' ' || c == '\t') {
            ++cur.pos;
        } else if (c == terminator) {
            break;
        } else {
            cur.fail(std::string("unexpected character '") + c + "' in key");
        }
    }
    if (part.empty()) cur.fail("empty key");
    path.push_back(part);
    return path;
}

inline nlohmann::json* descend(nlohmann::json& root,
                               const std::vector<std::string>& path, TomlCursor& cur) {
    nlohmann::json* node = &root;
    for (const std::string& part : path) {
        if (!node->is_object()) cur.fail("key path crosses a non-table");
        node = &(*node)[part];
        if (node->is_null()) *node = nlohmann::json::object();
    }
    return node;
}

}  // namespace detail

inline nlohmann::json parse_toml(const std::string& text) {
    detail::TomlCursor cur(text);
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* section = &root;
    while (!cur.done()) {
        cur.skip_ws_inline();
        cur.skip_comment();
        if (cur.done()) break;
        if (cur.peek() == '\n') {
            ++cur.pos;
            ++cur.line;
            continue;
        }
        if (cur.peek() == '[') {
            ++cur.pos;
            const auto path = detail::toml_key_path(cur, ']');
            if (cur.done() || cur.peek() != ']') cur.fail("unterminated section header");
            ++cur.pos;
            section = detail::descend(root, path, cur);
            if (!section->is_object()) cur.fail("section redefines a value");
        } else {
            const auto path = detail::toml_key_path(cur, '=');
            if (cur.done() || cur.peek() != '=') cur.fail("expected '='");
            ++cur.pos;
            nlohmann::json value = detail::toml_value(cur);
            nlohmann::json* slot = section;
            for (size_t i = 0; i + 1 < path.size(); ++i) {
                if (!slot->is_object()) cur.fail("key path crosses a non-table");
                slot = &(*slot)[path[i]];
                if (slot->is_null()) *slot = nlohmann::json::object();
            }
            if (!slot->is_object()) cur.fail("key path crosses a non-table");
            (*slot)[path.back()] = std::move(value);
        }
        cur.skip_ws_inline();
        cur.skip_comment();
        if (!cur.done()) {
            if (cur.peek() != '\n') cur.fail("trailing characters");
            ++cur.pos;
            ++cur.line;
        }
    }
    return root;
}

// Accepts JSON (first meaningful character '{') or the TOML subset.
inline nlohmann::json parse_config_text(const std::string& text) {
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (c == '{') {
            try {
                return nlohmann::json::parse(text);
            } catch (const nlohmann::json::parse_error& err) {
                throw ConfigError(std::string("JSON config: ") + err.what());
            }
        }
        break;
    }
    return parse_toml(text);
}

inline nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

// defaults ⊕ user, with unknown-key rejection and basic enum validation.
inline nlohmann::json resolve_config(const nlohmann::json& user) {
    nlohmann::json cfg = default_config();
    detail::reject_unknown_keys(user, cfg, "");
    deep_merge(cfg, user);

    const std::string task = cfg.at("task").get<std::string>();
    if (task != "classification" && task != "segmentation" && task != "heat" &&
        task != "reconstruction")
        throw ConfigError("unknown task: " + task);
    const std::string acq = cfg.at("acquisition").get<std::string>();
    if (acq != "eui_entropy" && acq != "cross_entropy" && acq != "eui_softcount" &&
        acq != "eui_heat" && acq != "chamfer")
        throw ConfigError("unknown acquisition: " + acq);
    for (const auto& s : cfg.at("strategies"))
        strategy_from_name(s.get<std::string>());  // throws on unknowns
    const auto& initial = cfg.at("initial_view");
    if (initial.is_string()) {
        if (initial.get<std::string>() != "per_scene_random")
            throw ConfigError("initial_view must be an index or 'per_scene_random'");
    } else if (!initial.is_number_integer()) {
        throw ConfigError("initial_view must be an index or 'per_scene_random'");
    }
    if (cfg.at("n_views").get<int>() < 1) throw ConfigError("n_views must be >= 1");
    if (cfg.at("seeds").empty()) throw ConfigError("seeds must be non-empty");
    if (cfg.at("scenes").empty()) throw ConfigError("scenes must be non-empty");
    return cfg;
}

// ----------------------------------------------------- typed extraction ----

inline ScanConfig scan_config_of(const nlohmann::json& cfg) {
    const auto& s = cfg.at("scanner");
    ScanConfig out;
    out.fov_degrees = s.at("fov_deg").get<double>();
    out.res_w = s.at("res_w").get<int>();
    out.res_h = s.at("res_h").get<int>();
    out.noise_sigma = s.at("noise_sigma").get<double>();
    out.max_range = s.at("max_range").get<double>();
    return out;
}

inline std::vector<CameraPose> candidate_pool_of(const nlohmann::json& cfg) {
    const auto& s = cfg.at("scanner");
    return fibonacci_candidates(s.at("n_candidates").get<int>(),
                                s.at("sphere_radius").get<double>());
}

inline PriorBasis basis_of(const nlohmann::json& cfg) {
    const auto& s = cfg.at("spsr");
    PriorBasis basis =
        build_prior(s.at("lengthscale").get<double>(), s.at("amplitude").get<double>(),
                    s.at("k_max").get<int>());
    basis.grid_n = s.at("grid_n").get<int>();
    basis.grid_extent = s.at("grid_extent").get<double>();
    return basis;
}

inline GpOptions gp_options_of(const nlohmann::json& cfg) {
    const auto& s = cfg.at("spsr");
    GpOptions out;
    out.sigma_v = s.at("sigma_v").get<double>();
    out.sigma_n = s.at("sigma_n").get<double>();
    out.mean_offset = s.at("mean_offset").get<double>();
    out.max_obs_rows = s.at("max_obs_rows").get<size_t>();
    return out;
}

inline std::function<double(const Vec3&)> heat_source_of(const nlohmann::json& cfg) {
    const auto& src = cfg.at("heat").at("source");
    const std::string type = src.at("type").get<std::string>();
    if (type == "none") return nullptr;
    if (type == "gaussian") {
        const auto c = src.at("center").get<std::vector<double>>();
        if (c.size() != 3) throw ConfigError("heat source center must have 3 entries");
        const Vec3 center(c[0], c[1], c[2]);
        const double width = src.at("width").get<double>();
        const double strength = src.at("strength").get<double>();
        if (width <= 0) throw ConfigError("heat source width must be positive");
        return [center, width, strength](const Vec3& p) {
            return strength * std::exp(-(p - center).squaredNorm() / (width * width));
        };
    }
    throw ConfigError("unknown heat source type: " + type);
}

inline HeatConfig heat_config_of(const nlohmann::json& cfg) {
    const auto& h = cfg.at("heat");
    HeatConfig out;
    out.source = heat_source_of(cfg);
    out.u0 = h.at("u0").get<double>();
    out.h = h.at("h").get<double>();
    out.total_time = h.at("T").get<double>();
    out.k_neighbors = h.at("k").get<int>();
    out.bandwidth = h.at("bandwidth").get<double>();
    out.max_points = h.at("max_points").get<size_t>();
    return out;
}

}  // namespace nbv
