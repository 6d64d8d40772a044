#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "dpinn/common.hpp"
#include "dpinn/grid.hpp"
#include "dpinn/loss.hpp"
#include "dpinn/problems.hpp"

namespace dpinn {

/// One training/evaluation run, fully described. Serialized as flat
/// `key = value` lines; keys omitted from a file keep the problem's
/// defaults. The documented key set:
///
///   problem                   advection | burgers | cavity
///   burgers.nu                viscosity (>= 0)
///   burgers.allow_zero        true | false
///   cavity.reynolds           Reynolds number (rho = U0 = L = 1)
///   domain.a0.min/max         spatial bounds
///   domain.a1.min/max         time bounds (y bounds for cavity)
///   grid.nb0, grid.nb1        cells per axis
///   net.hidden                hidden layer widths, e.g. "5 5"
///   colloc.mode               tensor | random
///   colloc.n0, colloc.n1      per-cell tensor counts
///   colloc.total              total points for random mode
///   interface.points          points per interface (>= 2)
///   train.lr                  Adam learning rate
///   train.max_steps           step budget
///   train.loss_threshold      early stop when total <= threshold (<= 0 off)
///   train.log_interval        metrics every k steps
///   train.checkpoint_interval checkpoint every k steps (0 = only final)
///   train.seed                run seed
///   eval.n0, eval.n1          evaluation tensor grid
///   eval.a1_max               cap on the evaluation a1 window
///   eval.slices               a1 values for slice files
///   eval.centerline_a0/_a1    centerline coordinates (cavity)
///   eval.centerline_points    samples per centerline
///   eval.reference            auto | exact | cole-hopf | characteristics |
///                             cavity-fd | none
///   oracle.n                  cavity reference resolution
///   oracle.cache              oracle cache directory ("" disables)
///   out.dir                   artifact directory
struct RunConfig {
    std::string problem = "advection";
    double burgers_nu = 0.01 / kPi;
    bool burgers_allow_zero = true;
    double cavity_reynolds = 10.0;
    Domain2D domain{{-1.0, 1.0}, {0.0, 0.2}, AxisKind::SpaceTime};
    int nb0 = 25;
    int nb1 = 5;
    std::vector<int> hidden{5, 5};
    CollocationMode colloc_mode = CollocationMode::Tensor;
    int colloc_n0 = 9;
    int colloc_n1 = 5;
    long colloc_total = 0;
    int interface_points = 10;
    double lr = 1e-3;
    long max_steps = 50000;
    double loss_threshold = 0.0;
    long log_interval = 100;
    long checkpoint_interval = 5000;
    std::uint64_t seed = 7;
    int eval_n0 = 201;
    int eval_n1 = 21;
    double eval_a1_max = 0.2;
    std::vector<double> slices{0.0, 0.1, 0.2};
    double centerline_a0 = 0.5;
    double centerline_a1 = 0.5;
    int centerline_points = 101;
    std::string reference = "auto";
    int oracle_n = 129;
    std::string oracle_cache = "oracle_cache";
    std::string out_dir = "runs/out";

    bool operator==(const RunConfig&) const = default;
};

inline bool domain2d_equal(const Domain2D& a, const Domain2D& b) {
    return a.axis0.lo == b.axis0.lo && a.axis0.hi == b.axis0.hi && a.axis1.lo == b.axis1.lo &&
           a.axis1.hi == b.axis1.hi && a.kind == b.kind;
}

/// Problem-specific defaults matching the shipped presets.
inline RunConfig default_config(const std::string& problem) {
    RunConfig c;
    c.problem = problem;
    if (problem == "advection") {
        // defaults above
    } else if (problem == "burgers") {
        c.domain = {{-1.0, 1.0}, {0.0, 0.5}, AxisKind::SpaceTime};
        c.nb0 = 25;
        c.nb1 = 10;
        c.colloc_n0 = 4;
        c.colloc_n1 = 4;
        c.eval_n0 = 91;
        c.eval_n1 = 11;
        c.eval_a1_max = 0.5;
        c.slices = {0.0, 0.25, 0.5};
        c.out_dir = "runs/out";
    } else if (problem == "cavity") {
        c.domain = {{0.0, 1.0}, {0.0, 1.0}, AxisKind::SpaceSpace};
        c.nb0 = 10;
        c.nb1 = 10;
        c.colloc_n0 = 3;
        c.colloc_n1 = 3;
        c.lr = 1e-4;
        c.max_steps = 100000;
        c.eval_n0 = 51;
        c.eval_n1 = 51;
        c.eval_a1_max = 1.0;
        c.slices = {};
    } else {
        throw invalid_configuration("unknown problem '" + problem + "'");
    }
    return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw invalid_configuration("config key '" + key + "': bad number '" + v + "'");
    }
}

inline long parse_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw invalid_configuration("config key '" + key + "': bad integer '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw invalid_configuration("config key '" + key + "': bad boolean '" + v + "'");
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& key, const std::string& v, Parse parse) {
    std::vector<T> out;
    std::istringstream is(v);
    std::string tok;
    while (is >> tok) out.push_back(parse(key, tok));
    return out;
}

} // namespace detail

inline void apply_config_key(RunConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "problem")
        c.problem = value;
    else if (key == "burgers.nu")
        c.burgers_nu = parse_double(key, value);
    else if (key == "burgers.allow_zero")
        c.burgers_allow_zero = parse_bool(key, value);
    else if (key == "cavity.reynolds")
        c.cavity_reynolds = parse_double(key, value);
    else if (key == "domain.a0.min")
        c.domain.axis0.lo = parse_double(key, value);
    else if (key == "domain.a0.max")
        c.domain.axis0.hi = parse_double(key, value);
    else if (key == "domain.a1.min")
        c.domain.axis1.lo = parse_double(key, value);
    else if (key == "domain.a1.max")
        c.domain.axis1.hi = parse_double(key, value);
    else if (key == "grid.nb0")
        c.nb0 = static_cast<int>(parse_long(key, value));
    else if (key == "grid.nb1")
        c.nb1 = static_cast<int>(parse_long(key, value));
    else if (key == "net.hidden") {
        c.hidden.clear();
        for (long v : parse_list<long>(key, value, parse_long)) c.hidden.push_back(static_cast<int>(v));
    } else if (key == "colloc.mode") {
        if (value == "tensor")
            c.colloc_mode = CollocationMode::Tensor;
        else if (value == "random")
            c.colloc_mode = CollocationMode::Random;
        else
            throw invalid_configuration("config key 'colloc.mode': expected tensor|random, got '" +
                                        value + "'");
    } else if (key == "colloc.n0")
        c.colloc_n0 = static_cast<int>(parse_long(key, value));
    else if (key == "colloc.n1")
        c.colloc_n1 = static_cast<int>(parse_long(key, value));
    else if (key == "colloc.total")
        c.colloc_total = parse_long(key, value);
    else if (key == "interface.points")
        c.interface_points = static_cast<int>(parse_long(key, value));
    else if (key == "train.lr")
        c.lr = parse_double(key, value);
    else if (key == "train.max_steps")
        c.max_steps = parse_long(key, value);
    else if (key == "train.loss_threshold")
        c.loss_threshold = parse_double(key, value);
    else if (key == "train.log_interval")
        c.log_interval = parse_long(key, value);
    else if (key == "train.checkpoint_interval")
        c.checkpoint_interval = parse_long(key, value);
    else if (key == "train.seed")
        c.seed = static_cast<std::uint64_t>(parse_long(key, value));
    else if (key == "eval.n0")
        c.eval_n0 = static_cast<int>(parse_long(key, value));
    else if (key == "eval.n1")
        c.eval_n1 = static_cast<int>(parse_long(key, value));
    else if (key == "eval.a1_max")
        c.eval_a1_max = parse_double(key, value);
    else if (key == "eval.slices")
        c.slices = parse_list<double>(key, value, parse_double);
    else if (key == "eval.centerline_a0")
        c.centerline_a0 = parse_double(key, value);
    else if (key == "eval.centerline_a1")
        c.centerline_a1 = parse_double(key, value);
    else if (key == "eval.centerline_points")
        c.centerline_points = static_cast<int>(parse_long(key, value));
    else if (key == "eval.reference")
        c.reference = value;
    else if (key == "oracle.n")
        c.oracle_n = static_cast<int>(parse_long(key, value));
    else if (key == "oracle.cache")
        c.oracle_cache = value;
    else if (key == "out.dir")
        c.out_dir = value;
    else
        throw invalid_configuration("unknown configuration key '" + key + "'");
}

inline RunConfig parse_config(std::istream& is) {
    // First pass finds the problem so defaults are problem-appropriate,
    // second pass applies every key in file order.
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int lineno = 0;
    std::string problem = "advection";
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw invalid_configuration("config line " + std::to_string(lineno) +
                                        ": expected 'key = value', got '" + line + "'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw invalid_configuration("config line " + std::to_string(lineno) + ": empty key");
        if (key == "problem") problem = value;
        entries.emplace_back(key, value);
    }
    RunConfig c = default_config(problem);
    for (const auto& [key, value] : entries) apply_config_key(c, key, value);
    return c;
}

inline RunConfig parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw invalid_configuration("cannot open config file: " + path);
    return parse_config(is);
}

inline std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    auto put = [&os](const std::string& key, const std::string& value) {
        os << key << " = " << value << "\n";
    };
    put("problem", c.problem);
    if (c.problem == "burgers") {
        put("burgers.nu", format_double(c.burgers_nu));
        put("burgers.allow_zero", c.burgers_allow_zero ? "true" : "false");
    }
    if (c.problem == "cavity") put("cavity.reynolds", format_double(c.cavity_reynolds));
    put("domain.a0.min", format_double(c.domain.axis0.lo));
    put("domain.a0.max", format_double(c.domain.axis0.hi));
    put("domain.a1.min", format_double(c.domain.axis1.lo));
    put("domain.a1.max", format_double(c.domain.axis1.hi));
    put("grid.nb0", std::to_string(c.nb0));
    put("grid.nb1", std::to_string(c.nb1));
    {
        std::string h;
        for (int w : c.hidden) h += (h.empty() ? "" : " ") + std::to_string(w);
        put("net.hidden", h);
    }
    put("colloc.mode", c.colloc_mode == CollocationMode::Tensor ? "tensor" : "random");
    put("colloc.n0", std::to_string(c.colloc_n0));
    put("colloc.n1", std::to_string(c.colloc_n1));
    put("colloc.total", std::to_string(c.colloc_total));
    put("interface.points", std::to_string(c.interface_points));
    put("train.lr", format_double(c.lr));
    put("train.max_steps", std::to_string(c.max_steps));
    put("train.loss_threshold", format_double(c.loss_threshold));
    put("train.log_interval", std::to_string(c.log_interval));
    put("train.checkpoint_interval", std::to_string(c.checkpoint_interval));
    put("train.seed", std::to_string(c.seed));
    put("eval.n0", std::to_string(c.eval_n0));
    put("eval.n1", std::to_string(c.eval_n1));
    put("eval.a1_max", format_double(c.eval_a1_max));
    {
        std::string s;
        for (double v : c.slices) s += (s.empty() ? "" : " ") + format_double(v);
        if (!c.slices.empty()) put("eval.slices", s);
    }
    put("eval.centerline_a0", format_double(c.centerline_a0));
    put("eval.centerline_a1", format_double(c.centerline_a1));
    put("eval.centerline_points", std::to_string(c.centerline_points));
    put("eval.reference", c.reference);
    put("oracle.n", std::to_string(c.oracle_n));
    put("oracle.cache", c.oracle_cache);
    put("out.dir", c.out_dir);
    return os.str();
}

/// Validate against the preconditions of every module the run touches;
/// error messages name the offending key.
inline void validate_config(const RunConfig& c) {
    if (c.problem != "advection" && c.problem != "burgers" && c.problem != "cavity")
        throw invalid_configuration("problem: unknown problem '" + c.problem + "'");
    if (!(c.domain.axis0.lo < c.domain.axis0.hi))
        throw invalid_configuration("domain.a0: bounds must satisfy min < max");
    if (!(c.domain.axis1.lo < c.domain.axis1.hi))
        throw invalid_configuration("domain.a1: bounds must satisfy min < max");
    if (c.nb0 < 1) throw invalid_configuration("grid.nb0: must be >= 1");
    if (c.nb1 < 1) throw invalid_configuration("grid.nb1: must be >= 1");
    if (c.hidden.empty()) throw invalid_configuration("net.hidden: needs at least one layer");
    for (int w : c.hidden)
        if (w < 1) throw invalid_configuration("net.hidden: widths must be >= 1");
    if (c.colloc_mode == CollocationMode::Tensor) {
        if (c.colloc_n0 < 1) throw invalid_configuration("colloc.n0: must be >= 1");
        if (c.colloc_n1 < 1) throw invalid_configuration("colloc.n1: must be >= 1");
    } else if (c.colloc_total < 1) {
        throw invalid_configuration("colloc.total: random mode needs a positive total");
    }
    if (c.interface_points < 2) throw invalid_configuration("interface.points: must be >= 2");
    if (c.lr < 0.0) throw invalid_configuration("train.lr: must be >= 0");
    if (c.max_steps < 0) throw invalid_configuration("train.max_steps: must be >= 0");
    if (c.log_interval < 1) throw invalid_configuration("train.log_interval: must be >= 1");
    if (c.checkpoint_interval < 0)
        throw invalid_configuration("train.checkpoint_interval: must be >= 0");
    if (c.eval_n0 < 2) throw invalid_configuration("eval.n0: must be >= 2");
    if (c.eval_n1 < 2) throw invalid_configuration("eval.n1: must be >= 2");
    if (c.centerline_points < 2)
        throw invalid_configuration("eval.centerline_points: must be >= 2");
    if (c.problem == "burgers" && c.burgers_nu < 0.0)
        throw invalid_configuration("burgers.nu: must be >= 0");
    if (c.problem == "burgers" && c.burgers_nu == 0.0 && !c.burgers_allow_zero)
        throw invalid_configuration("burgers.nu: zero viscosity disallowed by burgers.allow_zero");
    if (c.problem == "cavity" && !(c.cavity_reynolds > 0.0))
        throw invalid_configuration("cavity.reynolds: must be positive");
    if (c.problem == "cavity" &&
        !(c.domain.axis0.lo == 0.0 && c.domain.axis0.hi == 1.0 && c.domain.axis1.lo == 0.0 &&
          c.domain.axis1.hi == 1.0))
        throw invalid_configuration("domain: cavity runs use the unit square [0,1]x[0,1]");
    if (c.oracle_n < 33) throw invalid_configuration("oracle.n: must be >= 33");
    const bool known_ref = c.reference == "auto" || c.reference == "exact" ||
                           c.reference == "cole-hopf" || c.reference == "characteristics" ||
                           c.reference == "cavity-fd" || c.reference == "none";
    if (!known_ref)
        throw invalid_configuration("eval.reference: unknown selector '" + c.reference + "'");
}

/// Instantiate the configured problem over the configured domain.
inline ProblemDefinition make_problem(const RunConfig& c) {
    if (c.problem == "advection") {
        Domain2D d = c.domain;
        d.kind = AxisKind::SpaceTime;
        return advection_problem(d);
    }
    if (c.problem == "burgers") {
        ProblemDefinition p = burgers_problem(c.burgers_nu, c.burgers_allow_zero);
        p.default_domain = c.domain;
        p.default_domain.kind = AxisKind::SpaceTime;
        return p;
    }
    if (c.problem == "cavity") {
        return cavity_problem(CavityConstants::from_reynolds(c.cavity_reynolds));
    }
    throw invalid_configuration("problem: unknown problem '" + c.problem + "'");
}

inline TrainingSetOptions training_options(const RunConfig& c) {
    TrainingSetOptions o;
    o.colloc_n0 = c.colloc_n0;
    o.colloc_n1 = c.colloc_n1;
    o.mode = c.colloc_mode;
    o.random_total = c.colloc_total;
    o.seed = split_seed(c.seed, 0xC011);
    o.interface_points = c.interface_points;
    return o;
}

/// Per-cell layer sizes: two inputs, configured hidden widths, problem outputs.
inline std::vector<int> layer_sizes_for(const RunConfig& c, const ProblemDefinition& p) {
    std::vector<int> sizes{2};
    sizes.insert(sizes.end(), c.hidden.begin(), c.hidden.end());
    sizes.push_back(p.output_dims);
    return sizes;
}

/// Deterministic per-cell initialization from the run seed.
inline std::vector<NetworkParameters> init_cell_params(const RunConfig& c,
                                                       const ProblemDefinition& p, int cell_count) {
    std::vector<NetworkParameters> nets;
    nets.reserve(cell_count);
    const auto sizes = layer_sizes_for(c, p);
    for (int i = 0; i < cell_count; ++i)
        nets.push_back(init_params(sizes, split_seed(c.seed, static_cast<std::uint64_t>(i))));
    return nets;
}

} // namespace dpinn
