#include "molt/config.hpp"

#include "molt/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace molt {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const char* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, out);
    if (r.ec != std::errc() || r.ptr != end || !std::isfinite(out))
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    return out;
}

long to_int(const std::string& key, const std::string& v)
{
    long out = 0;
    const char* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, out);
    if (r.ec != std::errc() || r.ptr != end)
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "off")
        return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty())
            out.push_back(to_double(key, trim(item)));
    return out;
}

std::string join(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + format_number(v[i]);
    return s;
}

bool valid_field(const std::string& f)
{
    return f.size() == 2 && (f[0] == 'w' || f[0] == 'E' || f[0] == 'B') && f[1] >= '1' && f[1] <= '3';
}

} // namespace

std::string format_number(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

int RunConfig::step_count() const
{
    if (steps > 0)
        return steps;
    return static_cast<int>(std::floor(t_final / dt() + 1e-12));
}

void RunConfig::validate() const
{
    if (N < 3)
        throw ConfigError("config: N must be at least 3");
    if (!(cfl > 0.0) || !(epsilon > 0.0) || !(t_final > 0.0))
        throw ConfigError("config: cfl, epsilon and t_final must be positive");
    if (steps < 0)
        throw ConfigError("config: steps must be non-negative");
    if (step_count() < 1)
        throw ConfigError("config: t_final is shorter than one time step");
    tree.validate();
    if (!(gmres.tol > 0.0) || gmres.max_iter < 1)
        throw ConfigError("config: gmres_tol must be positive and gmres_max_iter at least 1");
    if (rep_order < 1 || rep_order > 64)
        throw ConfigError("config: rep_order out of range");
    const FaceTags tags = face_tags(problem);
    bool sm = false;
    for (FaceBc b : tags)
        sm = sm || b == FaceBc::SilverMuller;
    if (sm && formulation != Formulation::SilverMuller)
        throw FormulationError("config: " + to_string(problem) + " has Silver-Mueller faces; use formulation = silver_muller");
    if (!sm && formulation == Formulation::SilverMuller)
        throw FormulationError("config: silver_muller needs a problem with Silver-Mueller faces");
    if (sm && variant == Variant::Dispersive)
        throw FormulationError("config: the dispersive scheme supports PEC boundaries only");
    if (problem == ProblemId::P3 && N % 2 != 0)
        throw ConfigError("config: P3 needs an even N so that no particle sits on the current line");
    for (int a = 0; a < 3; ++a)
        if (!(probe[a] > 0.0 && probe[a] < 1.0))
            throw ConfigError("config: the probe must lie strictly inside the unit cube");
    if (!slice_field.empty()) {
        if (!valid_field(slice_field))
            throw ConfigError("config: slice_field must be one of w1..w3, E1..E3, B1..B3");
        if (slice_axis < 1 || slice_axis > 3)
            throw ConfigError("config: slice_axis must be 1, 2 or 3");
        if (!(slice_coord >= 0.5 * h() && slice_coord <= 1.0 - 0.5 * h()))
            throw ConfigError("config: slice_coord must lie between the outermost particle layers");
    }
}

std::vector<std::string> config_keys()
{
    return {"problem",    "formulation", "variant",       "N",          "cfl",
            "epsilon",    "t_final",     "steps",         "theta",      "order",
            "leaf_capacity", "direct_below", "gmres_tol", "gmres_max_iter", "rep_order",
            "output",     "probe",       "slice_field",   "slice_axis", "slice_coord",
            "slice_times", "deterministic"};
}

void apply_setting(RunConfig& c, const std::string& key_in, const std::string& value_in)
{
    const std::string key = trim(key_in), v = trim(value_in);
    if (key == "problem")
        c.problem = parse_problem(v);
    else if (key == "formulation")
        c.formulation = parse_formulation(v);
    else if (key == "variant")
        c.variant = parse_variant(v);
    else if (key == "N")
        c.N = static_cast<int>(to_int(key, v));
    else if (key == "cfl")
        c.cfl = to_double(key, v);
    else if (key == "epsilon")
        c.epsilon = to_double(key, v);
    else if (key == "t_final")
        c.t_final = to_double(key, v);
    else if (key == "steps")
        c.steps = static_cast<int>(to_int(key, v));
    else if (key == "theta")
        c.tree.theta = to_double(key, v);
    else if (key == "order")
        c.tree.p = static_cast<int>(to_int(key, v));
    else if (key == "leaf_capacity")
        c.tree.leaf_capacity = static_cast<std::size_t>(to_int(key, v));
    else if (key == "direct_below")
        c.tree.direct_below = static_cast<std::size_t>(to_int(key, v));
    else if (key == "gmres_tol")
        c.gmres.tol = to_double(key, v);
    else if (key == "gmres_max_iter")
        c.gmres.max_iter = static_cast<int>(to_int(key, v));
    else if (key == "rep_order")
        c.rep_order = static_cast<int>(to_int(key, v));
    else if (key == "output")
        c.output = v;
    else if (key == "probe") {
        const std::vector<double> p = to_list(key, v);
        if (p.size() != 3)
            throw ConfigError("config: probe expects three comma-separated numbers");
        c.probe = {p[0], p[1], p[2]};
    } else if (key == "slice_field")
        c.slice_field = v;
    else if (key == "slice_axis")
        c.slice_axis = static_cast<int>(to_int(key, v));
    else if (key == "slice_coord")
        c.slice_coord = to_double(key, v);
    else if (key == "slice_times")
        c.slice_times = to_list(key, v);
    else if (key == "deterministic")
        c.deterministic = to_bool(key, v);
    else
        throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig cfg)
{
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

RunConfig load_config(const std::string& path, RunConfig base)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string to_config_text(const RunConfig& c)
{
    std::string s;
    auto put = [&](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
    put("problem", to_string(c.problem));
    put("formulation", to_string(c.formulation));
    put("variant", to_string(c.variant));
    put("N", std::to_string(c.N));
    put("cfl", format_number(c.cfl));
    put("epsilon", format_number(c.epsilon));
    put("t_final", format_number(c.t_final));
    put("steps", std::to_string(c.steps));
    put("theta", format_number(c.tree.theta));
    put("order", std::to_string(c.tree.p));
    put("leaf_capacity", std::to_string(c.tree.leaf_capacity));
    put("direct_below", std::to_string(c.tree.direct_below));
    put("gmres_tol", format_number(c.gmres.tol));
    put("gmres_max_iter", std::to_string(c.gmres.max_iter));
    put("rep_order", std::to_string(c.rep_order));
    put("output", c.output);
    put("probe", join({c.probe.x, c.probe.y, c.probe.z}));
    if (!c.slice_field.empty())
        put("slice_field", c.slice_field);
    put("slice_axis", std::to_string(c.slice_axis));
    put("slice_coord", format_number(c.slice_coord));
    if (!c.slice_times.empty())
        put("slice_times", join(c.slice_times));
    put("deterministic", c.deterministic ? "true" : "false");
    return s;
}

StepperOptions stepper_options(const RunConfig& cfg)
{
    StepperOptions o;
    o.formulation = cfg.formulation;
    o.variant = cfg.variant;
    o.dt = cfg.dt();
    o.tree = cfg.tree;
    o.gmres = cfg.gmres;
    o.rep_order = cfg.rep_order;
    return o;
}

} // namespace molt
