#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>

#include "oudiff/collapse.hpp"
#include "oudiff/error.hpp"
#include "oudiff/experiments.hpp"
#include "oudiff/parallel.hpp"
#include "oudiff/rng.hpp"
#include "oudiff/sampler.hpp"
#include "oudiff/speciation.hpp"

namespace oudiff::cli {

namespace {

using Json = nlohmann::ordered_json;

struct Exit : std::runtime_error {
    int code;
    Exit(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

[[noreturn]] void bad_config(const std::string& msg) { throw Exit(invalid_config, msg); }

enum class Kind { real, integer, seed, text, real_list, text_list };

struct Param {
    std::string key;  // JSON key; the flag is --key with '_' -> '-'
    Kind kind;
    Json def;
    std::string help;
};

struct Io {
    std::ostream& out;
    std::ostream& err;
    std::string command;
    bool dry_run = false;
};

struct Command {
    std::string name;
    std::string help;
    std::vector<Param> params;
    std::function<int(const Json&, Io&)> exec;
};

std::string flag_of(const std::string& key) {
    std::string f = "--" + key;
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
}

// ---- value conversion ----

double parse_real(const std::string& key, std::string_view s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        bad_config(key + ": expected a finite number, got '" + std::string(s) + "'");
    return v;
}

std::int64_t parse_int(const std::string& key, std::string_view s) {
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        bad_config(key + ": expected an integer, got '" + std::string(s) + "'");
    return v;
}

std::uint64_t parse_seed(const std::string& key, std::string_view s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        bad_config(key + ": expected an unsigned 64-bit integer, got '" + std::string(s) + "'");
    return v;
}

std::vector<std::string> split(std::string_view s) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = s.find(',', start);
        out.emplace_back(s.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

Json value_from_string(const Param& p, const std::string& s) {
    switch (p.kind) {
        case Kind::real: return parse_real(p.key, s);
        case Kind::integer: return parse_int(p.key, s);
        case Kind::seed: return parse_seed(p.key, s);
        case Kind::text: return s;
        case Kind::real_list: {
            Json arr = Json::array();
            for (const std::string& item : split(s)) arr.push_back(parse_real(p.key, item));
            return arr;
        }
        case Kind::text_list: {
            Json arr = Json::array();
            for (const std::string& item : split(s)) arr.push_back(item);
            return arr;
        }
    }
    return nullptr;
}

Json value_from_json(const Param& p, const Json& v) {
    const auto type_error = [&](const char* what) { bad_config(p.key + ": expected " + std::string(what)); };
    switch (p.kind) {
        case Kind::real:
            if (!v.is_number()) type_error("a number");
            if (!std::isfinite(v.get<double>())) type_error("a finite number");
            return v.get<double>();
        case Kind::integer:
            if (!v.is_number_integer()) type_error("an integer");
            return v.get<std::int64_t>();
        case Kind::seed:
            if (v.is_number_unsigned()) return v.get<std::uint64_t>();
            if (v.is_string()) return parse_seed(p.key, v.get<std::string>());
            type_error("a non-negative integer");
            return nullptr;
        case Kind::text:
            if (!v.is_string()) type_error("a string");
            return v;
        case Kind::real_list: {
            if (v.is_string()) return value_from_string(p, v.get<std::string>());
            if (!v.is_array()) type_error("an array of numbers");
            Json arr = Json::array();
            for (const Json& x : v) {
                if (!x.is_number() || !std::isfinite(x.get<double>())) type_error("an array of finite numbers");
                arr.push_back(x.get<double>());
            }
            return arr;
        }
        case Kind::text_list: {
            if (v.is_string()) return value_from_string(p, v.get<std::string>());
            if (!v.is_array()) type_error("an array of strings");
            for (const Json& x : v)
                if (!x.is_string()) type_error("an array of strings");
            return v;
        }
    }
    return nullptr;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Exit(io_failure, "cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    if (f.bad()) throw Exit(io_failure, "error reading config file '" + path + "'");
    return ss.str();
}

Json resolve(const Command& cmd, const std::string& config_path, const std::map<std::string, std::string>& flags) {
    Json cfg = Json::object();
    for (const Param& p : cmd.params) cfg[p.key] = p.def;
    bool seed_set = false;
    if (!config_path.empty()) {
        Json file;
        try {
            file = Json::parse(read_file(config_path));
        } catch (const Json::parse_error& e) {
            bad_config("config file '" + config_path + "' is not valid JSON: " + e.what());
        }
        if (!file.is_object()) bad_config("config file must hold a JSON object");
        for (const auto& [key, value] : file.items()) {
            const auto it = std::find_if(cmd.params.begin(), cmd.params.end(),
                                         [&](const Param& p) { return p.key == key; });
            if (it == cmd.params.end()) bad_config("unknown config key '" + key + "' for " + cmd.name);
            cfg[key] = value_from_json(*it, value);
            if (key == "seed") seed_set = true;
        }
    }
    for (const Param& p : cmd.params) {
        const auto it = flags.find(p.key);
        if (it == flags.end()) continue;
        cfg[p.key] = value_from_string(p, it->second);
        if (p.key == "seed") seed_set = true;
    }
    if (!seed_set && cfg.contains("seed"))
        if (const char* env = std::getenv("OUDIFF_SEED"); env && *env) cfg["seed"] = parse_seed("OUDIFF_SEED", env);
    return cfg;
}

// ---- typed access ----

double real(const Json& c, const char* k) { return c.at(k).get<double>(); }

int integer(const Json& c, const char* k, int lo = 1) {
    const std::int64_t v = c.at(k).get<std::int64_t>();
    if (v < lo || v > std::numeric_limits<int>::max())
        bad_config(std::string(k) + " must be an integer >= " + std::to_string(lo));
    return static_cast<int>(v);
}

std::string text(const Json& c, const char* k) { return c.at(k).get<std::string>(); }

std::vector<double> reals(const Json& c, const char* k) { return c.at(k).get<std::vector<double>>(); }

std::uint64_t seed_of(const Json& c) { return c.at("seed").get<std::uint64_t>(); }

template <class T>
T choose(const Json& c, const char* k, std::initializer_list<std::pair<const char*, T>> options) {
    const std::string v = text(c, k);
    std::string names;
    for (const auto& [name, value] : options) {
        if (v == name) return value;
        names += names.empty() ? name : std::string(", ") + name;
    }
    bad_config(std::string(k) + " must be one of: " + names + " (got '" + v + "')");
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return out;
}

// ---- output ----

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string num(std::optional<double> v) { return v ? num(*v) : std::string(); }

Json json_opt(std::optional<double> v) { return v ? Json(*v) : Json(nullptr); }

void emit(const std::string& body, const std::string& path, std::ostream& out) {
    if (path.empty()) {
        out << body;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Exit(io_failure, "cannot open output file '" + path + "'");
    f << body;
    f.close();
    if (!f) throw Exit(io_failure, "error writing output file '" + path + "'");
}

void emit_json(const Json& j, const Json& cfg, std::ostream& out) { emit(j.dump(2) + "\n", text(cfg, "out"), out); }

bool dry_run(const Json& cfg, Io& io) {
    if (!io.dry_run) return false;
    Json j = Json::object();
    j["command"] = io.command;
    j["config"] = cfg;
    io.out << j.dump(2) << "\n";
    return true;
}

// ---- shared parameter groups ----

Param P(std::string key, Kind kind, Json def, std::string help) {
    return {std::move(key), kind, std::move(def), std::move(help)};
}

std::vector<Param> model_params() {
    return {P("coupling", Kind::text, "symmetric", "symmetric | anisotropic"),
            P("beta", Kind::real, 1.0, "mean-reversion rate"),
            P("g", Kind::real, 0.0, "cross-coupling"),
            P("sigma_w2", Kind::real, 2.0, "noise variance")};
}

std::vector<Param> mixture_params() {
    return {P("sigma2", Kind::real, 1.0, "data variance per channel"),
            P("m_plus2", Kind::real, 1.0, "squared mean norm on the common mode (symmetric)"),
            P("m_minus2", Kind::real, 0.0, "squared mean norm on the difference mode (symmetric)"),
            P("m_x2", Kind::real, 1.0, "squared mean norm of mu_x (anisotropic)"),
            P("m_y2", Kind::real, 1.0, "squared mean norm of mu_y (anisotropic)"),
            P("theta", Kind::real, 0.0, "angle between mu_x and mu_y (anisotropic)")};
}

std::vector<Param> join(std::initializer_list<std::vector<Param>> groups) {
    std::vector<Param> out;
    for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
    return out;
}

Param out_param(const char* what) { return P("out", Kind::text, "", std::string("output path (default: stdout) for ") + what); }
Param jobs_param() { return P("jobs", Kind::integer, 1, "worker threads; output does not depend on it"); }
Param seed_param() { return P("seed", Kind::seed, 1, "master seed (fallback: OUDIFF_SEED)"); }

ModelSpec model_of(const Json& c, int dim = 1) {
    const CouplingKind kind = choose<CouplingKind>(
        c, "coupling", {{"symmetric", CouplingKind::symmetric}, {"anisotropic", CouplingKind::anisotropic}});
    ModelSpec s = kind == CouplingKind::symmetric
                      ? ModelSpec::symmetric(real(c, "beta"), real(c, "g"), real(c, "sigma_w2"), dim)
                      : ModelSpec::anisotropic(real(c, "beta"), real(c, "g"), real(c, "sigma_w2"), dim);
    s.validate();
    return s;
}

MixtureInit mixture_of(const Json& c, const ModelSpec& s, int dim = 1) {
    MixtureInit init = s.kind == CouplingKind::symmetric
                           ? MixtureInit::modes(real(c, "m_plus2"), real(c, "m_minus2"), real(c, "sigma2"), dim)
                           : MixtureInit::angled(real(c, "m_x2"), real(c, "m_y2"), real(c, "theta"), real(c, "sigma2"), dim);
    init.validate();
    return init;
}

// ---- commands ----

int cmd_speciation(const Json& c, Io& io) {
    const ModelSpec s = model_of(c);
    const MixtureInit init = mixture_of(c, s);
    const double t_max = real(c, "t_max");
    if (t_max < 0.0) bad_config("t_max must be >= 0");
    if (dry_run(c, io)) return ok;
    const SpeciationResult r = speciation_time(s, init, t_max);
    Json j = Json::object();
    j["t_s"] = json_opt(r.t_s);
    j["regime"] = std::string(to_string(r.regime));
    j["kappa0"] = r.kappa0;
    j["sup_kappa"] = r.sup_kappa;
    if (s.kind == CouplingKind::anisotropic) j["g_crit"] = json_opt(critical_coupling(s, init));
    if (r.regime == Regime::unstable) j["violation_time"] = json_opt(r.violation_time);
    emit_json(j, c, io.out);
    if (r.regime == Regime::unstable) {
        io.err << "oudiff: model is unstable (beta <= |g|)\n";
        return unstable;
    }
    return ok;
}

int cmd_collapse(const Json& c, Io& io) {
    const ModelSpec s = model_of(c);
    const double ratio = real(c, "ratio");
    if (!(ratio > 0.0)) bad_config("ratio must be positive");
    const CollapseParams p = CollapseParams::from_ratio(real(c, "alpha"), ratio, s);
    if (dry_run(c, io)) return ok;
    if (!s.is_stable()) {
        io.err << "oudiff: collapse needs a stable model (beta > |g|)\n";
        return unstable;
    }
    Json j = Json::object();
    if (s.kind == CouplingKind::symmetric) {
        j["t_c"] = collapse_time_symmetric(p).t_c;
        j["t_c_plus"] = collapse_time_mode(p, Mode::plus).t_c;
        j["t_c_minus"] = collapse_time_mode(p, Mode::minus).t_c;
        j["t_max"] = collapse_bound(p);
        j["t_c_det"] = collapse_time_det(p).t_c;
    } else {
        j["t_c"] = collapse_time_det(p).t_c;
        j["t_c_conditional"] = collapse_time_conditional(p).t_c;
        j["t_max"] = collapse_bound(p);
    }
    emit_json(j, c, io.out);
    return ok;
}

int cmd_stability(const Json& c, Io& io) {
    const ModelSpec s = model_of(c);
    const MixtureInit init = mixture_of(c, s);
    const double t_end = real(c, "t_end");
    if (t_end < 0.0) bad_config("t_end must be >= 0");
    const int points = integer(c, "points", 2);
    if (dry_run(c, io)) return ok;
    const StabilityVerdict v = stability_check(s, init, t_end, points);
    Json j = Json::object();
    j["stable"] = v.stable;
    j["variance_bound"] = v.variance_bound;
    j["sigma2"] = v.sigma2;
    j["first_violation"] = json_opt(v.first_violation);
    emit_json(j, c, io.out);
    return v.stable ? ok : unstable;
}

int cmd_phase_diagram(const Json& c, Io& io) {
    PhaseDiagramRequest req;
    req.spec = ModelSpec::anisotropic(real(c, "beta"), 0.0, real(c, "sigma_w2"));
    req.spec.validate();
    req.init = MixtureInit::angled(real(c, "m_x2"), real(c, "m_y2"), 0.0, real(c, "sigma2"));
    req.init.validate();
    req.g_grid = linspace(real(c, "g_min"), real(c, "g_max"), integer(c, "g_count"));
    req.theta_grid = linspace(0.0, std::numbers::pi, integer(c, "theta_count"));
    req.t_max_search = real(c, "t_max");
    if (req.t_max_search < 0.0) bad_config("t_max must be >= 0");
    req.jobs = integer(c, "jobs");
    if (dry_run(c, io)) return ok;
    const std::vector<PhaseCell> cells = phase_diagram(req);
    std::string csv = "g,theta,regime,t_s,kappa0,g_crit\n";
    for (const PhaseCell& cell : cells) {
        if (!cell.error.empty()) {
            io.err << "oudiff: cell g=" << num(cell.g) << " theta=" << num(cell.theta) << ": " << cell.error << "\n";
            csv += num(cell.g) + "," + num(cell.theta) + ",error,,,\n";
            continue;
        }
        csv += num(cell.g) + "," + num(cell.theta) + "," + std::string(to_string(cell.result.regime)) + "," +
               num(cell.result.t_s) + "," + num(cell.result.kappa0) + "," + num(cell.g_crit) + "\n";
    }
    emit(csv, text(c, "out"), io.out);
    return ok;
}

int cmd_sample(const Json& c, Io& io) {
    const int dim = integer(c, "dim");
    const ModelSpec s = model_of(c, dim);
    const MixtureInit init = mixture_of(c, s, dim);
    enum class Mode_ { forward, reverse, flow };
    const Mode_ mode = choose<Mode_>(c, "mode", {{"forward", Mode_::forward}, {"reverse", Mode_::reverse}, {"flow", Mode_::flow}});
    const bool empirical = choose<bool>(c, "score", {{"population", false}, {"empirical", true}});
    SampleOptions opts;
    opts.horizon = real(c, "horizon");
    opts.steps = integer(c, "steps");
    opts.noise.kind = choose<NoiseMode::Kind>(
        c, "noise", {{"isotropic", NoiseMode::Kind::isotropic}, {"mode-shaped", NoiseMode::Kind::mode_shaped}});
    opts.noise.g = s.g;
    opts.validate();
    const int paths = integer(c, "paths");
    const int n_train = integer(c, "n_train");
    const int jobs = integer(c, "jobs");
    const std::uint64_t seed = seed_of(c);
    if (empirical && mode == Mode_::forward) bad_config("score is unused by the forward sampler; use --score population");
    if (dry_run(c, io)) return ok;
    if (!s.is_stable()) {
        io.err << "oudiff: sampling needs a stable model (beta > |g|)\n";
        return unstable;
    }

    std::unique_ptr<ScoreField> score;
    if (mode != Mode_::forward) {
        if (empirical) {
            Rng drng(derive_seed(seed, {1}));
            score = std::make_unique<EmpiricalScore>(s, draw_dataset(init, static_cast<std::size_t>(n_train), drng));
        } else {
            score = std::make_unique<PopulationScore>(s, init);
        }
    }
    const MeanVectors mv = materialize_means(init);
    std::vector<State> finals(paths);
    std::vector<int> labels(paths, 0);
    parallel_for(static_cast<std::size_t>(paths), jobs, [&](std::size_t p) {
        Rng rng(derive_seed(seed, {0, p}));
        if (mode == Mode_::forward) {
            const Trajectory tr = forward_sample(s, init, opts, rng);
            finals[p] = tr.final_state();
            labels[p] = tr.labels[0];
            return;
        }
        finals[p] = mode == Mode_::reverse ? reverse_sample(s, *score, opts, rng).final_state()
                                           : flow_sample(s, *score, opts, draw_stationary(s, rng)).final_state();
        double proj = 0.0;
        for (int i = 0; i < dim; ++i) proj += mv.x[i] * finals[p][i] + mv.y[i] * finals[p][dim + i];
        labels[p] = proj > 0.0 ? 1 : (proj < 0.0 ? -1 : 0);
    });
    std::string csv = "path,label";
    for (int i = 0; i < dim; ++i) csv += ",x" + std::to_string(i);
    for (int i = 0; i < dim; ++i) csv += ",y" + std::to_string(i);
    csv += "\n";
    for (int p = 0; p < paths; ++p) {
        csv += std::to_string(p) + "," + std::to_string(labels[p]);
        for (double v : finals[p]) csv += "," + num(v);
        csv += "\n";
    }
    emit(csv, text(c, "out"), io.out);
    return ok;
}

int cmd_toy(const Json& c, Io& io) {
    ToyExperimentConfig cfg;
    ToyConfig& b = cfg.base;
    b.dim = integer(c, "dim", 2);
    b.beta = real(c, "beta");
    b.sigma_w2 = real(c, "sigma_w2");
    b.horizon = real(c, "horizon");
    b.steps = integer(c, "steps");
    b.sigma2 = real(c, "sigma2");
    b.m = real(c, "m");
    b.trials = integer(c, "trials");
    b.seed = seed_of(c);
    b.schedule.horizon = b.horizon;
    cfg.thetas = reals(c, "thetas");
    if (cfg.thetas.empty()) cfg.thetas = ToyExperimentConfig::default_thetas(integer(c, "theta_count"));
    cfg.g0s = reals(c, "g0s");
    if (cfg.g0s.empty()) bad_config("g0s must not be empty");
    cfg.schedules.clear();
    for (const auto& name : c.at("schedules")) {
        const auto k = parse_schedule(name.get<std::string>());
        if (!k) bad_config("unknown schedule '" + name.get<std::string>() + "' (const, late, early)");
        cfg.schedules.push_back(*k);
    }
    if (cfg.schedules.empty()) bad_config("schedules must not be empty");
    cfg.t0 = real(c, "t0") < 0.0 ? 0.5 * b.horizon : real(c, "t0");
    b.schedule.t0 = cfg.t0;
    cfg.jobs = integer(c, "jobs");
    b.validate();
    for (double th : cfg.thetas)
        if (!(th >= 0.0 && th <= std::numbers::pi)) bad_config("thetas must lie in [0, pi]");
    if (dry_run(c, io)) return ok;
    const std::vector<ToyRecord> rows = run_toy_experiment(cfg);
    std::string csv = "theta,g0,schedule,d_accuracy,d_mse,d_nll,acc_ci_lo,acc_ci_hi,n\n";
    for (const ToyRecord& r : rows) {
        csv += num(r.theta) + "," + num(r.g0) + "," + std::string(to_string(r.schedule)) + ",";
        if (!r.error.empty()) {
            io.err << "oudiff: cell theta=" << num(r.theta) << " g0=" << num(r.g0) << ": " << r.error << "\n";
            csv += ",,,,,0\n";
            continue;
        }
        csv += num(r.d_accuracy) + "," + num(r.d_mse) + "," + num(r.d_nll) + "," + num(r.acc_ci.low) + "," +
               num(r.acc_ci.high) + "," + std::to_string(r.coupled.n) + "\n";
    }
    emit(csv, text(c, "out"), io.out);
    return ok;
}

int cmd_clone(const Json& c, Io& io) {
    CloneConfig cfg;
    cfg.dim = integer(c, "dim");
    cfg.beta = real(c, "beta");
    cfg.sigma_w2 = real(c, "sigma_w2");
    cfg.sigma2 = real(c, "sigma2");
    cfg.m2 = real(c, "m2");
    cfg.horizon = real(c, "horizon");
    cfg.steps = integer(c, "steps");
    cfg.scan_times = reals(c, "scan_times");
    cfg.repeats = integer(c, "repeats");
    cfg.batch = integer(c, "batch");
    cfg.baseline_factor = integer(c, "baseline_factor");
    cfg.phi_star = real(c, "phi_star");
    cfg.conf = real(c, "conf");
    cfg.seed = seed_of(c);
    cfg.jobs = integer(c, "jobs");
    cfg.validate();
    const std::vector<double> gs = reals(c, "g_values");
    if (gs.empty()) bad_config("g_values must not be empty");
    if (dry_run(c, io)) return ok;
    for (double g : gs)
        if (!cfg.model(g).is_stable()) {
            io.err << "oudiff: g = " << num(g) << " is unstable (beta <= |g|)\n";
            return unstable;
        }
    const std::vector<CloneOutcome> res = run_clone_experiment(cfg, gs);
    std::string csv = "g,scan_t,phi_u,phi_u_lo,phi_u_hi,phi_u_ex,phi_v,phi_v_lo,phi_v_hi,phi_v_ex\n";
    Json summary = Json::array();
    for (const CloneOutcome& o : res) {
        for (std::size_t j = 0; j < cfg.scan_times.size(); ++j)
            csv += num(o.g) + "," + num(cfg.scan_times[j]) + "," + num(o.u.phi_raw[j]) + "," + num(o.u.wilson_low[j]) +
                   "," + num(o.u.wilson_high[j]) + "," + num(o.u.phi_excess[j]) + "," + num(o.v.phi_raw[j]) + "," +
                   num(o.v.wilson_low[j]) + "," + num(o.v.wilson_high[j]) + "," + num(o.v.phi_excess[j]) + "\n";
        Json row = Json::object();
        row["g"] = o.g;
        row["t_spec_u"] = json_opt(o.u.crossing);
        row["t_spec_v"] = json_opt(o.v.crossing);
        row["gap"] = json_opt(o.gap());
        row["ci_width_u"] = json_opt(o.u.ci_width());
        row["ci_width_v"] = json_opt(o.v.ci_width());
        row["combined_ci_width"] = json_opt(o.combined_ci_width());
        row["baseline_u"] = o.u.baseline;
        row["baseline_v"] = o.v.baseline;
        summary.push_back(row);
    }
    emit(csv, text(c, "out"), io.out);
    if (const std::string sp = text(c, "summary"); !sp.empty()) emit(summary.dump(2) + "\n", sp, io.out);
    return ok;
}

std::vector<Command> commands() {
    std::vector<Command> cmds;
    cmds.push_back({"speciation", "speciation time of the symmetric or anisotropic model",
                    join({model_params(), mixture_params(),
                          {P("t_max", Kind::real, 0.0, "search window (0: 10/beta)"), out_param("JSON")}}),
                    cmd_speciation});
    cmds.push_back({"collapse", "collapse time from the entropy density alpha",
                    join({model_params(),
                          {P("alpha", Kind::real, 1.0, "log n / (2d)"),
                           P("ratio", Kind::real, 1.0, "sigma2 / sigma_w2"), out_param("JSON")}}),
                    cmd_collapse});
    cmds.push_back({"phase-diagram", "anisotropic (g, theta) speciation grid as CSV",
                    {P("beta", Kind::real, 1.0, "mean-reversion rate"), P("sigma_w2", Kind::real, 2.0, "noise variance"),
                     P("sigma2", Kind::real, 1.0, "data variance"), P("m_x2", Kind::real, 1.0, "squared norm of mu_x"),
                     P("m_y2", Kind::real, 1.0, "squared norm of mu_y"), P("g_min", Kind::real, 0.0, "first coupling"),
                     P("g_max", Kind::real, 2.5, "last coupling"), P("g_count", Kind::integer, 26, "coupling points"),
                     P("theta_count", Kind::integer, 9, "angles in [0, pi]"),
                     P("t_max", Kind::real, 0.0, "search window (0: 10/beta)"), jobs_param(), out_param("CSV")},
                    cmd_phase_diagram});
    cmds.push_back({"sample", "forward, reverse or flow sampling; final states as CSV",
                    join({model_params(), mixture_params(),
                          {P("mode", Kind::text, "reverse", "forward | reverse | flow"),
                           P("score", Kind::text, "population", "population | empirical"),
                           P("noise", Kind::text, "isotropic", "isotropic | mode-shaped"),
                           P("dim", Kind::integer, 8, "dimension d per channel"),
                           P("paths", Kind::integer, 1000, "number of paths"),
                           P("steps", Kind::integer, 800, "Euler steps"), P("horizon", Kind::real, 2.0, "T"),
                           P("n_train", Kind::integer, 16, "training points for the empirical score"), seed_param(),
                           jobs_param(), out_param("CSV")}}),
                    cmd_sample});
    cmds.push_back({"toy-conditional", "conditional generation sweep over (theta, g0, schedule) as CSV",
                    {P("dim", Kind::integer, 32, "dimension d"), P("beta", Kind::real, 1.0, "mean-reversion rate"),
                     P("sigma_w2", Kind::real, 2.0, "noise variance"), P("horizon", Kind::real, 2.0, "T"),
                     P("steps", Kind::integer, 800, "Euler steps"), P("sigma2", Kind::real, 1.0, "data variance"),
                     P("m", Kind::real, 0.3, "per-dimension mean norm"),
                     P("trials", Kind::integer, 2000, "trials per cell"),
                     P("theta_count", Kind::integer, 9, "angles in [0, pi] when thetas is empty"),
                     P("thetas", Kind::real_list, Json::array(), "explicit angles"),
                     P("g0s", Kind::real_list, Json::array({0.2, 0.5, 1.0}), "coupling magnitudes"),
                     P("schedules", Kind::text_list, Json::array({"const", "late", "early"}), "const | late | early"),
                     P("t0", Kind::real, -1.0, "switch time (negative: T/2)"), seed_param(), jobs_param(),
                     out_param("CSV")},
                    cmd_toy});
    cmds.push_back({"clone-speciation", "cloning agreement curves on the two eigenmodes as CSV",
                    {P("dim", Kind::integer, 16, "dimension d"), P("beta", Kind::real, 1.0, "mean-reversion rate"),
                     P("sigma_w2", Kind::real, 2.0, "noise variance"), P("sigma2", Kind::real, 0.1, "data variance"),
                     P("m2", Kind::real, 0.5, "squared mode mean norm"), P("horizon", Kind::real, 3.0, "T"),
                     P("steps", Kind::integer, 800, "Euler steps"),
                     P("scan_times", Kind::real_list, Json(CloneConfig::default_scan_times()), "clone launch times"),
                     P("repeats", Kind::integer, 5, "repeats"), P("batch", Kind::integer, 128, "pairs per repeat"),
                     P("baseline_factor", Kind::integer, 4, "independent pairs per clone pair"),
                     P("phi_star", Kind::real, 0.55, "excess-agreement threshold"),
                     P("conf", Kind::real, 0.95, "Wilson level"),
                     P("g_values", Kind::real_list, Json::array({0.0, 0.5}), "couplings"), seed_param(), jobs_param(),
                     out_param("CSV"), P("summary", Kind::text, "", "JSON path for crossing times and gaps")},
                    cmd_clone});
    cmds.push_back({"stability", "sufficient stability bound and tail-operator scan",
                    join({model_params(), mixture_params(),
                          {P("t_end", Kind::real, 0.0, "scan end (0: 10/beta)"),
                           P("points", Kind::integer, 1024, "scan points"), out_param("JSON")}}),
                    cmd_stability});
    return cmds;
}

int exit_code_of(Errc code) {
    switch (code) {
        case Errc::io_failure: return io_failure;
        case Errc::unstable_at_time: return unstable;
        default: return invalid_config;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const std::vector<Command> cmds = commands();
    CLI::App app{"oudiff: exact-score coupled Ornstein-Uhlenbeck diffusion toolkit", "oudiff"};
    app.require_subcommand(1);

    struct Sub {
        CLI::App* app = nullptr;
        std::map<std::string, std::string> raw;
        std::string config;
        bool dry_run = false;
    };
    std::vector<Sub> subs(cmds.size());
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        Sub& s = subs[i];
        s.app = app.add_subcommand(cmds[i].name, cmds[i].help);
        s.app->add_option("--config", s.config, "JSON config file; flags override its values");
        s.app->add_flag("--dry-run", s.dry_run, "validate and print the resolved config");
        for (const Param& p : cmds[i].params) {
            std::string help = p.help;
            if (!p.def.is_array() || !p.def.empty()) help += " [" + (p.def.is_string() ? p.def.get<std::string>() : p.def.dump()) + "]";
            s.app->add_option(flag_of(p.key), s.raw[p.key], help);
        }
    }

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return ok;
        }
        err << "oudiff: " << e.what() << "\n";
        const auto chosen = app.get_subcommands();
        err << (chosen.empty() ? app.help() : chosen.front()->help());
        return invalid_config;
    }

    for (std::size_t i = 0; i < cmds.size(); ++i) {
        Sub& s = subs[i];
        if (!s.app->parsed()) continue;
        std::map<std::string, std::string> given;
        for (const Param& p : cmds[i].params)
            if (s.app->count(flag_of(p.key)) > 0) given[p.key] = s.raw[p.key];
        Io io{out, err, cmds[i].name, s.dry_run};
        try {
            const Json cfg = resolve(cmds[i], s.config, given);
            return cmds[i].exec(cfg, io);
        } catch (const Exit& e) {
            err << "oudiff: " << e.what() << "\n";
            return e.code;
        } catch (const Error& e) {
            err << "oudiff: " << to_string(e.code()) << ": " << e.what() << "\n";
            return exit_code_of(e.code());
        } catch (const std::exception& e) {
            err << "oudiff: " << e.what() << "\n";
            return internal;
        }
    }
    return invalid_config;
}

}  // namespace oudiff::cli
