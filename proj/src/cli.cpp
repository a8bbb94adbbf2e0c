#include "condwalk/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "condwalk/cdf.hpp"
#include "condwalk/error.hpp"
#include "condwalk/exact.hpp"
#include "condwalk/format.hpp"
#include "condwalk/increments.hpp"
#include "condwalk/kernels.hpp"
#include "condwalk/montecarlo.hpp"
#include "condwalk/verify.hpp"

namespace condwalk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view version() { return "0.1.0"; }

// ---------------------------------------------------------------- lists

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (const auto& s : out)
        if (s.empty()) throw ConfigError("empty entry in list '" + std::string(text) + "'");
    return out;
}

namespace {

double parse_real(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw ConfigError("not a finite number: '" + s + "'");
    return v;
}

long parse_long(const std::string& s) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("not an integer: '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("not an integer: '" + s + "'");
    return v;
}

}  // namespace

std::vector<double> parse_real_list(std::string_view text) {
    const std::string s(text);
    if (std::count(s.begin(), s.end(), ':') == 2 && s.find(',') == std::string::npos) {
        const auto a = s.find(':'), b = s.rfind(':');
        const double lo = parse_real(s.substr(0, a)), hi = parse_real(s.substr(a + 1, b - a - 1));
        const long count = parse_long(s.substr(b + 1));
        if (count < 2 || !(hi > lo)) throw ConfigError("range '" + s + "' needs lo < hi and count >= 2");
        std::vector<double> out(static_cast<std::size_t>(count));
        for (long k = 0; k < count; ++k)
            out[static_cast<std::size_t>(k)] = k == count - 1 ? hi : lo + (hi - lo) * k / (count - 1);
        return out;
    }
    std::vector<double> out;
    for (const auto& tok : split_list(text)) out.push_back(parse_real(tok));
    return out;
}

std::vector<long> parse_int_list(std::string_view text) {
    std::vector<long> out;
    for (const auto& tok : split_list(text)) out.push_back(parse_long(tok));
    return out;
}

// ---------------------------------------------------------------- RunConfig

RunConfig::RunConfig() : u_grid(verify::default_u_grid()) {}

json RunConfig::to_json() const {
    return {{"distribution", distribution},
            {"x_grid", x_grid},
            {"n_grid", n_grid},
            {"u_grid", u_grid},
            {"trials", trials},
            {"seed", seed},
            {"method", method},
            {"remainder", {{"variant", remainder_variant}, {"delta", remainder_delta}}},
            {"format", format},
            {"output", output},
            {"horizon", horizon},
            {"level", level},
            {"max_cells", max_cells}};
}

namespace {

template <class T>
T get_field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::vector<std::string> known = {"distribution", "x_grid", "n_grid", "u_grid", "trials",
                                                   "seed",         "method", "remainder", "format", "output",
                                                   "horizon",      "level",  "max_cells"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown config field '" + key + "'");
    RunConfig c;
    if (j.contains("distribution")) {
        const auto& d = j.at("distribution");
        c.distribution = d.is_string() ? parse_distribution(d.get<std::string>()).literal()
                                       : distribution_from_json(d).literal();
    }
    if (j.contains("x_grid")) {
        c.x_grid.clear();
        for (const auto& tok : j.at("x_grid")) {
            if (tok.is_number()) c.x_grid.push_back(verify::parse_x_point(format_double(tok.get<double>())).token());
            else if (tok.is_string()) c.x_grid.push_back(verify::parse_x_point(tok.get<std::string>()).token());
            else throw ConfigError("x_grid entries must be numbers or strings");
        }
    }
    if (j.contains("n_grid")) c.n_grid = get_field<std::vector<long>>(j, "n_grid");
    if (j.contains("u_grid")) c.u_grid = get_field<std::vector<double>>(j, "u_grid");
    if (j.contains("trials")) c.trials = get_field<std::int64_t>(j, "trials");
    if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed");
    if (j.contains("method")) c.method = get_field<std::string>(j, "method");
    if (j.contains("remainder")) {
        const auto& r = j.at("remainder");
        if (!r.is_object()) throw ConfigError("remainder must be an object");
        for (const auto& [key, value] : r.items())
            if (key != "variant" && key != "delta") throw ConfigError("unknown remainder field '" + key + "'");
        if (r.contains("variant")) c.remainder_variant = get_field<std::string>(r, "variant");
        if (r.contains("delta")) c.remainder_delta = get_field<double>(r, "delta");
    }
    if (j.contains("format")) c.format = get_field<std::string>(j, "format");
    if (j.contains("output")) c.output = get_field<std::string>(j, "output");
    if (j.contains("horizon")) c.horizon = get_field<long>(j, "horizon");
    if (j.contains("level")) c.level = get_field<double>(j, "level");
    if (j.contains("max_cells")) c.max_cells = get_field<std::int64_t>(j, "max_cells");
    c.validate();
    return c;
}

std::string RunConfig::canonical() const { return to_json().dump(); }

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

void RunConfig::validate() const {
    parse_distribution(distribution);
    if (x_grid.empty()) throw ConfigError("x_grid is empty");
    for (const auto& tok : x_grid) verify::parse_x_point(tok);
    if (n_grid.empty()) throw ConfigError("n_grid is empty");
    for (long n : n_grid)
        if (n < 0) throw ConfigError("n_grid entries must be >= 0");
    validate_u_grid(u_grid);
    if (trials < 100) throw ConfigError("trials must be >= 100");
    verify::parse_method(method);
    kernels::RemainderSpec spec{remainder_delta, kernels::parse_remainder_variant(remainder_variant)};
    spec.validate();
    if (format != "text" && format != "csv" && format != "json")
        throw ConfigError("format must be text, csv or json");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    if (max_cells < 1) throw ConfigError("max_cells must be >= 1");
}

// ---------------------------------------------------------------- output

namespace {

std::string fmt10(double v) { return format_double(v, 10); }

json meta_of(const RunConfig& cfg) {
    return {{"tool", "condwalk"}, {"version", version()}, {"config_hash", cfg.hash()}, {"config", cfg.to_json()}};
}

void write_csv_meta(std::ostream& os, const RunConfig& cfg) {
    os << "# condwalk " << version() << '\n';
    os << "# config_hash " << cfg.hash() << '\n';
    os << "# config " << cfg.canonical() << '\n';
}

/// A result table: named columns of preformatted cells, plus numeric copies for JSON.
struct Table {
    std::vector<std::string> columns;
    std::vector<json> rows;  // one object per row

    void add(json row) { rows.push_back(std::move(row)); }
};

std::string cell(const json& v) {
    if (v.is_number_float()) return format_double(v.get<double>());
    if (v.is_null()) return "";
    if (v.is_string()) return csv_escape(v.get<std::string>());
    return v.dump();
}

class Sink {
public:
    Sink(const RunConfig& cfg, std::ostream& out) : out_(&out) {
        if (!cfg.output.empty()) {
            const fs::path p(cfg.output);
            if (p.has_parent_path()) fs::create_directories(p.parent_path());
            file_.open(p, std::ios::binary);
            if (!file_) throw ConfigError("cannot open output file '" + cfg.output + "'");
            out_ = &file_;
        }
    }
    std::ostream& stream() { return *out_; }

private:
    std::ostream* out_;
    std::ofstream file_;
};

/// Scalars print bare in text mode; everything else is CSV or JSON with the config embedded.
void emit(const RunConfig& cfg, const Table& table, std::ostream& out, const json& extra = json::object(),
          std::function<std::string(const json&)> text_scalar = {}) {
    Sink sink(cfg, out);
    auto& os = sink.stream();
    if (cfg.format == "json") {
        json doc = {{"meta", meta_of(cfg)}, {"columns", table.columns}, {"rows", table.rows}};
        for (const auto& [k, v] : extra.items()) doc[k] = v;
        os << doc.dump(2) << '\n';
        return;
    }
    if (cfg.format == "text" && table.rows.size() == 1 && text_scalar) {
        os << text_scalar(table.rows.front()) << '\n';
        return;
    }
    write_csv_meta(os, cfg);
    for (const auto& [k, v] : extra.items()) os << "# " << k << ' ' << v.dump() << '\n';
    for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < table.columns.size(); ++i)
            os << (i ? "," : "") << cell(row.contains(table.columns[i]) ? row.at(table.columns[i]) : json());
        os << '\n';
    }
}

std::function<std::string(const json&)> scalar_of(const std::string& column) {
    return [column](const json& row) { return fmt10(row.at(column).get<double>()); };
}

// ---------------------------------------------------------------- flags

/// Options shared by the run-oriented subcommands. Only options given on the
/// command line override the config file.
struct Flags {
    std::map<std::string, CLI::Option*> opts;
    std::string config, dist, x, n, u, method, variant, format, output;
    double delta = 1.0, level = 0.99;
    std::int64_t trials = 0, max_cells = 0;
    std::uint64_t seed = 0;
    long horizon = 0;
    unsigned workers = 1;
    bool dump_config = false;

    bool given(const std::string& name) const {
        auto it = opts.find(name);
        return it != opts.end() && it->second->count() > 0;
    }
};

void add_flags(CLI::App* app, Flags& f) {
    f.opts["config"] = app->add_option("--config", f.config, "RunConfig JSON file");
    f.opts["dist"] = app->add_option("--dist", f.dist, "rademacher | skew3 | tri | literal | JSON");
    f.opts["x"] = app->add_option("--x", f.x, "start points, e.g. 0,1,t0.5 (t = multiple of sigma sqrt n)");
    f.opts["n"] = app->add_option("--n", f.n, "horizons, e.g. 64,256");
    f.opts["u"] = app->add_option("--u", f.u, "u grid: list or lo:hi:count");
    f.opts["trials"] = app->add_option("--trials", f.trials, "Monte Carlo trials");
    f.opts["seed"] = app->add_option("--seed", f.seed, "random seed");
    f.opts["method"] = app->add_option("--method", f.method, "exact | mc");
    f.opts["variant"] = app->add_option("--variant", f.variant, "remainder shape: general | delta-ge-one");
    f.opts["delta"] = app->add_option("--delta", f.delta, "moment exponent delta");
    f.opts["format"] = app->add_option("--format", f.format, "text | csv | json");
    f.opts["output"] = app->add_option("--output,-o", f.output, "output file (verify: directory)");
    f.opts["horizon"] = app->add_option("--horizon", f.horizon, "Monte Carlo horizon for V estimates");
    f.opts["level"] = app->add_option("--level", f.level, "two-sided confidence level");
    f.opts["max-cells"] = app->add_option("--max-cells", f.max_cells, "cell cap for the exact engine");
    app->add_option("--workers", f.workers, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    app->add_flag("--dump-config", f.dump_config, "print the resolved config and exit");
}

RunConfig resolve(const Flags& f) {
    RunConfig cfg;
    if (f.given("config")) {
        std::ifstream in(f.config);
        if (!in) throw ConfigError("cannot read config file '" + f.config + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("config file '" + f.config + "': " + e.what());
        }
        cfg = RunConfig::from_json(j);
    }
    if (f.given("dist")) cfg.distribution = parse_distribution(f.dist).literal();
    if (f.given("x")) {
        cfg.x_grid.clear();
        for (const auto& tok : split_list(f.x)) cfg.x_grid.push_back(verify::parse_x_point(tok).token());
    }
    if (f.given("n")) cfg.n_grid = parse_int_list(f.n);
    if (f.given("u")) cfg.u_grid = parse_real_list(f.u);
    if (f.given("trials")) cfg.trials = f.trials;
    if (f.given("seed")) cfg.seed = f.seed;
    if (f.given("method")) cfg.method = f.method;
    if (f.given("variant")) cfg.remainder_variant = f.variant;
    if (f.given("delta")) cfg.remainder_delta = f.delta;
    if (f.given("format")) cfg.format = f.format;
    if (f.given("output")) cfg.output = f.output;
    if (f.given("horizon")) cfg.horizon = f.horizon;
    if (f.given("level")) cfg.level = f.level;
    if (f.given("max-cells")) cfg.max_cells = f.max_cells;
    cfg.validate();
    return cfg;
}

std::vector<verify::XPoint> x_points(const RunConfig& cfg) {
    std::vector<verify::XPoint> out;
    for (const auto& tok : cfg.x_grid) out.push_back(verify::parse_x_point(tok));
    return out;
}

exact::ExactOptions exact_options(const RunConfig& cfg) {
    exact::ExactOptions o;
    o.max_cells = static_cast<std::size_t>(cfg.max_cells);
    return o;
}

template <class T>
const T& single(const std::vector<T>& v, const char* what) {
    if (v.size() != 1) throw ConfigError(std::string("this operation takes exactly one ") + what);
    return v.front();
}

// ---------------------------------------------------------------- kernel

struct KernelArgs {
    std::string function, x, y, t, u, format = "text", output;
    CLI::Option *ox = nullptr, *oy = nullptr, *ot = nullptr, *ou = nullptr;
};

int cmd_kernel(const KernelArgs& a, std::ostream& out) {
    RunConfig cfg;
    cfg.format = a.format;
    cfg.output = a.output;
    cfg.validate();
    auto list = [](CLI::Option* opt, const std::string& text, const char* name) {
        if (!opt->count()) throw ConfigError(std::string("kernel: missing --") + name);
        return parse_real_list(text);
    };
    Table table;
    auto one_arg = [&](const char* name, CLI::Option* opt, const std::string& text, double (*f)(double)) {
        table.columns = {name, "value"};
        for (double v : list(opt, text, name)) table.add({{name, v}, {"value", f(v)}});
    };
    auto two_args = [&](const char* n1, CLI::Option* o1, const std::string& t1, const char* n2, CLI::Option* o2,
                        const std::string& t2, double (*f)(double, double)) {
        table.columns = {n1, n2, "value"};
        for (double v1 : list(o1, t1, n1))
            for (double v2 : list(o2, t2, n2)) table.add({{n1, v1}, {n2, v2}, {"value", f(v1, v2)}});
    };
    if (a.function == "H") one_arg("x", a.ox, a.x, kernels::heat_H);
    else if (a.function == "L") one_arg("x", a.ox, a.x, kernels::level_L);
    else if (a.function == "psi") two_args("x", a.ox, a.x, "y", a.oy, a.y, kernels::heat_kernel_psi);
    else if (a.function == "ellH") two_args("x", a.ox, a.x, "y", a.oy, a.y, kernels::ell_H);
    else if (a.function == "ellh") two_args("x", a.ox, a.x, "y", a.oy, a.y, kernels::ell_h);
    else two_args("t", a.ot, a.t, "u", a.ou, a.u, kernels::conditioned_limit_cdf);
    emit(cfg, table, out, {{"function", a.function}}, scalar_of("value"));
    return kPass;
}

// ---------------------------------------------------------------- exact

int cmd_exact(const std::string& op, const RunConfig& cfg, std::ostream& out) {
    const auto dist = parse_distribution(cfg.distribution);
    const auto opts = exact_options(cfg);
    const auto xs = x_points(cfg);
    const double sigma = dist.sigma();
    Table t;
    if (op == "survive" || op == "expect") {
        const bool surv = op == "survive";
        const std::string col = surv ? "survival" : "killed_expectation";
        t.columns = {"x", "n", col};
        for (const auto& p : xs)
            for (long n : cfg.n_grid) {
                const double x = p.resolve(sigma, n);
                t.add({{"x", x}, {"n", n},
                       {col, surv ? exact::exact_survival(dist, x, n, opts) : exact::killed_expectation(dist, x, n, opts)}});
            }
        emit(cfg, t, out, json::object(), scalar_of(col));
    } else if (op == "joint") {
        t.columns = {"x", "n", "u", "joint_cdf"};
        for (const auto& p : xs)
            for (long n : cfg.n_grid) {
                const double x = p.resolve(sigma, n);
                const auto km = exact::evolve_killed(dist, x, n, opts);
                for (double u : cfg.u_grid)
                    t.add({{"x", x}, {"n", n}, {"u", u},
                           {"joint_cdf", km.mass_at_or_below(u * sigma * std::sqrt(static_cast<double>(n)))}});
            }
        emit(cfg, t, out, json::object(), scalar_of("joint_cdf"));
    } else if (op == "harmonic" || op == "renewal") {
        t.columns = op == "harmonic" ? std::vector<std::string>{"x", "V", "lower", "upper", "gap", "n_used", "converged"}
                                     : std::vector<std::string>{"x", "U", "converged"};
        for (const auto& p : xs) {
            if (p.scaled) throw ConfigError(op + ": scaled start points need a horizon");
            if (op == "harmonic") {
                const auto v = exact::harmonic_V(dist, p.value, 1e-10, 1L << 14, opts);
                t.add({{"x", p.value}, {"V", v.value}, {"lower", v.lower}, {"upper", v.upper}, {"gap", v.gap()},
                       {"n_used", v.n_used}, {"converged", v.converged}});
            } else {
                const auto u = exact::renewal_U(dist, p.value, 1e-10, 1L << 14, opts);
                t.add({{"x", p.value}, {"U", u.value}, {"converged", u.converged}});
            }
        }
        emit(cfg, t, out, json::object(), scalar_of(op == "harmonic" ? "V" : "U"));
    } else if (op == "curve") {
        const long n = single(cfg.n_grid, "--n");
        const double x = single(xs, "--x").resolve(sigma, n);
        t.columns = {"n", "survival"};
        const auto curve = exact::survival_curve(dist, x, n, opts);
        for (std::size_t k = 0; k < curve.size(); ++k) t.add({{"n", static_cast<long>(k + 1)}, {"survival", curve[k]}});
        emit(cfg, t, out, {{"x", x}});
    } else if (op == "mass") {
        const long n = single(cfg.n_grid, "--n");
        const double x = single(xs, "--x").resolve(sigma, n);
        const auto km = exact::evolve_killed(dist, x, n, opts);
        t.columns = {"position", "mass"};
        for (std::size_t i = 0; i < km.masses.size(); ++i) t.add({{"position", km.position(i)}, {"mass", km.masses[i]}});
        emit(cfg, t, out, {{"x", x}, {"n", n}, {"survival", km.total()}});
    } else if (op == "cdf") {
        const long n = single(cfg.n_grid, "--n");
        const double x = single(xs, "--x").resolve(sigma, n);
        const auto cdf = exact::exact_conditioned_cdf(dist, x, n, cfg.u_grid, opts);
        t.columns = {"u", "value"};
        for (std::size_t k = 0; k < cdf.u.size(); ++k) t.add({{"u", cdf.u[k]}, {"value", cdf.value[k]}});
        emit(cfg, t, out, {{"x", x}, {"n", n}, {"t", cdf.t}});
    } else if (op == "enumerate") {
        const long n = single(cfg.n_grid, "--n");
        const double x = single(xs, "--x").resolve(sigma, n);
        const auto en = exact::enumerate_paths_oracle(dist, x, n);
        t.columns = {"position", "mass"};
        for (const auto& [j, p] : en.histogram)
            t.add({{"position", x + static_cast<double>(j) * dist.span()}, {"mass", p}});
        emit(cfg, t, out, {{"x", x}, {"n", n}, {"survival", en.survival}});
    }
    return kPass;
}

// ---------------------------------------------------------------- mc

int cmd_mc(const std::string& op, const RunConfig& cfg, unsigned workers, std::ostream& out) {
    const auto dist = parse_distribution(cfg.distribution);
    const auto xs = x_points(cfg);
    const double sigma = dist.sigma();
    mc::McOptions mo;
    mo.workers = workers;
    mo.level = cfg.level;
    Table t;
    auto with_ci = [](json row, const mc::EstimateWithCI& e) {
        const json ci = e.to_json();
        for (const auto& [k, v] : ci.items()) row[k] = v;
        return row;
    };
    const std::vector<std::string> ci_cols = {"point", "half_width", "lower", "upper", "trials", "effective_trials", "seed"};
    auto text_ci = [](const json& row) {
        return fmt10(row.at("point").get<double>()) + " +- " + fmt10(row.at("half_width").get<double>());
    };
    if (op == "survive") {
        t.columns = {"x", "n"};
        t.columns.insert(t.columns.end(), ci_cols.begin(), ci_cols.end());
        for (const auto& p : xs)
            for (long n : cfg.n_grid) {
                const double x = p.resolve(sigma, n);
                t.add(with_ci({{"x", x}, {"n", n}}, mc::estimate_survival(dist, x, n, cfg.trials, cfg.seed, mo)));
            }
        emit(cfg, t, out, json::object(), text_ci);
    } else if (op == "cdf") {
        const long n = single(cfg.n_grid, "--n");
        const double x = single(xs, "--x").resolve(sigma, n);
        const auto est = mc::estimate_conditioned_cdf(dist, x, n, cfg.u_grid, cfg.trials, cfg.seed, mo);
        t.columns = {"u", "value"};
        for (std::size_t k = 0; k < est.cdf.u.size(); ++k) t.add({{"u", est.cdf.u[k]}, {"value", est.cdf.value[k]}});
        emit(cfg, t, out, {{"x", x}, {"n", n}, {"t", est.cdf.t}, {"survival", est.survival.to_json()}});
    } else if (op == "harmonic") {
        t.columns = {"x"};
        t.columns.insert(t.columns.end(), ci_cols.begin(), ci_cols.end());
        t.columns.push_back("unfinished_fraction");
        for (const auto& p : xs) {
            if (p.scaled) throw ConfigError("mc harmonic: scaled start points are not supported");
            const auto est = mc::estimate_V_mc(dist, p.value, cfg.horizon, cfg.trials, cfg.seed, mo);
            json row = with_ci({{"x", p.value}}, est.estimate);
            row["unfinished_fraction"] = est.unfinished_fraction;
            t.add(row);
        }
        emit(cfg, t, out, {{"horizon", cfg.horizon}}, text_ci);
    }
    return kPass;
}

// ---------------------------------------------------------------- verify

fs::path output_dir(const RunConfig& cfg) {
    if (!cfg.output.empty()) return cfg.output;
    if (const char* env = std::getenv("CONDWALK_OUTPUT_DIR"); env && *env) return env;
    return ".";
}

void write_file(const fs::path& path, const RunConfig& cfg, const std::function<void(std::ostream&)>& body,
                bool csv) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + path.string() + "'");
    if (csv) write_csv_meta(os, cfg);
    body(os);
}

bool report_suite(const verify::SuiteReport& rep, const RunConfig& cfg, const fs::path& dir, std::ostream& out,
                  std::ostream& err) {
    write_file(dir / (rep.suite + "_checks.csv"), cfg, [&](std::ostream& os) { verify::write_checks_csv(os, rep.checks); },
               true);
    json doc = rep.to_json();
    doc["meta"] = meta_of(cfg);
    write_file(dir / (rep.suite + ".json"), cfg, [&](std::ostream& os) { os << doc.dump(2) << '\n'; }, false);

    out << rep.suite << ": " << (rep.pass() ? "PASS" : "FAIL") << " (" << rep.checks.size()
        << " checks, max violation " << format_double(rep.max_violation(), 6) << ")\n";
    for (const auto& c : rep.checks)
        out << "  " << (c.pass ? "ok  " : "FAIL") << (c.asserted ? "  " : " (report) ") << c.name
            << "  value=" << format_double(c.value, 8) << " bound=" << format_double(c.bound, 8) << '\n';
    if (const auto* v = rep.first_violation())
        err << rep.suite << ": first violation: " << v->name << ": " << v->detail << '\n';
    return rep.pass();
}

int cmd_verify(const std::string& suite, const RunConfig& cfg, unsigned workers, std::ostream& out, std::ostream& err) {
    const auto dist = parse_distribution(cfg.distribution);
    verify::AuditOptions ao;
    ao.method = verify::parse_method(cfg.method);
    ao.trials = cfg.trials;
    ao.seed = cfg.seed;
    ao.workers = workers;
    ao.level = cfg.level;
    ao.exact = exact_options(cfg);
    const kernels::RemainderSpec spec{cfg.remainder_delta, kernels::parse_remainder_variant(cfg.remainder_variant)};
    const fs::path dir = output_dir(cfg);
    fs::create_directories(dir);

    bool pass = true;
    const bool all = suite == "all";
    if (all || suite == "persistence") {
        const auto a = verify::audit_persistence(dist, x_points(cfg), cfg.n_grid, spec, ao);
        write_file(dir / "persistence.csv", cfg, [&](std::ostream& os) { verify::write_verification_csv(os, a.rows); }, true);
        pass = report_suite(a.report, cfg, dir, out, err) && pass;
        if (!a.uniform_stat.empty())
            out << "  max |ratio-1| at n=" << a.uniform_stat.back().first << ": "
                << format_double(a.uniform_stat.back().second, 6) << '\n';
    }
    if (all || suite == "clt") {
        const auto a = verify::audit_conditioned_clt(dist, x_points(cfg), cfg.n_grid, cfg.u_grid, ao);
        write_file(dir / "clt.csv", cfg, [&](std::ostream& os) { verify::write_cdf_audit_csv(os, a.rows); }, true);
        write_file(dir / "clt_summary.csv", cfg, [&](std::ostream& os) { verify::write_cdf_summary_csv(os, a.summaries); },
                   true);
        pass = report_suite(a.report, cfg, dir, out, err) && pass;
    }
    if (all || suite == "regimes") {
        const auto a = verify::audit_regimes(dist, cfg.n_grid, ao);
        write_file(dir / "regimes.csv", cfg, [&](std::ostream& os) { verify::write_regime_csv(os, a.rows); }, true);
        pass = report_suite(a.report, cfg, dir, out, err) && pass;
    }
    if (all || suite == "nagaev") {
        // the Nagaev audit has its own default grids
        const RunConfig defaults;
        const auto xs = cfg.x_grid == defaults.x_grid ? verify::default_nagaev_x_grid() : x_points(cfg);
        const auto ns = cfg.n_grid == defaults.n_grid ? verify::default_nagaev_n_grid() : cfg.n_grid;
        const auto a = verify::audit_nagaev(dist, xs, ns, ao);
        write_file(dir / "nagaev.csv", cfg, [&](std::ostream& os) { verify::write_nagaev_csv(os, a.rows); }, true);
        pass = report_suite(a.report, cfg, dir, out, err) && pass;
    }
    if (all || suite == "lemmas") {
        const auto rep = verify::audit_kernel_and_lemma_suite(ao);
        pass = report_suite(rep, cfg, dir, out, err) && pass;
    }
    return pass ? kPass : kAssertionFailed;
}

}  // namespace

// ---------------------------------------------------------------- entry point

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Killed random walks: exact and Monte Carlo persistence, Brownian limit kernels, audits", "condwalk"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    KernelArgs ka;
    auto* kernel = app.add_subcommand("kernel", "evaluate a limit kernel on grids");
    kernel->add_option("function", ka.function, "H | L | psi | ellH | ellh | limitCdf")
        ->required()
        ->check(CLI::IsMember({"H", "L", "psi", "ellH", "ellh", "limitCdf"}));
    ka.ox = kernel->add_option("--x", ka.x, "x values (list or lo:hi:count)");
    ka.oy = kernel->add_option("--y", ka.y, "y values");
    ka.ot = kernel->add_option("--t", ka.t, "scaled start t >= 0");
    ka.ou = kernel->add_option("--u", ka.u, "u values");
    kernel->add_option("--format", ka.format, "text | csv | json");
    kernel->add_option("--output,-o", ka.output, "output file");

    std::string exact_op, mc_op, suite;
    Flags exact_flags, mc_flags, verify_flags;
    auto* exact_cmd = app.add_subcommand("exact", "exact killed-walk engine");
    exact_cmd->add_option("operation", exact_op, "survive | joint | expect | harmonic | renewal | curve | mass | cdf | enumerate")
        ->required()
        ->check(CLI::IsMember({"survive", "joint", "expect", "harmonic", "renewal", "curve", "mass", "cdf", "enumerate"}));
    add_flags(exact_cmd, exact_flags);
    auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo estimates");
    mc_cmd->add_option("operation", mc_op, "survive | cdf | harmonic")
        ->required()
        ->check(CLI::IsMember({"survive", "cdf", "harmonic"}));
    add_flags(mc_cmd, mc_flags);
    auto* verify_cmd = app.add_subcommand("verify", "run an audit suite; exit 1 if an asserted check fails");
    verify_cmd->add_option("suite", suite, "persistence | clt | regimes | nagaev | lemmas | all")
        ->required()
        ->check(CLI::IsMember({"persistence", "clt", "regimes", "nagaev", "lemmas", "all"}));
    add_flags(verify_cmd, verify_flags);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kPass : kUsage;
    }

    try {
        if (kernel->parsed()) return cmd_kernel(ka, out);
        auto dispatch = [&](const Flags& f, auto&& run) {
            const RunConfig cfg = resolve(f);
            if (f.dump_config) {
                out << cfg.to_json().dump(2) << '\n';
                return static_cast<int>(kPass);
            }
            return run(cfg, f.workers);
        };
        if (exact_cmd->parsed())
            return dispatch(exact_flags, [&](const RunConfig& c, unsigned) { return cmd_exact(exact_op, c, out); });
        if (mc_cmd->parsed())
            return dispatch(mc_flags, [&](const RunConfig& c, unsigned w) { return cmd_mc(mc_op, c, w, out); });
        return dispatch(verify_flags,
                        [&](const RunConfig& c, unsigned w) { return cmd_verify(suite, c, w, out, err); });
    } catch (const ResourceError& e) {
        err << "condwalk: resource limit: " << e.what() << '\n';
        return kResource;
    } catch (const Error& e) {
        err << "condwalk: " << e.what() << '\n';
        return kUsage;
    } catch (const fs::filesystem_error& e) {
        err << "condwalk: " << e.what() << '\n';
        return kUsage;
    } catch (const std::bad_alloc&) {
        err << "condwalk: out of memory\n";
        return kResource;
    }
}

}  // namespace condwalk::cli
