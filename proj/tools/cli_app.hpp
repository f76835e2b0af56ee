#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "diffstop/diffstop.hpp"

namespace diffstop::cli {

/// Thrown for flag combinations CLI11 cannot express; mapped to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FamilyOptions {
    std::string family = "sticky_bm";
    double mu = 0.0;
    double c = 1.0;
    std::string config;

    DiffusionSpec spec() const {
        if (!config.empty()) {
            std::ifstream in(config);
            if (!in) throw UsageError("cannot read config file '" + config + "'");
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw UsageError("config file '" + config + "' is not valid JSON: " + e.what());
            }
            return spec_from_json(j);
        }
        return make_spec({family, mu, c});
    }
};

struct RangeOptions {
    double from = -3.0;
    double to = 3.0;
    int points = 61;

    std::vector<double> grid() const {
        if (points < 1) throw UsageError("--points must be positive");
        if (points == 1) return {from};
        if (!(from < to)) throw UsageError("--from must be smaller than --to");
        std::vector<double> xs(static_cast<std::size_t>(points));
        for (int i = 0; i < points; ++i) xs[i] = from + (to - from) * i / (points - 1);
        xs.back() = to;
        return xs;
    }
};

namespace detail {

inline std::string format_number(double v) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::setprecision(17) << v;
    return s.str();
}

/// CSV with a header row and 17 significant digits.
inline std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
    std::ostringstream s;
    for (std::size_t i = 0; i < header.size(); ++i) s << (i ? "," : "") << header[i];
    s << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) s << (i ? "," : "") << format_number(row[i]);
        s << "\n";
    }
    return s.str();
}

inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + path + "'");
    f << text;
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// Sweep grid alpha_k = from + k step, rounded to 12 decimals so 0.45 + 0.05 lands on 0.5.
inline std::vector<double> sweep_grid(double from, double to, double step) {
    if (!(step > 0.0)) throw UsageError("--step must be positive");
    if (from > to) throw UsageError("--alpha-from must not exceed --alpha-to");
    std::vector<double> out;
    for (long k = 0;; ++k) {
        const double a = std::round((from + k * step) * 1e12) / 1e12;
        if (a > to + 1e-12) break;
        out.push_back(a);
    }
    return out;
}

inline std::string alpha_label(double a) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::setprecision(12) << a;
    return s.str();
}

}  // namespace detail

/**
 * Entry point shared by the executable and the tests. Returns the process
 * exit code: 0 on success, 2 on flag errors, 1 on numeric failures (with a
 * JSON error document on `err`).
 */
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Excessive functions, representing measures and smooth fit for one-dimensional diffusions",
                 "diffstop"};
    app.require_subcommand(1, 1);

    FamilyOptions fam;
    auto add_family = [&fam](CLI::App* sub) {
        sub->add_option("--family", fam.family, "sticky_bm | reflected_killed_bm | drift_bm")->capture_default_str();
        sub->add_option("--mu", fam.mu, "drift (<= 0)")->capture_default_str();
        sub->add_option("--c", fam.c, "stickiness at 0 (> 0)")->capture_default_str();
        sub->add_option("--config", fam.config, "JSON file with family, mu and c")->check(CLI::ExistingFile);
    };
    auto add_range = [](CLI::App* sub, RangeOptions& range) {
        sub->add_option("--from", range.from, "left end of the x grid")->capture_default_str();
        sub->add_option("--to", range.to, "right end of the x grid")->capture_default_str();
        sub->add_option("--points", range.points, "number of grid points")->capture_default_str();
    };
    double alpha = 0.5;
    std::string format = "json";
    std::string out_path;
    auto add_output = [&](CLI::App* sub) {
        sub->add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
        sub->add_option("--out", out_path, "output file (stdout when omitted)");
    };

    auto* fundamental_cmd = app.add_subcommand("fundamental", "tabulate psi, phi and a row of the Green kernel");
    double y0 = 0.0;
    add_family(fundamental_cmd);
    fundamental_cmd->add_option("--alpha", alpha, "discount rate (> 0)")->check(CLI::PositiveNumber)->capture_default_str();
    fundamental_cmd->add_option("--y0", y0, "second argument of G(x, y0)")->capture_default_str();
    add_output(fundamental_cmd);

    auto* solve_cmd = app.add_subcommand("solve", "threshold, value samples and smooth-fit report");
    add_family(solve_cmd);
    solve_cmd->add_option("--alpha", alpha, "discount rate (>= 0; 0 requires --mu < 0)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    add_output(solve_cmd);

    auto* measure_cmd = app.add_subcommand("measure", "Martin or Riesz measure of a named candidate");
    std::string candidate = "value";
    std::string kind = "martin";
    std::optional<double> x0;
    add_family(measure_cmd);
    measure_cmd->add_option("--alpha", alpha, "discount rate (> 0)")->check(CLI::PositiveNumber)->capture_default_str();
    measure_cmd->add_option("--candidate", candidate, "value | green | psi | phi")
        ->check(CLI::IsMember({"value", "green", "psi", "phi"}))
        ->capture_default_str();
    measure_cmd->add_option("--kind", kind, "martin | riesz")->check(CLI::IsMember({"martin", "riesz"}))->capture_default_str();
    measure_cmd->add_option("--x0", x0, "normalization point");
    measure_cmd->add_option("--y0", y0, "pole of the green candidate")->capture_default_str();
    measure_cmd->add_option("--out", out_path, "output file (stdout when omitted)");

    auto* verify_cmd = app.add_subcommand("verify", "birth-death chain oracle against the analytic value");
    std::vector<double> window;
    std::size_t n = 4001;
    std::string left_boundary = "transparent";
    std::string right_boundary = "clamp";
    std::optional<double> jump_at;
    add_family(verify_cmd);
    verify_cmd->add_option("--alpha", alpha, "discount rate (> 0)")->check(CLI::PositiveNumber)->capture_default_str();
    verify_cmd->add_option("--window", window, "truncation window: lower upper (default -6, x*+6)")->expected(2);
    verify_cmd->add_option("--n", n, "number of chain nodes (>= 50)")->capture_default_str();
    verify_cmd->add_option("--left-boundary", left_boundary, "transparent | clamp")
        ->check(CLI::IsMember({"transparent", "clamp"}))
        ->capture_default_str();
    verify_cmd->add_option("--right-boundary", right_boundary, "transparent | clamp")
        ->check(CLI::IsMember({"transparent", "clamp"}))
        ->capture_default_str();
    verify_cmd->add_option("--jump-at", jump_at, "node for the jump estimate (default: the sticky point 0)");
    verify_cmd->add_option("--out", out_path, "output file (stdout when omitted)");

    auto* plot_cmd = app.add_subcommand("plot-data", "CSV of x, t(x), s(x), V(x), g(x); one file per alpha");
    std::vector<double> alphas;
    add_family(plot_cmd);
    plot_cmd->add_option("--alpha", alphas, "discount rate(s) (> 0)")->check(CLI::PositiveNumber)->required();
    plot_cmd->add_option("--out", out_path, "output directory (stdout for a single alpha when omitted)");

    auto* sweep_cmd = app.add_subcommand("sweep", "x*, jump, atom and verdict over an alpha grid");
    double alpha_from = 0.05;
    double alpha_to = 0.7;
    double step = 0.05;
    add_family(sweep_cmd);
    sweep_cmd->add_option("--alpha-from", alpha_from, "first alpha (> 0)")->check(CLI::PositiveNumber)->capture_default_str();
    sweep_cmd->add_option("--alpha-to", alpha_to, "last alpha")->capture_default_str();
    sweep_cmd->add_option("--step", step, "grid step (> 0)")->capture_default_str();
    add_output(sweep_cmd);

    RangeOptions fundamental_range{-3.0, 3.0, 61};
    RangeOptions solve_range{-3.0, 3.0, 0};
    RangeOptions plot_range{-0.99, 2.0, 500};
    add_range(fundamental_cmd, fundamental_range);
    add_range(solve_cmd, solve_range);
    add_range(plot_cmd, plot_range);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fundamental_cmd->parsed()) {
            const auto spec = fam.spec();
            const auto fs = fundamental(spec, alpha);
            const auto& I = spec.interval();
            std::vector<std::vector<double>> rows;
            nlohmann::json table = nlohmann::json::array();
            for (double x : fundamental_range.grid()) {
                if (!I.in_closure(x)) continue;
                const double g = I.contains(x) && I.contains(y0) ? fs.green(x, y0) : NAN;
                rows.push_back({x, fs.psi(x), fs.phi(x), g});
                nlohmann::json row{{"x", x}, {"psi", fs.psi(x)}, {"phi", fs.phi(x)}};
                row["green"] = std::isfinite(g) ? nlohmann::json(g) : nlohmann::json(nullptr);
                table.push_back(row);
            }
            if (format == "csv") {
                detail::emit(detail::to_csv({"x", "psi", "phi", "green"}, rows), out_path, out);
            } else {
                nlohmann::json j{{"diffusion", spec_to_json(spec)},
                                 {"alpha", alpha},
                                 {"wronskian", fs.wronskian()},
                                 {"y0", y0},
                                 {"table", table}};
                detail::emit(detail::dump(j), out_path, out);
            }
        } else if (solve_cmd->parsed()) {
            const auto spec = fam.spec();
            if (alpha == 0.0) {
                const auto sol = solve_alpha_zero(spec.drift(), spec.stickiness() > 0 ? spec.stickiness() : 1.0);
                std::vector<std::vector<double>> rows;
                nlohmann::json samples = nlohmann::json::array();
                if (solve_range.points > 0)
                    for (double x : solve_range.grid()) {
                        rows.push_back({x, sol.value(x), reward(x)});
                        samples.push_back({{"x", x}, {"value", sol.value(x)}, {"reward", reward(x)}});
                    }
                if (format == "csv") {
                    detail::emit(detail::to_csv({"x", "value", "reward"}, rows), out_path, out);
                } else {
                    nlohmann::json j{{"alpha", 0.0}, {"mu", sol.mu}, {"c", sol.c}, {"threshold", sol.threshold}};
                    if (solve_range.points > 0) j["samples"] = samples;
                    detail::emit(detail::dump(j), out_path, out);
                }
            } else {
                if (spec.family_name() != "sticky_bm" || spec.drift() != 0.0)
                    throw std::invalid_argument("solve: alpha > 0 is solved for driftless sticky_bm only");
                const double c = spec.stickiness();
                const auto report = smooth_fit_report(alpha, c);
                std::vector<std::vector<double>> rows;
                nlohmann::json samples = nlohmann::json::array();
                if (solve_range.points > 0)
                    for (double x : solve_range.grid()) {
                        const double v = value_function(alpha, c, x);
                        rows.push_back({x, v, reward(x)});
                        samples.push_back({{"x", x}, {"value", v}, {"reward", reward(x)}});
                    }
                if (format == "csv") {
                    detail::emit(detail::to_csv({"x", "value", "reward"}, rows), out_path, out);
                } else {
                    nlohmann::json j = to_json(report);
                    if (solve_range.points > 0) j["samples"] = samples;
                    detail::emit(detail::dump(j), out_path, out);
                }
            }
        } else if (measure_cmd->parsed()) {
            const auto spec = fam.spec();
            const auto fs = fundamental(spec, alpha);
            ExcessiveCandidate cand;
            if (candidate == "value") {
                if (spec.family_name() != "sticky_bm" || spec.drift() != 0.0)
                    throw std::invalid_argument("measure: the value candidate needs driftless sticky_bm");
                cand = value_candidate(alpha, spec.stickiness(), x0);
            } else {
                const auto& I = spec.interval();
                double xn = x0.value_or(0.0);
                if (!x0 && !I.interior(xn)) {
                    const double lo = I.left().position.to_double();
                    const double hi = I.right().position.to_double();
                    xn = 0.5 * (lo + hi);
                }
                if (candidate == "green") cand = green_candidate(fs, y0, xn);
                else if (candidate == "psi") cand = psi_candidate(fs, xn);
                else cand = phi_candidate(fs, xn);
            }
            auto m = martin_measure(fs, cand);
            if (kind == "riesz") m = riesz_from_martin(m);
            nlohmann::json j = measure_to_json(m);
            j["candidate"] = candidate;
            detail::emit(detail::dump(j), out_path, out);
        } else if (verify_cmd->parsed()) {
            const auto spec = fam.spec();
            if (spec.family_name() != "sticky_bm" || spec.drift() != 0.0)
                throw std::invalid_argument("verify: the analytic value is available for driftless sticky_bm only");
            const double c = spec.stickiness();
            if (window.empty()) window = {-6.0, solve_threshold(alpha, c) + 6.0};
            if (!(window[0] < window[1])) throw UsageError("--window needs lower < upper");
            DiscretizeOptions opts;
            opts.left = boundary_policy_from_string(left_boundary);
            opts.right = boundary_policy_from_string(right_boundary);
            const auto chain = discretize(spec, window[0], window[1], n, opts);
            const auto g = tabulate(chain, reward);
            const auto sol = solve_chain_stopping(chain, alpha, g);
            CompareOptions co;
            co.jump_point = jump_at.value_or(0.0);
            const auto cmp = compare(chain, sol.value, [alpha, c](double x) { return value_function(alpha, c, x); }, co);
            OracleReport r{window[0], window[1], n, alpha, c, cmp.sup_error, cmp.jump_estimate.value_or(NAN),
                           sol.iterations, sol.residual};
            detail::emit(detail::dump(to_json(r)), out_path, out);
        } else if (plot_cmd->parsed()) {
            const auto spec = fam.spec();
            if (spec.family_name() != "sticky_bm" || spec.drift() != 0.0)
                throw std::invalid_argument("plot-data: s and t are available for driftless sticky_bm only");
            const double c = spec.stickiness();
            if (out_path.empty() && alphas.size() != 1)
                throw UsageError("plot-data: several --alpha values need --out <directory>");
            const auto xs = plot_range.grid();
            for (double a : alphas) {
                std::vector<std::vector<double>> rows;
                for (double x : xs) {
                    if (x == -1.0) continue;
                    const auto st = st_functions(a, c, x, x == 0.0 ? std::optional<Side>(Side::Right) : std::nullopt);
                    rows.push_back({x, st.t, st.s, value_function(a, c, x), reward(x)});
                }
                const auto csv = detail::to_csv({"x", "t", "s", "value", "reward"}, rows);
                if (out_path.empty()) {
                    out << csv;
                } else {
                    std::filesystem::create_directories(out_path);
                    const auto file = std::filesystem::path(out_path) / ("st_alpha_" + detail::alpha_label(a) + ".csv");
                    detail::emit(csv, file.string(), out);
                }
            }
        } else if (sweep_cmd->parsed()) {
            const auto spec = fam.spec();
            if (spec.family_name() != "sticky_bm" || spec.drift() != 0.0)
                throw std::invalid_argument("sweep: the regime table is for driftless sticky_bm only");
            const double c = spec.stickiness();
            std::vector<std::vector<double>> rows;
            std::vector<std::string> verdicts;
            nlohmann::json arr = nlohmann::json::array();
            for (double a : detail::sweep_grid(alpha_from, alpha_to, step)) {
                const auto r = smooth_fit_report(a, c);
                rows.push_back({a, r.z, r.jump, r.sigma_atom});
                verdicts.push_back(to_string(r.verdict));
                arr.push_back({{"alpha", a},
                               {"x_star", r.z},
                               {"jump", r.jump},
                               {"sigma_atom", r.sigma_atom},
                               {"verdict", to_string(r.verdict)}});
            }
            if (format == "csv") {
                std::string csv = detail::to_csv({"alpha", "x_star", "jump", "sigma_atom"}, rows);
                // Append the verdict column to each data row.
                std::istringstream lines(csv);
                std::ostringstream joined;
                std::string line;
                std::size_t k = 0;
                bool header = true;
                while (std::getline(lines, line)) {
                    joined << line << "," << (header ? std::string("verdict") : verdicts[k++]) << "\n";
                    header = false;
                }
                detail::emit(joined.str(), out_path, out);
            } else {
                nlohmann::json j{{"c", c}, {"alpha1", alpha1(c)}, {"alpha2", alpha2()}, {"rows", arr}};
                detail::emit(detail::dump(j), out_path, out);
            }
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        nlohmann::json j{{"error", e.what()}};
        if (dynamic_cast<const NotExcessive*>(&e)) j["type"] = "not_excessive";
        else if (dynamic_cast<const NonRegularDiffusion*>(&e)) j["type"] = "non_regular_diffusion";
        else if (auto* q = dynamic_cast<const QuadratureError*>(&e)) {
            j["type"] = "quadrature";
            j["achieved_error"] = q->achieved_error();
        } else if (auto* d = dynamic_cast<const DerivativeNotConverged*>(&e)) {
            j["type"] = "derivative_not_converged";
            j["last_estimate"] = d->last_estimate();
        } else if (auto* nc = dynamic_cast<const NotConverged*>(&e)) {
            j["type"] = "not_converged";
            j["residual"] = nc->residual();
        } else if (dynamic_cast<const std::invalid_argument*>(&e)) j["type"] = "invalid_argument";
        else j["type"] = "numeric_failure";
        err << j.dump() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace diffstop::cli
