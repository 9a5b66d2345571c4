// Command-line front end: wires JSON configs to the library operations and
// emits machine-readable results. Exit codes: 0 success, 1 domain/assumption
// failure, 2 usage or parse failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gsprt/gsprt.hpp"

namespace {

using gsprt::json;

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    std::string csv_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> trials;
    std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_mc_flags) {
    cmd->add_option("--config", args.config_path, "JSON config file")->required();
    cmd->add_option("--out", args.out_path, "write the JSON result here instead of stdout");
    if (with_mc_flags) {
        cmd->add_option("--seed", args.seed, "override the config seed");
        cmd->add_option("--trials", args.trials, "override the trial count");
        cmd->add_option("--workers", args.workers, "override the worker count");
        cmd->add_option("--csv", args.csv_path, "write per-trial CSV rows here");
    }
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw gsprt::ConfigError("cannot open config file: " + path);
    json j;
    in >> j;
    return j;
}

void emit(const json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(1) << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot open output file: " + out_path);
        out << j.dump(1) << "\n";
    }
}

void apply_overrides(gsprt::RunConfig& cfg, const CommonArgs& args) {
    if (args.seed) cfg.mc.seed = *args.seed;
    if (args.trials) cfg.mc.trials = *args.trials;
    if (args.workers) cfg.mc.workers = *args.workers;
}

gsprt::ThresholdPair resolve_thresholds(const gsprt::RunConfig& cfg) {
    if (!cfg.threshold) throw std::invalid_argument("config has no threshold section");
    if (!cfg.p0 || !cfg.family)
        throw std::invalid_argument("thresholds need the finite model (p0, gamma)");
    const auto& t = *cfg.threshold;
    switch (t.mode) {
        case gsprt::ThresholdSpec::Mode::first_order:
            return gsprt::first_order_thresholds(*cfg.p0, *cfg.family, cfg.n, t.eps0, t.eps1);
        case gsprt::ThresholdSpec::Mode::second_order:
            return gsprt::second_order_thresholds(*cfg.p0, *cfg.family, cfg.n, t.eps, t.eta0,
                                                  t.eta1);
        default: {
            if (!(t.A > 0.0 && t.B > 0.0))
                throw std::domain_error("manual thresholds must be positive");
            gsprt::ThresholdPair out;
            out.A = t.A;
            out.B = t.B;
            return out;
        }
    }
}

// gamma' and gamma*, deduplicated, plus any user additions: the worst-case
// panel the maximal type-II estimate is taken over.
std::vector<gsprt::Distribution> build_panel(const gsprt::RunConfig& cfg) {
    std::vector<gsprt::Distribution> panel;
    auto add = [&](const std::vector<double>& g) {
        for (const auto& have : panel) {
            double dist = 0.0;
            for (int i = 0; i < have.d(); ++i)
                dist = std::max(dist, std::abs(have[i] - g[static_cast<size_t>(i)]));
            if (dist < 1e-10) return;
        }
        panel.emplace_back(g);
    };
    auto fwd = gsprt::project(*cfg.p0, *cfg.p0, *cfg.family);
    auto rev = gsprt::project_reverse(*cfg.p0, *cfg.family);
    if (!fwd.converged || !rev.converged)
        throw std::runtime_error("panel construction: projection did not converge");
    add(fwd.gamma);
    add(rev.gamma);
    for (const auto& g : cfg.extra_panel) {
        if (!cfg.family->contains(g))
            throw std::domain_error("panel member lies outside the family");
        add(g.probs());
    }
    return panel;
}

int cmd_validate(const CommonArgs& args) {
    const gsprt::RunConfig cfg = gsprt::parse_config(load_json(args.config_path));
    json out;
    bool ok = false;
    if (cfg.model == "finite") {
        const auto rep = gsprt::validate(*cfg.family, *cfg.p0);
        out = gsprt::to_json(rep);
        ok = rep.ok();
    } else {
        const auto rep = gsprt::check_conditions(cfg.gaussian->gamma0, cfg.gaussian->box());
        out = gsprt::to_json(rep);
        ok = rep.ok();
    }
    emit(out, args.out_path);
    return ok ? 0 : 1;
}

int cmd_project(const CommonArgs& args) {
    const gsprt::RunConfig cfg = gsprt::parse_config(load_json(args.config_path));
    if (cfg.model != "finite") throw std::invalid_argument("project: finite model only");
    gsprt::Distribution q = cfg.q ? gsprt::Distribution(*cfg.q) : *cfg.p0;
    const auto res = gsprt::project(q, *cfg.p0, *cfg.family);
    emit(gsprt::to_json(res), args.out_path);
    return res.converged ? 0 : 1;
}

int cmd_thresholds(const CommonArgs& args) {
    const gsprt::RunConfig cfg = gsprt::parse_config(load_json(args.config_path));
    const auto thr = resolve_thresholds(cfg);
    json out{{"A", thr.A}, {"B", thr.B}, {"n", cfg.n}};
    if (!thr.gamma_A.empty()) out["gamma_A"] = thr.gamma_A;
    if (!thr.gamma_B.empty()) out["gamma_B"] = thr.gamma_B;
    emit(out, args.out_path);
    return 0;
}

int cmd_run(const CommonArgs& args) {
    gsprt::RunConfig cfg = gsprt::parse_config(load_json(args.config_path));
    apply_overrides(cfg, args);
    const std::int64_t cap = cfg.mc.horizon_cap();
    gsprt::TestOutcome out;
    if (cfg.model == "finite") {
        const auto thr = resolve_thresholds(cfg);
        const gsprt::Distribution& src = cfg.hypothesis_h0 ? *cfg.p0 : *cfg.hyp_gamma;
        if (!cfg.hypothesis_h0 && !cfg.family->contains(*cfg.hyp_gamma))
            throw std::domain_error("run: hypothesis gamma lies outside the family");
        gsprt::Philox rng(cfg.mc.seed, 0);
        std::vector<double> cdf(static_cast<size_t>(src.d()));
        double acc = 0.0;
        for (int i = 0; i < src.d(); ++i) {
            acc += src[i];
            cdf[static_cast<size_t>(i)] = acc;
        }
        gsprt::FiniteGsprt test(*cfg.p0, *cfg.family, thr.A, thr.B, cap);
        for (;;) {
            if (auto dec = test.step(rng.next_categorical(cdf.data(), src.d()))) {
                out = test.outcome(*dec);
                break;
            }
        }
    } else {
        if (!cfg.threshold || cfg.threshold->mode != gsprt::ThresholdSpec::Mode::manual)
            throw std::invalid_argument("run (gaussian): manual thresholds required");
        const auto& gc = *cfg.gaussian;
        const gsprt::GaussianParams src = cfg.hypothesis_h0
                                              ? gc.gamma0
                                              : gc.gamma1.value_or(gc.gamma0);
        gsprt::Philox rng(cfg.mc.seed, 0);
        gsprt::GaussianGsprt test(gc.gamma0, gc.box(), cfg.threshold->A, cfg.threshold->B, cap);
        for (;;) {
            const double x = rng.next_gaussian(src.mu, std::sqrt(src.sigma2));
            if (auto dec = test.step(x)) {
                out = test.outcome(*dec);
                break;
            }
        }
    }
    emit(gsprt::to_json(out), args.out_path);
    return 0;
}

int cmd_mc(const CommonArgs& args) {
    gsprt::RunConfig cfg = gsprt::parse_config(load_json(args.config_path));
    apply_overrides(cfg, args);
    if (cfg.model != "finite") throw std::invalid_argument("mc: finite model only");
    const auto thr = resolve_thresholds(cfg);
    const auto panel = build_panel(cfg);
    std::vector<gsprt::TrialRecord> records;
    const auto est = gsprt::estimate_errors(*cfg.p0, *cfg.family, panel, thr.A, thr.B, cfg.mc,
                                            args.csv_path.empty() ? nullptr : &records);
    if (!args.csv_path.empty()) {
        std::ofstream csv(args.csv_path);
        if (!csv) throw std::runtime_error("cannot open CSV output: " + args.csv_path);
        gsprt::write_trials_csv(csv, records);
    }
    json out = gsprt::to_json(est);
    out["A"] = thr.A;
    out["B"] = thr.B;
    out["n"] = cfg.mc.n;
    out["trials"] = cfg.mc.trials;
    out["seed"] = cfg.mc.seed;
    emit(out, args.out_path);
    return 0;
}

int cmd_clt(const CommonArgs& args) {
    gsprt::RunConfig cfg = gsprt::parse_config(load_json(args.config_path));
    apply_overrides(cfg, args);
    if (cfg.model != "finite") throw std::invalid_argument("clt: finite model only");
    const auto rep = gsprt::clt_check(*cfg.p0, *cfg.family, cfg.mc.n, cfg.mc.trials, cfg.mc.seed,
                                      cfg.mc.workers);
    json out = gsprt::to_json(rep);
    out["seed"] = cfg.mc.seed;
    emit(out, args.out_path);
    return 0;
}

int cmd_uwlln(const CommonArgs& args) {
    gsprt::RunConfig cfg = gsprt::parse_config(load_json(args.config_path));
    apply_overrides(cfg, args);
    if (cfg.model != "finite") throw std::invalid_argument("uwlln: finite model only");
    const auto rep = gsprt::uwlln_check(*cfg.p0, *cfg.family, cfg.mc.n, cfg.delta, cfg.mc.trials,
                                        cfg.mc.seed, cfg.mc.workers);
    emit(gsprt::to_json(rep), args.out_path);
    return 0;
}

void report_error(const std::string& kind, const std::string& what) {
    std::cerr << json{{"error", kind}, {"what", what}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential composite hypothesis testing: GSPRT, information projection,"
                 " thresholds and Monte Carlo verification"};
    app.require_subcommand(1);

    CommonArgs a_validate, a_project, a_thresholds, a_run, a_mc, a_clt, a_uwlln;
    add_common(app.add_subcommand("validate", "check the standing assumptions"), a_validate, false);
    add_common(app.add_subcommand("project", "information projection of q"), a_project, false);
    add_common(app.add_subcommand("thresholds", "compute (A_n, B_n)"), a_thresholds, false);
    add_common(app.add_subcommand("run", "run one simulated test to its decision"), a_run, true);
    add_common(app.add_subcommand("mc", "estimate error probabilities"), a_mc, true);
    add_common(app.add_subcommand("clt", "distribution check of the centered statistic"), a_clt,
               true);
    add_common(app.add_subcommand("uwlln", "uniform-LLN deviation decay check"), a_uwlln, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        if (sub == "validate") return cmd_validate(a_validate);
        if (sub == "project") return cmd_project(a_project);
        if (sub == "thresholds") return cmd_thresholds(a_thresholds);
        if (sub == "run") return cmd_run(a_run);
        if (sub == "mc") return cmd_mc(a_mc);
        if (sub == "clt") return cmd_clt(a_clt);
        if (sub == "uwlln") return cmd_uwlln(a_uwlln);
    } catch (const gsprt::ConfigError& e) {
        report_error("config", e.what());
        return 2;
    } catch (const gsprt::json::exception& e) {
        report_error("config", e.what());
        return 2;
    } catch (const std::exception& e) {
        report_error("domain", e.what());
        return 1;
    }
    return 2;
}
