#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gsprt/distribution.hpp"
#include "gsprt/expfam.hpp"
#include "gsprt/linear_family.hpp"
#include "gsprt/montecarlo.hpp"
#include "gsprt/projection.hpp"
#include "gsprt/runner.hpp"
#include "gsprt/thresholds.hpp"
#include "gsprt/validate.hpp"

namespace gsprt {

using nlohmann::json;

/// Malformed or structurally invalid configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline json to_json(const Distribution& p) { return json(p.probs()); }

inline Distribution distribution_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("expected a probability array");
    return Distribution(j.get<std::vector<double>>());
}

inline json to_json(const ProjectionResult& r) {
    return json{{"gamma", r.gamma},       {"f", r.f_value},
                {"lambda", r.lambda},     {"mu", r.mu},
                {"active_set", r.active_set}, {"kkt_residual", r.kkt_residual},
                {"converged", r.converged}};
}

inline json to_json(const AssumptionReport& r) {
    return json{{"p0_outside", r.p0_outside},
                {"interior_nonempty", r.interior_nonempty},
                {"margin_ok", r.margin_ok},
                {"single_active", r.single_active},
                {"active_at_projection", r.active_at_projection},
                {"distinguished_symbol_ok", r.distinguished_symbol_ok},
                {"jacobian_full_rank", r.jacobian_full_rank},
                {"projection_converged", r.projection_converged},
                {"ok", r.ok()},
                {"details", r.details}};
}

inline json to_json(const ConditionReport& r) {
    json viol = json::array();
    for (const auto& v : r.violations)
        viol.push_back(json{{"gamma1", v.g1}, {"gamma2", v.g2}, {"check", v.which}});
    return json{{"gamma0_excluded", r.gamma0_excluded},
                {"hess_A_pd", r.hess_A_pd},
                {"curvature_pd", r.curvature_pd},
                {"variance_inequality_ok", r.variance_inequality_ok},
                {"ok", r.ok()},
                {"violations", viol},
                {"details", r.details}};
}

inline json to_json(const TestOutcome& o) {
    return json{{"decision", to_string(o.decision)},
                {"tau", o.tau},
                {"S_tau", o.S_tau},
                {"trajectory_len", o.trajectory_len}};
}

inline json to_json(const RateEstimate& e) {
    return json{{"value", e.value}, {"ci", {e.lo, e.hi}}, {"count", e.count}, {"trials", e.trials}};
}

inline json to_json(const ErrorEstimates& e) {
    json panel = json::array();
    for (const auto& p : e.p01)
        panel.push_back(json{{"gamma", p.gamma}, {"p01", to_json(p.p01)}, {"tail", to_json(p.tail)}});
    return json{{"p10", to_json(e.p10)},
                {"tail_H0", to_json(e.tail0)},
                {"panel", panel},
                {"p01_max", e.p01_max},
                {"truncation_rate", e.truncation_rate}};
}

inline json to_json(const TailEstimates& e) {
    json panel = json::array();
    for (const auto& p : e.panel)
        panel.push_back(json{{"gamma", p.gamma}, {"tail", to_json(p.tail)}});
    return json{{"tail_H0", to_json(e.tail0)}, {"panel", panel}};
}

inline json to_json(const CltReport& r) {
    return json{{"ks_distance", r.ks_distance},
                {"sample_mean", r.sample_mean},
                {"sample_var", r.sample_var},
                {"D", r.D},
                {"V", r.V},
                {"n", r.n},
                {"trials", r.trials},
                {"bin_edges", r.bin_edges},
                {"bin_counts", r.bin_counts}};
}

inline json to_json(const UwllnReport& r) {
    return json{{"delta", r.delta},
                {"n", r.n},
                {"freq_n", to_json(r.freq_n)},
                {"freq_4n", to_json(r.freq_4n)}};
}

inline LinearFamily family_from_json(const json& j) {
    if (!j.is_object() || !j.contains("w") || !j.contains("xi"))
        throw ConfigError("family: expected object with keys w, xi and optional c0");
    const auto& jw = j.at("w");
    const auto& jx = j.at("xi");
    if (!jw.is_array() || !jx.is_array() || jw.size() != jx.size() || jw.empty())
        throw ConfigError("family: w and xi must be equal-length nonempty arrays");
    std::vector<Halfspace> rows;
    int d = -1;
    for (size_t k = 0; k < jw.size(); ++k) {
        Halfspace h;
        h.w = jw[k].get<std::vector<double>>();
        h.xi = jx[k].get<double>();
        if (d < 0) d = static_cast<int>(h.w.size());
        if (static_cast<int>(h.w.size()) != d)
            throw ConfigError("family: ragged constraint rows");
        rows.push_back(std::move(h));
    }
    const double c0 = j.value("c0", 1e-3);
    try {
        return LinearFamily(d, std::move(rows), c0);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("family: ") + e.what());
    }
}

struct ThresholdSpec {
    enum class Mode { first_order, second_order, manual };
    Mode mode = Mode::manual;
    double eps0 = 0.0, eps1 = 0.0;          // first order
    double eps = 0.0, eta0 = 0.0, eta1 = 0.0;  // second order
    double A = 0.0, B = 0.0;                // manual
};

inline ThresholdSpec threshold_from_json(const json& j) {
    if (!j.is_object() || !j.contains("mode")) throw ConfigError("threshold: missing mode");
    ThresholdSpec t;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "first_order") {
        t.mode = ThresholdSpec::Mode::first_order;
        t.eps0 = j.at("eps0").get<double>();
        t.eps1 = j.at("eps1").get<double>();
    } else if (mode == "second_order") {
        t.mode = ThresholdSpec::Mode::second_order;
        t.eps = j.at("eps").get<double>();
        t.eta0 = j.contains("eta0") ? j.at("eta0").get<double>() : j.at("eta").get<double>();
        t.eta1 = j.contains("eta1") ? j.at("eta1").get<double>() : j.at("eta").get<double>();
    } else if (mode == "manual") {
        t.mode = ThresholdSpec::Mode::manual;
        t.A = j.at("A").get<double>();
        t.B = j.at("B").get<double>();
    } else {
        throw ConfigError("threshold: unknown mode '" + mode + "'");
    }
    return t;
}

struct GaussianConfig {
    GaussianParams gamma0;
    std::vector<double> box_lo, box_hi;
    std::optional<GaussianParams> gamma1;  // sampling point for run/mc under H1

    ParamBox box() const { return ParamBox(box_lo, box_hi); }
};

inline GaussianParams gaussian_params_from_json(const json& j) {
    if (!j.is_object() || !j.contains("mu") || !j.contains("sigma2"))
        throw ConfigError("gaussian params: expected {mu, sigma2}");
    try {
        return GaussianParams(j.at("mu").get<double>(), j.at("sigma2").get<double>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

struct RunConfig {
    std::string model;  // "finite" or "gaussian"
    std::optional<Distribution> p0;
    std::optional<LinearFamily> family;
    std::optional<std::vector<double>> q;  // projection input, defaults to p0
    std::optional<ThresholdSpec> threshold;
    std::int64_t n = 0;
    std::int64_t n_max = 0;  // 0 -> 50n
    McConfig mc;
    bool hypothesis_h0 = true;
    std::optional<Distribution> hyp_gamma;
    std::vector<Distribution> extra_panel;
    double delta = 0.01;  // uwlln threshold
    std::optional<GaussianConfig> gaussian;
};

inline RunConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    RunConfig cfg;
    cfg.model = j.value("model", std::string("finite"));
    if (cfg.model != "finite" && cfg.model != "gaussian")
        throw ConfigError("config: model must be 'finite' or 'gaussian'");

    try {
        if (j.contains("p0")) cfg.p0 = distribution_from_json(j.at("p0"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("p0: ") + e.what());
    }
    if (j.contains("gamma")) cfg.family = family_from_json(j.at("gamma"));
    if (j.contains("q")) {
        if (!j.at("q").is_array()) throw ConfigError("q: expected array");
        cfg.q = j.at("q").get<std::vector<double>>();
    }
    if (j.contains("threshold")) cfg.threshold = threshold_from_json(j.at("threshold"));

    cfg.n = j.value("n", static_cast<std::int64_t>(0));
    if (j.contains("n") && cfg.n < 1) throw ConfigError("n: must be >= 1");
    cfg.n_max = j.value("n_max", static_cast<std::int64_t>(0));
    if (cfg.n_max < 0) throw ConfigError("n_max: must be >= 0");

    if (j.contains("mc")) {
        const auto& m = j.at("mc");
        if (!m.is_object()) throw ConfigError("mc: expected object");
        cfg.mc.trials = m.value("trials", static_cast<std::int64_t>(10000));
        if (cfg.mc.trials < 1) throw ConfigError("mc.trials: must be >= 1");
        cfg.mc.seed = m.value("seed", static_cast<std::uint64_t>(1));
        cfg.mc.workers = m.value("workers", 0);
        if (cfg.mc.workers < 0) throw ConfigError("mc.workers: must be >= 0");
        cfg.delta = m.value("delta", 0.01);
        if (m.contains("hypothesis")) {
            const auto& h = m.at("hypothesis");
            if (h.is_string() && h.get<std::string>() == "H0") {
                cfg.hypothesis_h0 = true;
            } else if (h.is_object() && h.contains("gamma")) {
                cfg.hypothesis_h0 = false;
                try {
                    cfg.hyp_gamma = distribution_from_json(h.at("gamma"));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("hypothesis.gamma: ") + e.what());
                }
            } else {
                throw ConfigError("mc.hypothesis: expected \"H0\" or {gamma: [...]}");
            }
        }
        if (m.contains("panel")) {
            if (!m.at("panel").is_array()) throw ConfigError("mc.panel: expected array of arrays");
            for (const auto& g : m.at("panel")) {
                try {
                    cfg.extra_panel.push_back(distribution_from_json(g));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("mc.panel: ") + e.what());
                }
            }
        }
    }
    cfg.mc.n = cfg.n > 0 ? cfg.n : cfg.mc.n;
    cfg.mc.n_max = cfg.n_max;

    if (j.contains("gaussian")) {
        const auto& g = j.at("gaussian");
        if (!g.is_object() || !g.contains("gamma0") || !g.contains("box"))
            throw ConfigError("gaussian: expected {gamma0, box}");
        GaussianConfig gc;
        gc.gamma0 = gaussian_params_from_json(g.at("gamma0"));
        const auto& b = g.at("box");
        if (!b.is_object() || !b.contains("lo") || !b.contains("hi"))
            throw ConfigError("gaussian.box: expected {lo, hi}");
        gc.box_lo = b.at("lo").get<std::vector<double>>();
        gc.box_hi = b.at("hi").get<std::vector<double>>();
        if (gc.box_lo.size() != gc.box_hi.size() || gc.box_lo.empty())
            throw ConfigError("gaussian.box: lo/hi must be equal-length nonempty arrays");
        for (size_t i = 0; i < gc.box_lo.size(); ++i)
            if (!(gc.box_lo[i] <= gc.box_hi[i]))
                throw ConfigError("gaussian.box: lo must be <= hi");
        if (g.contains("gamma1")) gc.gamma1 = gaussian_params_from_json(g.at("gamma1"));
        cfg.gaussian = std::move(gc);
    }

    if (cfg.model == "finite") {
        if (!cfg.p0 || !cfg.family)
            throw ConfigError("finite model: p0 and gamma are required");
        if (cfg.p0->d() != cfg.family->d())
            throw ConfigError("finite model: p0 and gamma dimensions differ");
    } else {
        if (!cfg.gaussian) throw ConfigError("gaussian model: gaussian section is required");
    }
    return cfg;
}

}  // namespace gsprt
