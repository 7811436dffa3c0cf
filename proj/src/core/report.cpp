#include "gmdkit/report.hpp"

#include <cmath>
#include <cstdio>

namespace gmdkit {

namespace {

Json summary_json(const std::vector<double>& values) {
    const Summary s = summarize(values);
    return Json{{"mean", s.mean}, {"sd", s.sd}};
}

bool any_finite(const std::vector<double>& values) {
    for (double v : values) {
        if (!std::isnan(v)) return true;
    }
    return false;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
    return rows;
}

Json report_envelope(const std::string& kind, const Json& config) {
    return Json{{"schema", "gmdkit." + kind}, {"schema_version", kSchemaVersion}, {"config", config}};
}

std::string estimator_name(Estimator e) { return e == Estimator::gmdr ? "gmdr" : "kpr"; }

Json decompose_report(const GmdFactors& f, const Json& config) {
    Json out = report_envelope("decompose", config);
    out["rank"] = f.rank();
    out["sigma"] = to_json(f.s);
    out["u"] = to_json(f.u);
    out["v"] = to_json(f.v);
    return out;
}

Json fit_report(const GmdEstimate& est, const FitExtras& extras, const Json& config) {
    Json out = report_envelope("fit", config);
    out["beta"] = to_json(est.beta);
    out["weights"] = to_json(est.weight.weights);
    out["kind"] = est.weight.kind == WeightKind::index_set ? "index_set" : "ridge";
    out["selected"] = est.weight.selected;
    out["eta"] = est.weight.eta ? Json(*est.weight.eta) : Json(nullptr);
    out["vi_scores"] = to_json(est.vi_scores);
    out["sigma"] = to_json(est.factors->s);
    out["scales"] = to_json(extras.scales);
    out["gcv_path"] = extras.selection ? Json(extras.selection->gcv_path) : Json(nullptr);
    if (extras.cv) {
        out["cv"] = Json{{"grid", extras.cv->grid}, {"error", extras.cv->cv_error}, {"eta", extras.cv->eta}};
    }
    out["rmse"] = extras.rmse ? Json(*extras.rmse) : Json(nullptr);
    return out;
}

Json inference_report(const InferenceReport& rep, std::optional<double> fdr, const Json& config,
                      const std::optional<RobustWeights>& robust) {
    Json out = report_envelope("infer", config);
    const Vector q = fdr ? by_qvalues(rep.p_value) : Vector();
    Json coefs = Json::array();
    for (Index j = 0; j < rep.p_value.size(); ++j) {
        Json c{{"j", j},
               {"beta_w", rep.beta_w(j)},
               {"bias_hat", rep.bias_hat(j)},
               {"beta_corrected", rep.beta_corrected(j)},
               {"psi", rep.psi(j)},
               {"r_jj", rep.r_jj(j)},
               {"p_value", rep.p_value(j)},
               {"h", rep.h(j)},
               {"xi_jj", rep.xi_diag(j)},
               {"scale", rep.scales(j)}};
        if (fdr) {
            c["q_value"] = q(j);
            c["discovery"] = q(j) <= *fdr;
        }
        coefs.push_back(std::move(c));
    }
    out["coefficients"] = std::move(coefs);
    out["sigma2_hat"] = rep.sigma2_hat;
    out["lambda"] = rep.lambda;
    out["r"] = rep.r;
    out["h"] = rep.h.size() ? rep.h(0) : 1.0;
    out["estimator"] = estimator_name(rep.estimator);
    out["rank"] = rep.rank;
    out["selected"] = rep.weight.selected;
    out["eta"] = rep.weight.eta ? Json(*rep.weight.eta) : Json(nullptr);
    out["fdr"] = fdr ? Json(*fdr) : Json(nullptr);
    if (robust) out["robust"] = robust_report(*robust, nullptr).at("estimate");
    return out;
}

Json kernel_test_report(const std::string& test, const KernelTestResult& res, double alpha, const Json& config) {
    Json out = report_envelope("structtest", config);
    out["test"] = test;
    out["statistic"] = res.statistic;
    out["p_value"] = res.p_value;
    out["n_permutations"] = res.n_permutations;
    out["seed"] = res.seed;
    out["alpha"] = alpha;
    out["significant"] = res.p_value < alpha;
    out["decision"] = res.p_value < alpha ? "informative" : "not_informative";
    return out;
}

Json robust_report(const RobustWeights& w, const Json& config) {
    Json out = report_envelope("robust-tau", config);
    out["estimate"] = Json{{"tau_hat", w.tau_hat},
                           {"lambda_hq_hat", w.lambda_hq_hat},
                           {"neg_loglik", w.neg_loglik},
                           {"iterations", w.iterations},
                           {"converged", w.converged},
                           {"h_norm", w.h_norm}};
    out["tau_hat"] = w.tau_hat;
    out["lambda_hq_hat"] = w.lambda_hq_hat;
    out["neg_loglik"] = w.neg_loglik;
    return out;
}

Json simulation_report(const SimulationReport& rep, const Json& config) {
    Json out = report_envelope("simulate", config);
    out["setting"] = setting_name(rep.spec.setting);
    out["replicates"] = rep.spec.replicates;
    out["realized_r2"] = summary_json(rep.realized_r2);
    Json methods = Json::object();
    for (const MethodResult& m : rep.methods) {
        Json j = Json::object();
        auto add = [&](const char* key, const std::vector<double>& values) {
            if (!any_finite(values)) return;
            j[key] = summary_json(values);
            j[std::string(key) + "_values"] = values;
        };
        add("type1", m.type1);
        add("power", m.power);
        add("rmse", m.rmse);
        add("p_value", m.p_value);
        add("tau_hat", m.tau_hat);
        if (any_finite(m.p_value)) {
            std::size_t sig = 0;
            std::size_t total = 0;
            for (double p : m.p_value) {
                if (std::isnan(p)) continue;
                ++total;
                if (p < rep.options.screen_alpha) ++sig;
            }
            j["significant_fraction"] = total ? static_cast<double>(sig) / static_cast<double>(total) : 0.0;
        }
        methods[method_name(m.method)] = std::move(j);
    }
    out["methods"] = std::move(methods);
    return out;
}

std::string simulation_csv(const SimulationReport& rep) {
    std::string out = "replicate,method,type1,power,rmse,p_value,tau_hat\n";
    for (int r = 0; r < rep.spec.replicates; ++r) {
        const auto i = static_cast<std::size_t>(r);
        for (const MethodResult& m : rep.methods) {
            out += std::to_string(r) + "," + method_name(m.method) + "," + format_number(m.type1[i]) + "," +
                   format_number(m.power[i]) + "," + format_number(m.rmse[i]) + "," + format_number(m.p_value[i]) +
                   "," + format_number(m.tau_hat[i]) + "\n";
        }
    }
    return out;
}

}  // namespace gmdkit
