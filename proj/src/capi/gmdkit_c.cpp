#include "gmdkit/gmdkit.h"

#include <atomic>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <new>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gmdkit/estimators.hpp"
#include "gmdkit/inference.hpp"
#include "gmdkit/linalg.hpp"
#include "gmdkit/matrix_io.hpp"
#include "gmdkit/report.hpp"
#include "gmdkit/robust.hpp"
#include "gmdkit/simulate.hpp"
#include "gmdkit/structure_tests.hpp"

struct gmdk_dataset {
    gmdkit::TwoWayDataset data;
};

struct gmdk_result {
    gmdkit::Json report;
    std::string csv;
    std::map<int, std::string> text;
    std::map<std::string, std::vector<double>> vectors;
};

namespace {

using gmdkit::ErrorCode;
using gmdkit::fail;
using gmdkit::Json;

thread_local std::string g_last_error;
std::atomic<int> g_threads{0};

gmdk_status to_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return GMDK_INVALID_ARGUMENT;
        case ErrorCode::dimension_mismatch: return GMDK_DIMENSION_MISMATCH;
        case ErrorCode::not_positive_definite: return GMDK_NOT_POSITIVE_DEFINITE;
        case ErrorCode::numerical: return GMDK_NUMERICAL;
        case ErrorCode::convergence: return GMDK_CONVERGENCE;
        case ErrorCode::io: return GMDK_IO;
    }
    return GMDK_INTERNAL;
}

template <typename F>
gmdk_status guarded(F&& body) {
    try {
        g_last_error.clear();
        body();
        return GMDK_OK;
    } catch (const gmdkit::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = std::string("invalid options: ") + e.what();
        return GMDK_INVALID_ARGUMENT;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return GMDK_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return GMDK_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return GMDK_INTERNAL;
    }
}

void require(const void* ptr, const char* what) {
    if (!ptr) fail(ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

// Reads user options with defaults, records the resolved value of every key
// it is asked about, and rejects keys nobody asked about.
class OptionReader {
public:
    explicit OptionReader(const char* text) {
        if (text && *text) {
            try {
                in_ = Json::parse(text);
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorCode::invalid_argument, std::string("options are not valid JSON: ") + e.what());
            }
        } else {
            in_ = Json::object();
        }
        if (!in_.is_object()) fail(ErrorCode::invalid_argument, "options must be a JSON object");
        resolved_ = Json::object();
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        used_.insert(key);
        T value = fallback;
        if (in_.contains(key) && !in_.at(key).is_null()) value = convert<T>(key);
        resolved_[key] = value;
        return value;
    }

    template <typename T>
    std::optional<T> optional(const std::string& key) {
        used_.insert(key);
        if (!in_.contains(key) || in_.at(key).is_null()) {
            resolved_[key] = nullptr;
            return std::nullopt;
        }
        T value = convert<T>(key);
        resolved_[key] = value;
        return value;
    }

    bool has(const std::string& key) const { return in_.contains(key) && !in_.at(key).is_null(); }
    const Json& raw(const std::string& key) {
        used_.insert(key);
        return in_.at(key);
    }
    void set(const std::string& key, Json value) {
        used_.insert(key);
        resolved_[key] = std::move(value);
    }

    Json finish() {
        for (const auto& item : in_.items()) {
            if (!used_.count(item.key())) fail(ErrorCode::invalid_argument, "unknown option '" + item.key() + "'");
        }
        resolved_["threads"] = g_threads.load();
        return resolved_;
    }

private:
    template <typename T>
    T convert(const std::string& key) {
        try {
            return in_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(ErrorCode::invalid_argument, "option '" + key + "' has the wrong type");
        }
    }

    Json in_;
    Json resolved_;
    std::set<std::string> used_;
};

gmdkit::Selector read_selector(OptionReader& o) {
    const std::string s = o.get<std::string>("selector", "vi");
    if (s == "vi") return gmdkit::Selector::vi;
    if (s == "top") return gmdkit::Selector::top;
    fail(ErrorCode::invalid_argument, "selector must be 'vi' or 'top'");
}

gmdkit::GmdrOptions read_gmdr(OptionReader& o) {
    gmdkit::GmdrOptions g;
    g.min_var_frac = o.get<double>("min_var_frac", 1e-3);
    g.selector = read_selector(o);
    if (auto sel = o.optional<std::vector<gmdkit::Index>>("selected")) g.selected = *sel;
    if (auto k = o.optional<gmdkit::Index>("fixed_top_k")) g.fixed_top_k = *k;
    return g;
}

gmdkit::KprOptions read_kpr(OptionReader& o) {
    gmdkit::KprOptions k;
    if (o.has("eta") && o.raw("eta").is_string()) {
        if (o.raw("eta").get<std::string>() != "cv") fail(ErrorCode::invalid_argument, "eta must be a number or \"cv\"");
        o.set("eta", "cv");
    } else if (auto eta = o.optional<double>("eta")) {
        k.eta = *eta;
    } else {
        o.set("eta", "cv");
    }
    k.folds = o.get<int>("folds", k.folds);
    k.grid_size = o.get<int>("grid_size", k.grid_size);
    k.seed = o.get<std::uint64_t>("cv_seed", k.seed);
    return k;
}

gmdkit::GmdiOptions read_gmdi(OptionReader& o, bool standardize_default) {
    gmdkit::GmdiOptions g;
    const std::string est = o.get<std::string>("estimator", "gmdr");
    if (est == "gmdr") {
        g.estimator = gmdkit::Estimator::gmdr;
    } else if (est == "kpr") {
        g.estimator = gmdkit::Estimator::kpr;
    } else {
        fail(ErrorCode::invalid_argument, "estimator must be 'gmdr' or 'kpr'");
    }
    g.h = o.get<double>("h", 1.0);
    g.r = o.get<double>("r", 0.05);
    g.lambda = o.optional<double>("lambda");
    g.standardize = o.get<bool>("standardize", standardize_default);
    g.gmdr = read_gmdr(o);
    g.kpr = read_kpr(o);
    const std::string mode = o.get<std::string>("sigma2_mode", "fixed");
    if (mode == "fixed") {
        g.sigma2.mode = gmdkit::Sigma2Mode::fixed_rate;
    } else if (mode == "cv") {
        g.sigma2.mode = gmdkit::Sigma2Mode::cv_average;
    } else {
        fail(ErrorCode::invalid_argument, "sigma2_mode must be 'fixed' or 'cv'");
    }
    g.sigma2.repeats = o.get<int>("sigma2_repeats", g.sigma2.repeats);
    g.sigma2.seed = o.get<std::uint64_t>("sigma2_seed", g.sigma2.seed);
    g.sigma2_known = o.optional<double>("sigma2");
    return g;
}

gmdkit::GmdAlgorithm read_algorithm(OptionReader& o) {
    const std::string a = o.get<std::string>("algorithm", "svd");
    if (a == "svd") return gmdkit::GmdAlgorithm::svd;
    if (a == "gram") return gmdkit::GmdAlgorithm::gram;
    fail(ErrorCode::invalid_argument, "algorithm must be 'svd' or 'gram'");
}

gmdk_result* make_result(Json report) {
    auto r = std::make_unique<gmdk_result>();
    r->report = std::move(report);
    auto grab = [&](const std::string& name, const Json& arr) {
        if (!arr.is_array()) return;
        std::vector<double> v;
        for (const Json& x : arr) v.push_back(x.is_number() ? x.get<double>() : std::numeric_limits<double>::quiet_NaN());
        r->vectors[name] = std::move(v);
    };
    for (const char* key : {"sigma", "beta", "weights", "vi_scores", "gcv_path", "scales"}) {
        if (r->report.contains(key)) grab(key, r->report.at(key));
    }
    if (r->report.contains("coefficients")) {
        const Json& coefs = r->report.at("coefficients");
        for (const char* key : {"beta_w", "bias_hat", "beta_corrected", "psi", "r_jj", "p_value", "q_value", "xi_jj", "mde"}) {
            if (coefs.empty() || !coefs.at(0).contains(key)) continue;
            Json arr = Json::array();
            for (const Json& c : coefs) arr.push_back(c.at(key));
            grab(key, arr);
        }
    }
    return r.release();
}

}  // namespace

extern "C" {

const char* gmdk_version(void) { return "1.0.0"; }

const char* gmdk_last_error(void) { return g_last_error.c_str(); }

const char* gmdk_status_name(gmdk_status status) {
    switch (status) {
        case GMDK_OK: return "ok";
        case GMDK_INVALID_ARGUMENT: return "invalid_argument";
        case GMDK_DIMENSION_MISMATCH: return "dimension_mismatch";
        case GMDK_NOT_POSITIVE_DEFINITE: return "not_positive_definite";
        case GMDK_NUMERICAL: return "numerical";
        case GMDK_CONVERGENCE: return "convergence";
        case GMDK_IO: return "io";
        case GMDK_INTERNAL: return "internal";
    }
    return "unknown";
}

gmdk_status gmdk_set_threads(int threads) {
    return guarded([&] {
        if (threads < 0) fail(ErrorCode::invalid_argument, "threads must be nonnegative");
        g_threads = threads;
    });
}

gmdk_status gmdk_dataset_load(const char* x_path, const char* h_path, const char* q_path, const char* y_path,
                              gmdk_dataset** out) {
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        require(x_path, "x_path");
        auto opt = [](const char* s) { return s ? std::optional<std::string>(s) : std::nullopt; };
        auto d = std::make_unique<gmdk_dataset>();
        d->data = gmdkit::load_dataset(x_path, opt(h_path), opt(q_path), opt(y_path));
        gmdkit::validate_dataset(d->data);
        *out = d.release();
    });
}

gmdk_status gmdk_dataset_load_manifest(const char* manifest_path, gmdk_dataset** out) {
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        require(manifest_path, "manifest_path");
        auto d = std::make_unique<gmdk_dataset>();
        d->data = gmdkit::load_dataset(std::string(manifest_path));
        gmdkit::validate_dataset(d->data);
        *out = d.release();
    });
}

gmdk_status gmdk_dataset_from_arrays(int n, int p, const double* x, const double* h, const double* q,
                                     const double* y, gmdk_dataset** out) {
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        require(x, "x");
        if (n <= 0 || p <= 0) fail(ErrorCode::invalid_argument, "n and p must be positive");
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        auto d = std::make_unique<gmdk_dataset>();
        d->data.x = Eigen::Map<const RowMajor>(x, n, p);
        d->data.h = h ? gmdkit::Matrix(Eigen::Map<const RowMajor>(h, n, n)) : gmdkit::Matrix::Identity(n, n);
        d->data.q = q ? gmdkit::Matrix(Eigen::Map<const RowMajor>(q, p, p)) : gmdkit::Matrix::Identity(p, p);
        if (y) d->data.y = Eigen::Map<const gmdkit::Vector>(y, n);
        gmdkit::validate_dataset(d->data);
        *out = d.release();
    });
}

gmdk_status gmdk_dataset_shape(const gmdk_dataset* data, int* n, int* p) {
    return guarded([&] {
        require(data, "data");
        if (n) *n = static_cast<int>(data->data.n());
        if (p) *p = static_cast<int>(data->data.p());
    });
}

void gmdk_dataset_free(gmdk_dataset* data) { delete data; }

gmdk_status gmdk_decompose(const gmdk_dataset* data, const char* options_json, gmdk_result** out) {
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        require(data, "data");
        OptionReader o(options_json);
        const bool center = o.get<bool>("center", false);
        const bool standardize = o.get<bool>("standardize", false);
        gmdkit::GmdOptions g;
        g.rank = o.optional<gmdkit::Index>("rank");
        g.rank_tol = o.get<double>("rank_tol", g.rank_tol);
        g.algorithm = read_algorithm(o);
        const Json config = o.finish();
        gmdkit::TwoWayDataset d = data->data;
        if (center) d = gmdkit::center_hq(d);
        if (standardize) d = gmdkit::standardize_columns(d).data;
        *out = make_result(gmdkit::decompose_report(gmdkit::gmd(d, g), config));
    });
}

gmdk_status gmdk_fit(const gmdk_dataset* data, const char* method, const char* options_json, gmdk_result** out) {
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        require(data, "data");
        require(method, "method");
        const std::string m = method;
        if (m != "gmdr" && m != "kpr") fail(ErrorCode::invalid_argument, "method must be 'gmdr' or 'kpr'");
        OptionReader o(options_json);
        o.set("method", m);
        const bool standardize = o.get<bool>("standardize", true);
        const bool loocv = o.get<bool>("loocv", false);
        gmdkit::GmdrOptions gopts;
        gmdkit::KprOptions kopts;
        if (m == "gmdr") {
            gopts = read_gmdr(o);
        } else {
            kopts = read_kpr(o);
        }
        const Json config = o.finish();

        const gmdkit::TwoWayDataset& raw = data->data;
        raw.response();
        const gmdkit::PreparedData prep = gmdkit::prepare(raw, standardize);
        auto factors = std::make_shared<const gmdkit::GmdFactors>(gmdkit::gmd(prep.data));
        gmdkit::FitExtras extras;
        extras.scales = prep.scales;
        gmdkit::GmdEstimate est;
        if (m == "gmdr") {
            gmdkit::ComponentSelection sel;
            est = gmdkit::fit_gmdr(prep.data, factors, gopts, &sel);
            if (!sel.gcv_path.empty()) extras.selection = sel;
        } else {
            gmdkit::KprCvResult cv;
            est = gmdkit::fit_kpr(prep.data, factors, kopts, &cv);
            if (!kopts.eta) extras.cv = cv;
        }
        if (loocv) {
            gmdkit::LoocvOptions lo;
            lo.method = m == "gmdr" ? gmdkit::Method::gmdr : gmdkit::Method::kpr;
            lo.gmdr = gopts;
            lo.kpr = kopts;
            lo.standardize = standardize;
            extras.rmse = gmdkit::loocv_rmse(raw, lo).rmse;
        }
        *out = make_result(gmdkit::fit_report(est, extras, config));
    });
}

gmdk_status gmdk_infer(const gmdk_dataset* data, const char* options_json, gmdk_result** out) {
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        require(data, "data");
        OptionReader o(options_json);
        const gmdkit::GmdiOptions g = read_gmdi(o, true);
        const bool robust = o.get<bool>("robust", false);
        const std::optional<double> fdr = o.optional<double>("fdr");
        const double alpha = o.get<double>("alpha", 0.05);
        const std::optional<double> power = o.optional<double>("power");
        const Json config = o.finish();
        if (fdr && !(*fdr > 0.0 && *fdr < 1.0)) fail(ErrorCode::invalid_argument, "fdr must lie in (0, 1)");
        if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");

        gmdkit::InferenceReport rep;
        std::optional<gmdkit::RobustWeights> weights;
        if (robust) {
            gmdkit::RobustOptions ro;
            ro.threads = g_threads;
            const gmdkit::RobustGmdiReport rr = gmdkit::run_robust_gmdi(data->data, g, ro);
            rep = rr.report;
            weights = rr.weights;
        } else {
            rep = gmdkit::run_gmdi(data->data, g);
        }
        Json report = gmdkit::inference_report(rep, fdr, config, weights);
        report["alpha"] = alpha;
        Json& coefs = report["coefficients"];
        for (gmdkit::Index j = 0; j < rep.p_value.size(); ++j) {
            Json& c = coefs[static_cast<std::size_t>(j)];
            c["significant"] = rep.p_value(j) < alpha;
            if (power) {
                c["mde"] = gmdkit::min_detectable_effect(rep.xi_diag(j), rep.h(j), rep.psi(j), rep.r_jj(j), alpha, *power);
            }
        }
        *out = make_result(std::move(report));
    });
}

gmdk_status gmdk_structtest(const gmdk_dataset* data, const char* test, const char* options_json, gmdk_result** out) {
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        require(data, "data");
        require(test, "test");
        const std::string t = test;
        OptionReader o(options_json);
        o.set("test", t);
        gmdkit::PermutationOptions perm;
        perm.permutations = o.get<int>("permutations", 999);
        perm.seed = o.get<std::uint64_t>("seed", 1);
        perm.threads = g_threads;
        const double alpha = o.get<double>("alpha", 0.05);
        const Json config = o.finish();
        const gmdkit::TwoWayDataset& d = data->data;
        gmdkit::KernelTestResult res;
        if (t == "krv-q") {
            res = gmdkit::krv(d.x.transpose() * d.x, d.q, perm);
        } else if (t == "krv-h") {
            res = gmdkit::krv(d.x * d.x.transpose(), d.h, perm);
        } else if (t == "mirkat") {
            res = gmdkit::mirkat(d.response(), d.h, perm);
        } else {
            fail(ErrorCode::invalid_argument, "test must be 'krv-q', 'krv-h' or 'mirkat'");
        }
        *out = make_result(gmdkit::kernel_test_report(t, res, alpha, config));
    });
}

gmdk_status gmdk_robust_tau(const gmdk_dataset* data, const char* options_json, gmdk_result** out) {
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        require(data, "data");
        OptionReader o(options_json);
        const bool standardize = o.get<bool>("standardize", true);
        gmdkit::RobustOptions ro;
        ro.max_iterations = o.get<int>("max_iterations", ro.max_iterations);
        ro.threads = g_threads;
        const Json config = o.finish();
        data->data.response();
        const gmdkit::PreparedData prep = gmdkit::prepare(data->data, standardize);
        *out = make_result(gmdkit::robust_report(gmdkit::estimate_tau(prep.data, ro), config));
    });
}

gmdk_status gmdk_simulate(const char* options_json, gmdk_result** out) {
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        OptionReader o(options_json);
        gmdkit::SettingSpec spec;
        spec.setting = gmdkit::parse_setting(o.get<std::string>("setting", "I"));
        spec.n = o.get<gmdkit::Index>("n", spec.n);
        spec.p = o.get<gmdkit::Index>("p", spec.p);
        spec.r_squared = o.get<double>("r2", spec.r_squared);
        spec.q_variant = o.get<int>("q_variant", spec.q_variant);
        spec.h_variant = o.get<int>("h_variant", spec.h_variant);
        spec.theta = o.get<double>("theta", spec.theta);
        spec.delta = o.get<double>("delta", spec.delta);
        spec.signal_scale = o.optional<double>("signal_scale");
        spec.replicates = o.get<int>("reps", spec.replicates);
        spec.seed = o.get<std::uint64_t>("seed", spec.seed);

        std::vector<std::string> default_methods;
        switch (spec.setting) {
            case gmdkit::Setting::I: default_methods = {"gmdi-d", "gmdi-k"}; break;
            case gmdkit::Setting::II: default_methods = {"gmdi-d", "gmdi-k", "krv-q"}; break;
            case gmdkit::Setting::III: default_methods = {"krv-h", "mirkat-h"}; break;
            case gmdkit::Setting::IV: default_methods = {"gmdi-k", "r-gmdi-k"}; break;
            case gmdkit::Setting::perturbed: default_methods = {"gmdi-d", "gmdi-k"}; break;
        }
        const auto names = o.get<std::vector<std::string>>("methods", default_methods);
        std::vector<gmdkit::SimMethod> methods;
        for (const std::string& name : names) methods.push_back(gmdkit::parse_method(name));

        gmdkit::ExperimentOptions ex;
        ex.alpha = o.get<double>("alpha", ex.alpha);
        ex.screen_alpha = o.get<double>("screen_alpha", ex.screen_alpha);
        ex.permutations = o.get<int>("permutations", ex.permutations);
        ex.gmdi = read_gmdi(o, false);
        ex.threads = g_threads;
        const Json config = o.finish();

        const gmdkit::SimulationReport rep = gmdkit::run_experiment(spec, methods, ex);
        gmdk_result* r = make_result(gmdkit::simulation_report(rep, config));
        r->csv = gmdkit::simulation_csv(rep);
        *out = r;
    });
}

const char* gmdk_result_json(const gmdk_result* result, int indent) {
    if (!result) return nullptr;
    auto* r = const_cast<gmdk_result*>(result);
    const int key = indent < 0 ? -1 : indent;
    auto it = r->text.find(key);
    if (it == r->text.end()) {
        it = r->text.emplace(key, r->report.dump(key, ' ', false, nlohmann::json::error_handler_t::replace)).first;
    }
    return it->second.c_str();
}

const char* gmdk_result_csv(const gmdk_result* result) {
    if (!result || result->csv.empty()) return nullptr;
    return result->csv.c_str();
}

const double* gmdk_result_vector(const gmdk_result* result, const char* name, int* length) {
    if (length) *length = 0;
    if (!result || !name) return nullptr;
    const auto it = result->vectors.find(name);
    if (it == result->vectors.end()) return nullptr;
    if (length) *length = static_cast<int>(it->second.size());
    return it->second.data();
}

void gmdk_result_free(gmdk_result* result) { delete result; }

}  // extern "C"
