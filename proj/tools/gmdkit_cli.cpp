#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gmdkit/gmdkit.h"

namespace {

using Json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct DataFlags {
    std::string manifest;
    std::string x;
    std::string h;
    std::string q;
    std::string y;
};

void add_data_flags(CLI::App* cmd, DataFlags& d, bool needs_y) {
    cmd->add_option("--manifest", d.manifest, "dataset manifest {\"X\", \"H\", \"Q\", \"y\"}");
    cmd->add_option("--X", d.x, "design matrix CSV (n x p)");
    cmd->add_option("--H", d.h, "row kernel CSV (n x n), identity when omitted");
    cmd->add_option("--Q", d.q, "column kernel CSV (p x p), identity when omitted");
    cmd->add_option("--y", d.y, needs_y ? "response CSV (n x 1)" : "response CSV (n x 1), optional");
}

// Options set on the command line are forwarded; everything else is left to
// the library defaults, which come back resolved in the report config.
class OptionSet {
public:
    template <typename T>
    void bind(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
        auto holder = std::make_shared<T>();
        CLI::Option* opt = cmd->add_option(flag, *holder, help);
        bindings_.push_back([opt, holder, key](Json& out) {
            if (opt->count()) out[key] = *holder;
        });
    }

    void flag(CLI::App* cmd, const std::string& flag, const std::string& key, bool value, const std::string& help) {
        CLI::Option* opt = cmd->add_flag(flag, help);
        bindings_.push_back([opt, key, value](Json& out) {
            if (opt->count()) out[key] = value;
        });
    }

    void list(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
        auto holder = std::make_shared<std::vector<std::string>>();
        CLI::Option* opt = cmd->add_option(flag, *holder, help)->delimiter(',');
        bindings_.push_back([opt, holder, key](Json& out) {
            if (opt->count()) out[key] = *holder;
        });
    }

    // Accepts a number or the literal "cv".
    void number_or_cv(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
        auto holder = std::make_shared<std::string>();
        CLI::Option* opt = cmd->add_option(flag, *holder, help);
        bindings_.push_back([opt, holder, key](Json& out) {
            if (!opt->count()) return;
            if (*holder == "cv") {
                out[key] = "cv";
                return;
            }
            try {
                std::size_t used = 0;
                const double v = std::stod(*holder, &used);
                if (used != holder->size()) throw std::invalid_argument(*holder);
                out[key] = v;
            } catch (const std::exception&) {
                throw CLI::ValidationError(key, "expected a number or \"cv\", got '" + *holder + "'");
            }
        });
    }

    std::string json() const {
        Json out = Json::object();
        for (const auto& b : bindings_) b(out);
        return out.dump();
    }

private:
    std::vector<std::function<void(Json&)>> bindings_;
};

void add_estimator_flags(CLI::App* cmd, OptionSet& o) {
    o.bind<std::string>(cmd, "--estimator", "estimator", "gmdr or kpr");
    o.number_or_cv(cmd, "--eta", "eta", "KPR ridge level, or \"cv\"");
    o.bind<std::string>(cmd, "--selector", "selector", "GMDR component ordering: vi or top");
    o.bind<long>(cmd, "--fixed-top-k", "fixed_top_k", "use the top-k components by GMD value");
    o.bind<double>(cmd, "--min-var-frac", "min_var_frac", "drop components below this variance fraction");
    o.bind<double>(cmd, "--trunc-h", "h", "truncation level h of the bias correction");
    o.bind<double>(cmd, "--r", "r", "decay rate in the bias bound");
    o.bind<double>(cmd, "--lambda", "lambda", "initial-estimator lasso penalty");
    o.bind<std::string>(cmd, "--sigma2-mode", "sigma2_mode", "fixed or cv");
    o.bind<double>(cmd, "--sigma2", "sigma2", "known noise variance");
}

struct Failure {
    gmdk_status status;
    std::string message;
};

int report_failure(const Failure& f) {
    Json err{{"error", {{"status", gmdk_status_name(f.status)}, {"code", static_cast<int>(f.status)},
                        {"message", f.message}}}};
    std::cerr << err.dump() << "\n";
    return f.status == GMDK_INVALID_ARGUMENT ? kExitUsage : kExitFailure;
}

void check(gmdk_status status) {
    if (status != GMDK_OK) throw Failure{status, gmdk_last_error()};
}

struct DatasetHandle {
    gmdk_dataset* ptr = nullptr;
    ~DatasetHandle() { gmdk_dataset_free(ptr); }
};

struct ResultHandle {
    gmdk_result* ptr = nullptr;
    ~ResultHandle() { gmdk_result_free(ptr); }
};

void load(const DataFlags& d, DatasetHandle& out) {
    if (!d.manifest.empty()) {
        if (!d.x.empty()) throw Failure{GMDK_INVALID_ARGUMENT, "use either --manifest or --X, not both"};
        check(gmdk_dataset_load_manifest(d.manifest.c_str(), &out.ptr));
        return;
    }
    if (d.x.empty()) throw Failure{GMDK_INVALID_ARGUMENT, "a dataset is required: --manifest or --X"};
    auto opt = [](const std::string& s) { return s.empty() ? nullptr : s.c_str(); };
    check(gmdk_dataset_load(d.x.c_str(), opt(d.h), opt(d.q), opt(d.y), &out.ptr));
}

std::string scalar_text(const Json& v) {
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
        return buf;
    }
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

// Plain-text view of a report: scalars as "key: value", numeric arrays on one
// line, arrays of objects as aligned tables.
std::string render_table(const Json& report) {
    std::ostringstream out;
    for (const auto& item : report.items()) {
        const Json& v = item.value();
        if (item.key() == "config" || item.key() == "u" || item.key() == "v") continue;
        if (v.is_primitive()) {
            out << item.key() << ": " << scalar_text(v) << "\n";
        } else if (v.is_array() && !v.empty() && v.at(0).is_object()) {
            std::vector<std::string> cols;
            for (const auto& c : v.at(0).items()) {
                if (c.value().is_primitive()) cols.push_back(c.key());
            }
            std::vector<std::vector<std::string>> rows{cols};
            for (const Json& row : v) {
                std::vector<std::string> cells;
                for (const auto& c : cols) cells.push_back(row.contains(c) ? scalar_text(row.at(c)) : "");
                rows.push_back(std::move(cells));
            }
            std::vector<std::size_t> width(cols.size(), 0);
            for (const auto& r : rows) {
                for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
            }
            out << item.key() << ":\n";
            for (const auto& r : rows) {
                for (std::size_t i = 0; i < r.size(); ++i) {
                    out << "  " << std::string(width[i] - r[i].size(), ' ') << r[i];
                }
                out << "\n";
            }
        } else if (v.is_array()) {
            out << item.key() << ":";
            for (const Json& x : v) out << " " << scalar_text(x);
            out << "\n";
        } else if (v.is_object()) {
            out << item.key() << ":\n";
            for (const auto& sub : v.items()) {
                if (sub.value().is_primitive()) {
                    out << "  " << sub.key() << ": " << scalar_text(sub.value()) << "\n";
                } else if (sub.value().is_object()) {
                    out << "  " << sub.key() << ":";
                    for (const auto& leaf : sub.value().items()) {
                        if (leaf.value().is_primitive()) out << " " << leaf.key() << "=" << scalar_text(leaf.value());
                        if (leaf.value().is_object() && leaf.value().contains("mean")) {
                            out << " " << leaf.key() << "=" << scalar_text(leaf.value().at("mean")) << "("
                                << scalar_text(leaf.value().at("sd")) << ")";
                        }
                    }
                    out << "\n";
                }
            }
        }
    }
    return out.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw Failure{GMDK_IO, "cannot write '" + path + "'"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-way structured regression: GMD estimation, GMDI inference, kernel tests and simulations"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", gmdk_version());
    app.failure_message(CLI::FailureMessage::help);

    int threads = -1;
    bool pretty = false;
    std::string out_path;
    app.add_option("--threads", threads, "worker cap (default GMDKIT_THREADS, else all cores)")
        ->check(CLI::NonNegativeNumber);
    app.add_flag("--pretty", pretty, "human-readable table instead of JSON");
    app.add_option("--out", out_path, "write the report to this file instead of stdout");

    DataFlags dec_data, fit_data, inf_data, st_data, rob_data;
    OptionSet dec_opts, fit_opts, inf_opts, st_opts, rob_opts, sim_opts;

    CLI::App* decompose = app.add_subcommand("decompose", "generalized matrix decomposition of X under (H, Q)");
    add_data_flags(decompose, dec_data, false);
    dec_opts.flag(decompose, "--center", "center", true, "H-center the columns first");
    dec_opts.flag(decompose, "--standardize", "standardize", true, "scale columns to unit H-norm first");
    dec_opts.bind<long>(decompose, "--rank", "rank", "keep at most this many components");
    dec_opts.bind<double>(decompose, "--rank-tol", "rank_tol", "relative cutoff for numerical rank");
    dec_opts.bind<std::string>(decompose, "--algorithm", "algorithm", "svd or gram");

    CLI::App* fit = app.add_subcommand("fit", "fit a GMDR or KPR estimator");
    std::string fit_method;
    fit->add_option("method", fit_method, "gmdr or kpr")->required()->check(CLI::IsMember({"gmdr", "kpr"}));
    add_data_flags(fit, fit_data, true);
    fit_opts.number_or_cv(fit, "--eta", "eta", "KPR ridge level, or \"cv\"");
    fit_opts.bind<int>(fit, "--folds", "folds", "KPR cross-validation folds");
    fit_opts.bind<std::string>(fit, "--selector", "selector", "GMDR component ordering: vi or top");
    fit_opts.bind<long>(fit, "--fixed-top-k", "fixed_top_k", "use the top-k components by GMD value");
    fit_opts.bind<double>(fit, "--min-var-frac", "min_var_frac", "drop components below this variance fraction");
    fit_opts.flag(fit, "--no-standardize", "standardize", false, "keep the original column scales");
    fit_opts.flag(fit, "--loocv", "loocv", true, "also report leave-one-out relative RMSE");

    CLI::App* infer = app.add_subcommand("infer", "bias-corrected p-values for every coefficient");
    add_data_flags(infer, inf_data, true);
    add_estimator_flags(infer, inf_opts);
    inf_opts.flag(infer, "--no-standardize", "standardize", false, "keep the original column scales");
    inf_opts.flag(infer, "--robust", "robust", true, "estimate the mixed row kernel H(tau) first");
    inf_opts.bind<double>(infer, "--fdr", "fdr", "Benjamini-Yekutieli q-value level");
    inf_opts.bind<double>(infer, "--alpha", "alpha", "per-coefficient significance level");
    inf_opts.bind<double>(infer, "--power", "power", "report the minimum detectable effect at this power");

    CLI::App* structtest = app.add_subcommand("structtest", "permutation test of kernel informativeness");
    std::string st_test;
    std::string st_kernel = "h";
    structtest->add_option("test", st_test, "krv or mirkat")->required()->check(CLI::IsMember({"krv", "mirkat"}));
    structtest->add_option("--kernel", st_kernel, "KRV target: h (X X^T vs H) or q (X^T X vs Q)")
        ->check(CLI::IsMember({"h", "q"}));
    add_data_flags(structtest, st_data, false);
    st_opts.bind<int>(structtest, "--b", "permutations", "number of permutations");
    st_opts.bind<std::uint64_t>(structtest, "--seed", "seed", "permutation seed");
    st_opts.bind<double>(structtest, "--alpha", "alpha", "decision level");

    CLI::App* robust = app.add_subcommand("robust-tau", "marginal-likelihood estimate of the kernel mix tau");
    add_data_flags(robust, rob_data, true);
    rob_opts.flag(robust, "--no-standardize", "standardize", false, "keep the original column scales");
    rob_opts.bind<int>(robust, "--max-iterations", "max_iterations", "optimizer iteration cap per start");

    CLI::App* simulate = app.add_subcommand("simulate", "run a simulation setting and summarize the methods");
    std::string csv_path;
    sim_opts.bind<std::string>(simulate, "--setting", "setting", "I, II, III, IV or perturbed");
    sim_opts.bind<long>(simulate, "--n", "n", "samples");
    sim_opts.bind<long>(simulate, "--p", "p", "variables");
    sim_opts.bind<double>(simulate, "--r2", "r2", "target signal fraction");
    sim_opts.bind<int>(simulate, "--q-variant", "q_variant", "column kernel variant");
    sim_opts.bind<int>(simulate, "--h-variant", "h_variant", "row kernel variant");
    sim_opts.bind<double>(simulate, "--theta", "theta", "truncation of the noise precision (setting IV)");
    sim_opts.bind<double>(simulate, "--delta", "delta", "noise perturbation (perturbed setting)");
    sim_opts.bind<double>(simulate, "--signal-scale", "signal_scale", "fixed signal multiplier instead of r2");
    sim_opts.bind<int>(simulate, "--reps", "reps", "replicates");
    sim_opts.bind<std::uint64_t>(simulate, "--seed", "seed", "base seed");
    sim_opts.list(simulate, "--methods", "methods", "comma-separated methods");
    sim_opts.bind<double>(simulate, "--alpha", "alpha", "per-coefficient level");
    sim_opts.bind<double>(simulate, "--screen-alpha", "screen_alpha", "kernel test level");
    sim_opts.bind<int>(simulate, "--b", "permutations", "permutations per kernel test");
    add_estimator_flags(simulate, sim_opts);
    sim_opts.flag(simulate, "--standardize", "standardize", true, "standardize columns before each fit");
    simulate->add_option("--csv", csv_path, "write per-replicate rows to this CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (threads >= 0) check(gmdk_set_threads(threads));
        ResultHandle result;
        DatasetHandle data;
        if (decompose->parsed()) {
            load(dec_data, data);
            check(gmdk_decompose(data.ptr, dec_opts.json().c_str(), &result.ptr));
        } else if (fit->parsed()) {
            load(fit_data, data);
            check(gmdk_fit(data.ptr, fit_method.c_str(), fit_opts.json().c_str(), &result.ptr));
        } else if (infer->parsed()) {
            load(inf_data, data);
            check(gmdk_infer(data.ptr, inf_opts.json().c_str(), &result.ptr));
        } else if (structtest->parsed()) {
            load(st_data, data);
            const std::string test = st_test == "mirkat" ? "mirkat" : "krv-" + st_kernel;
            check(gmdk_structtest(data.ptr, test.c_str(), st_opts.json().c_str(), &result.ptr));
        } else if (robust->parsed()) {
            load(rob_data, data);
            check(gmdk_robust_tau(data.ptr, rob_opts.json().c_str(), &result.ptr));
        } else if (simulate->parsed()) {
            check(gmdk_simulate(sim_opts.json().c_str(), &result.ptr));
            if (!csv_path.empty()) {
                const char* csv = gmdk_result_csv(result.ptr);
                write_text(csv_path, csv ? csv : "");
            }
        }
        const Json report = Json::parse(gmdk_result_json(result.ptr, -1));
        write_text(out_path, pretty ? render_table(report) : report.dump(2) + "\n");
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const Failure& f) {
        return report_failure(f);
    }
    return kExitOk;
}
