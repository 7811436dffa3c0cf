#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "gmdkit/estimators.hpp"
#include "gmdkit/inference.hpp"
#include "gmdkit/robust.hpp"
#include "gmdkit/simulate.hpp"
#include "gmdkit/structure_tests.hpp"

namespace gmdkit {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::json;

Json to_json(const Vector& v);
Json to_json(const Matrix& m);  // array of rows

// Every report carries {"schema": "gmdkit.<kind>", "schema_version", "config"}.
Json report_envelope(const std::string& kind, const Json& config);

Json decompose_report(const GmdFactors& factors, const Json& config);

struct FitExtras {
    std::optional<ComponentSelection> selection;
    std::optional<KprCvResult> cv;
    std::optional<double> rmse;
    Vector scales;
};
Json fit_report(const GmdEstimate& est, const FitExtras& extras, const Json& config);

// q-values are Benjamini-Yekutieli adjusted and included when `fdr` is set.
Json inference_report(const InferenceReport& rep, std::optional<double> fdr, const Json& config,
                      const std::optional<RobustWeights>& robust = std::nullopt);

Json kernel_test_report(const std::string& test, const KernelTestResult& res, double alpha, const Json& config);

Json robust_report(const RobustWeights& w, const Json& config);

Json simulation_report(const SimulationReport& rep, const Json& config);

// Per-replicate rows: replicate,method,type1,power,rmse,p_value,tau_hat.
std::string simulation_csv(const SimulationReport& rep);

std::string estimator_name(Estimator e);

}  // namespace gmdkit
