#pragma once

// Run records and the arithmetic tying model geometry (N, D) to compute and
// token multiplier.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace overscale {

/// Downstream task identity. `baseline` is random-chance accuracy.
struct TaskSpec {
    std::string name;
    double baseline = 0.0;
    std::optional<std::int64_t> samples;

    bool operator==(const TaskSpec&) const = default;
};

struct TaskResult {
    TaskSpec task;
    double accuracy = 0.0;

    double top1_error() const noexcept { return 1.0 - accuracy; }

    bool operator==(const TaskResult&) const = default;
};

/// Compute C = 6ND and token multiplier M = D/N of one run.
struct RunGeometry {
    double compute_c = 0.0;
    double multiplier_m = 0.0;
};

/// Inverse of the geometry map: N = sqrt(C / 6M), D = sqrt(CM / 6).
struct ModelShape {
    double params_n = 0.0;
    double tokens_d = 0.0;
};

/// One trained model: geometry, per-eval-set losses (nats/token), and
/// per-task downstream accuracies. Keys not understood on ingest are kept in
/// `extra` and written back unchanged.
struct RunRecord {
    std::string id;
    std::string dataset;
    std::int64_t params_n = 1;
    std::int64_t tokens_d = 1;
    std::map<std::string, double> losses;
    std::vector<TaskResult> tasks;
    std::optional<std::int64_t> seed;
    nlohmann::json extra = nlohmann::json::object();

    RunGeometry geometry() const;

    /// Loss on `eval_set`; validation error naming the run if absent.
    double loss(const std::string& eval_set) const;

    /// Task result by name, or nullptr.
    const TaskResult* find_task(const std::string& name) const noexcept;

    /// Throws validation_error naming the offending field.
    void validate() const;

    bool operator==(const RunRecord&) const = default;
};

struct DatasetBudget {
    std::string dataset;
    std::uint64_t token_budget = 0;
};

RunGeometry resolve_run_geometry(std::int64_t params_n, std::int64_t tokens_d);

ModelShape shape_from_geometry(double compute_c, double multiplier_m);

double perplexity(double loss);

/// Single-epoch token budgets of the three reference training corpora.
namespace budgets {
DatasetBudget c4();
DatasetBudget redpajama();
DatasetBudget refinedweb();
/// Lookup by case-insensitive name; nullopt if unknown.
std::optional<DatasetBudget> by_name(const std::string& name);
} // namespace budgets

nlohmann::json to_json(const RunRecord& run);
RunRecord run_from_json(const nlohmann::json& j);

} // namespace overscale
