#include "overscale/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "overscale/errors.hpp"

namespace overscale {

RunGeometry resolve_run_geometry(std::int64_t params_n, std::int64_t tokens_d) {
    if (params_n < 1 || tokens_d < 1) {
        fail(ErrorKind::invalid_argument, "params_n and tokens_d must be >= 1");
    }
    const auto n = static_cast<double>(params_n);
    const auto d = static_cast<double>(tokens_d);
    return {6.0 * n * d, d / n};
}

ModelShape shape_from_geometry(double compute_c, double multiplier_m) {
    if (!(compute_c > 0.0) || !(multiplier_m > 0.0) || !std::isfinite(compute_c) ||
        !std::isfinite(multiplier_m)) {
        fail(ErrorKind::invalid_argument, "compute and multiplier must be positive and finite");
    }
    return {std::sqrt(compute_c / (6.0 * multiplier_m)), std::sqrt(compute_c * multiplier_m / 6.0)};
}

double perplexity(double loss) { return std::exp(loss); }

RunGeometry RunRecord::geometry() const { return resolve_run_geometry(params_n, tokens_d); }

double RunRecord::loss(const std::string& eval_set) const {
    auto it = losses.find(eval_set);
    if (it == losses.end()) {
        fail(ErrorKind::validation_error, "run '" + id + "' has no loss for eval set '" + eval_set + "'");
    }
    return it->second;
}

const TaskResult* RunRecord::find_task(const std::string& name) const noexcept {
    auto it = std::find_if(tasks.begin(), tasks.end(),
                           [&](const TaskResult& t) { return t.task.name == name; });
    return it == tasks.end() ? nullptr : &*it;
}

void RunRecord::validate() const {
    if (params_n < 1) {
        fail(ErrorKind::validation_error, "field `params_n` must be >= 1");
    }
    if (tokens_d < 1) {
        fail(ErrorKind::validation_error, "field `tokens_d` must be >= 1");
    }
    for (const auto& [name, value] : losses) {
        if (!std::isfinite(value) || value < 0.0) {
            fail(ErrorKind::validation_error, "field `losses." + name + "` must be finite and >= 0");
        }
    }
    std::set<std::string> seen;
    for (const auto& t : tasks) {
        if (!seen.insert(t.task.name).second) {
            fail(ErrorKind::validation_error, "field `tasks`: duplicate task '" + t.task.name + "'");
        }
        if (!(t.task.baseline >= 0.0 && t.task.baseline < 1.0)) {
            fail(ErrorKind::validation_error, "field `tasks." + t.task.name + ".baseline` must lie in [0, 1)");
        }
        if (!(t.accuracy >= 0.0 && t.accuracy <= 1.0)) {
            fail(ErrorKind::validation_error, "field `tasks." + t.task.name + ".accuracy` must lie in [0, 1]");
        }
        if (t.task.samples && *t.task.samples < 1) {
            fail(ErrorKind::validation_error, "field `tasks." + t.task.name + ".samples` must be positive");
        }
    }
}

namespace budgets {

DatasetBudget c4() { return {"c4", 138'000'000'000ULL}; }
DatasetBudget redpajama() { return {"redpajama", 1'150'000'000'000ULL}; }
DatasetBudget refinedweb() { return {"refinedweb", 600'000'000'000ULL}; }

std::optional<DatasetBudget> by_name(const std::string& name) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    for (auto b : {c4(), redpajama(), refinedweb()}) {
        if (b.dataset == lower) {
            return b;
        }
    }
    return std::nullopt;
}

} // namespace budgets

namespace {

const std::set<std::string>& known_run_keys() {
    static const std::set<std::string> keys{"id", "dataset", "params_n", "tokens_d", "losses", "tasks", "seed"};
    return keys;
}

std::int64_t read_count(const nlohmann::json& j, const char* field) {
    if (!j.contains(field)) {
        fail(ErrorKind::validation_error, std::string("missing field `") + field + "`");
    }
    const auto& v = j.at(field);
    if (v.is_number_integer()) {
        return v.get<std::int64_t>();
    }
    if (v.is_number_float()) {
        // Accept 1.4e9-style numerals as long as they denote an integer.
        double x = v.get<double>();
        if (std::isfinite(x) && std::floor(x) == x && std::abs(x) < 9.2e18) {
            return static_cast<std::int64_t>(x);
        }
    }
    fail(ErrorKind::validation_error, std::string("field `") + field + "` must be an integer");
}

} // namespace

nlohmann::json to_json(const RunRecord& run) {
    nlohmann::json j = run.extra.is_object() ? run.extra : nlohmann::json::object();
    j["id"] = run.id;
    j["dataset"] = run.dataset;
    j["params_n"] = run.params_n;
    j["tokens_d"] = run.tokens_d;
    j["losses"] = nlohmann::json::object();
    for (const auto& [name, value] : run.losses) {
        j["losses"][name] = value;
    }
    j["tasks"] = nlohmann::json::array();
    for (const auto& t : run.tasks) {
        nlohmann::json tj{{"name", t.task.name}, {"baseline", t.task.baseline}, {"accuracy", t.accuracy}};
        if (t.task.samples) {
            tj["samples"] = *t.task.samples;
        }
        j["tasks"].push_back(std::move(tj));
    }
    if (run.seed) {
        j["seed"] = *run.seed;
    }
    return j;
}

RunRecord run_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        fail(ErrorKind::parse_error, "run record must be a JSON object");
    }
    RunRecord run;
    try {
        run.id = j.value("id", std::string{});
        run.dataset = j.value("dataset", std::string{});
        run.params_n = read_count(j, "params_n");
        run.tokens_d = read_count(j, "tokens_d");
        if (j.contains("losses")) {
            const auto& lj = j.at("losses");
            if (!lj.is_object()) {
                fail(ErrorKind::validation_error, "field `losses` must be an object");
            }
            for (const auto& [name, value] : lj.items()) {
                if (!value.is_number()) {
                    fail(ErrorKind::validation_error, "field `losses." + name + "` must be a number");
                }
                run.losses[name] = value.get<double>();
            }
        }
        if (j.contains("tasks")) {
            const auto& tj = j.at("tasks");
            if (!tj.is_array()) {
                fail(ErrorKind::validation_error, "field `tasks` must be an array");
            }
            for (const auto& t : tj) {
                TaskResult r;
                r.task.name = t.at("name").get<std::string>();
                r.task.baseline = t.at("baseline").get<double>();
                r.accuracy = t.at("accuracy").get<double>();
                if (t.contains("samples") && !t.at("samples").is_null()) {
                    r.task.samples = t.at("samples").get<std::int64_t>();
                }
                run.tasks.push_back(std::move(r));
            }
        }
        if (j.contains("seed") && !j.at("seed").is_null()) {
            run.seed = j.at("seed").get<std::int64_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation_error, std::string("field type mismatch: ") + e.what());
    }
    for (const auto& [key, value] : j.items()) {
        if (!known_run_keys().contains(key)) {
            run.extra[key] = value;
        }
    }
    run.validate();
    return run;
}

} // namespace overscale
