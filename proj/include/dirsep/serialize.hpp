// JSON persistence for models, reports and mixing specs, plus the CSV report
// layout. Model files carry a schema tag and record the hemisphere
// normalization convention of the density.
#pragma once

#include <fstream>
#include <json.hpp>
#include <string>

#include "dirsep/em.hpp"
#include "dirsep/errors.hpp"
#include "dirsep/evaluate.hpp"

namespace dirsep {

inline constexpr const char* kModelSchema = "wmdld-model/1";

inline nlohmann::json model_to_json(const WmdldModel& model) {
    nlohmann::json j;
    j["schema"] = kModelSchema;
    j["dimension"] = model.dimension;
    j["mode"] = model.mode == MixtureMode::weighted ? "weighted" : "unweighted";
    j["normalization"] = "hemisphere";
    j["components"] = nlohmann::json::array();
    for (const auto& c : model.components) {
        nlohmann::json cj;
        cj["a"] = c.a;
        cj["m"] = c.params.mean;
        cj["k"] = c.params.concentration;
        cj["k_saturated"] = c.k_saturated;
        j["components"].push_back(cj);
    }
    j["training_log"] = nlohmann::json::array();
    for (const auto& r : model.training_log) {
        nlohmann::json rj;
        rj["iteration"] = r.iteration;
        rj["mean_movement_rad"] = r.max_mean_movement_rad;
        rj["avg_log_density"] = r.avg_log_density;
        rj["reseeded"] = r.reseeded;
        j["training_log"].push_back(rj);
    }
    return j;
}

inline WmdldModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("schema") || j.at("schema").get<std::string>() != kModelSchema)
        throw format_error("model JSON: unknown or missing schema tag");
    WmdldModel model;
    model.dimension = j.at("dimension").get<std::size_t>();
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "weighted")
        model.mode = MixtureMode::weighted;
    else if (mode == "unweighted")
        model.mode = MixtureMode::unweighted;
    else
        throw format_error("model JSON: unknown mode '" + mode + "'");
    for (const auto& cj : j.at("components")) {
        DldComponent c;
        c.a = cj.at("a").get<double>();
        c.params.mean = cj.at("m").get<std::vector<double>>();
        c.params.concentration = cj.at("k").get<double>();
        c.params.dimension = model.dimension;
        c.k_saturated = cj.value("k_saturated", false);
        model.components.push_back(std::move(c));
    }
    if (j.contains("training_log")) {
        for (const auto& rj : j.at("training_log")) {
            TrainingRecord r;
            r.iteration = rj.at("iteration").get<std::size_t>();
            r.max_mean_movement_rad = rj.at("mean_movement_rad").get<double>();
            r.avg_log_density = rj.at("avg_log_density").get<double>();
            r.reseeded = rj.value("reseeded", std::vector<std::size_t>{});
            model.training_log.push_back(std::move(r));
        }
    }
    model.validate();
    return model;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw io_error("cannot open for writing: " + path);
    os << j.dump(2) << "\n";
    if (!os) throw io_error("short write: " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open for reading: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error("JSON parse error in " + path + ": " + e.what());
    }
    return j;
}

inline void save_model(const WmdldModel& model, const std::string& path) {
    write_json_file(model_to_json(model), path);
}

inline WmdldModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

inline nlohmann::json report_to_json(const SeparationReport& report) {
    nlohmann::json j;
    j["per_source"] = nlohmann::json::array();
    for (const auto& m : report.per_source)
        j["per_source"].push_back({{"sdr", m.sdr}, {"sir", m.sir}, {"sar", m.sar}});
    j["permutation"] = report.permutation;  // estimate index -> reference index, 0-based
    j["averages"] = {{"sdr", report.averages.sdr}, {"sir", report.averages.sir}, {"sar", report.averages.sar}};
    return j;
}

inline void write_report_csv(const SeparationReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw io_error("cannot open for writing: " + path);
    os << "source,reference,sdr_db,sir_db,sar_db\n";
    os.precision(10);
    for (std::size_t i = 0; i < report.per_source.size(); ++i) {
        const SourceMetrics& m = report.per_source[i];
        os << (i + 1) << "," << (report.permutation[i] + 1) << "," << m.sdr << "," << m.sir << ","
           << m.sar << "\n";
    }
    os << "average,," << report.averages.sdr << "," << report.averages.sir << ","
       << report.averages.sar << "\n";
    if (!os) throw io_error("short write: " + path);
}

inline nlohmann::json mixing_to_json(const MixingSpec& spec) {
    nlohmann::json j;
    j["sensors"] = spec.sensors;
    j["sources"] = spec.sources;
    j["angles_deg"] = spec.angles_deg;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < spec.sensors; ++k) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t l = 0; l < spec.sources; ++l) row.push_back(spec.at(k, l));
        rows.push_back(row);
    }
    j["matrix"] = rows;
    j["warnings"] = spec.warnings;
    return j;
}

}  // namespace dirsep
