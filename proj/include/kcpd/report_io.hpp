#pragma once

#include <ostream>
#include <string>

#include "json.hpp"
#include "kcpd/metrics.hpp"
#include "kcpd/segmentation.hpp"
#include "kcpd/simulate.hpp"

namespace kcpd {

// JSON encodings of the public result types. Non-finite reals (for example
// the location error of an empty estimate) are written as null.

void to_json(nlohmann::json& j, const KernelSpec& spec);
void to_json(nlohmann::json& j, const Segmentation& seg);
void to_json(nlohmann::json& j, const SegmentationResult& result);
void to_json(nlohmann::json& j, const MetricReport& report);
void to_json(nlohmann::json& j, const SimConfig& config);
void to_json(nlohmann::json& j, const ExperimentConfig& config);
void to_json(nlohmann::json& j, const ReplicateRecord& record);
void to_json(nlohmann::json& j, const Summary& summary);
void to_json(nlohmann::json& j, const TAggregate& aggregate);
void to_json(nlohmann::json& j, const ExperimentReport& report);
void to_json(nlohmann::json& j, const ConcentrationConfig& config);
void to_json(nlohmann::json& j, const ConcentrationReport& report);
void to_json(nlohmann::json& j, const SweepTable& table);

/// Shortest round-trip decimal form; "inf"/"nan" for non-finite values.
std::string format_real(double value);

/// One row per replicate record.
void write_records_csv(std::ostream& out, const ExperimentReport& report);
/// One row per grid value, with a "# monotone: true|false" footer.
void write_sweep_csv(std::ostream& out, const SweepTable& table);
/// One row per x grid point.
void write_concentration_csv(std::ostream& out, const ConcentrationReport& report);

}  // namespace kcpd
