#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gmsynth/envelope.hpp"
#include "gmsynth/epsd.hpp"
#include "gmsynth/pipeline.hpp"
#include "gmsynth/response.hpp"
#include "gmsynth/spectral.hpp"
#include "gmsynth/uq.hpp"

namespace gmsynth {

std::string envelope_to_json(const EnvelopeParams& p);
EnvelopeParams envelope_from_json(const std::string& text);

std::string spectral_model_to_json(const SpectralModel& m);
SpectralModel spectral_model_from_json(const std::string& text);

std::string fitted_model_to_json(const FittedModel& m);
FittedModel fitted_model_from_json(const std::string& text);

std::string marginal_to_json(const MarginalModel& m);
MarginalModel marginal_from_json(const std::string& text);

std::string joint_model_to_json(const JointModel& m);
JointModel joint_model_from_json(const std::string& text);

std::string config_to_json(const PipelineConfig& c);
/// Missing keys keep their defaults; "seed" and "schema_version" are required.
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Long format t,omega,S.
std::string epsd_to_csv(const EpsdGrid& e);

/// Long format record_id,period,sa for several spectra.
std::string spectra_to_csv(const std::vector<std::string>& ids, const std::vector<SpectrumResult>& s);

/// Simple comma separated table with a header row.
std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

/// One line-delimited JSON event on stderr.
void log_event(const std::string& event, const std::map<std::string, std::string>& fields = {},
               const std::string& level = "info");

}  // namespace gmsynth
