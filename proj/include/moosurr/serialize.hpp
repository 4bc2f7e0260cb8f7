#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "moosurr/mlp.hpp"
#include "moosurr/surrogate.hpp"
#include "moosurr/trainers.hpp"

namespace moosurr {

inline constexpr int kCheckpointVersion = 1;

/// Checkpoint: architecture plus the flattened parameter vector.
///
///     {"format": "moosurr.mlp", "version": 1,
///      "output_kind": "binary-probability",
///      "layers": [{"inputs": 8, "outputs": 16, "activation": "relu"}, ...],
///      "parameters": [...]}
std::string mlp_to_json(const Mlp& model);
Mlp mlp_from_json(const std::string& text);

/// {"format": "moosurr.surrogate", "version": 1, "bias": b,
///  "features": [{"name": ..., "coefficient": ...}, ...]}
std::string surrogate_to_json(const LinearSurrogate& g, std::span<const std::string> names);
LinearSurrogate surrogate_from_json(const std::string& text,
                                    std::vector<std::string>* names = nullptr);

/// One "name<TAB>coefficient<TAB>rank" line per feature, ranked, then "(bias)<TAB>b".
std::string importance_to_text(const FeatureImportance& importance, double bias);

std::string report_to_json(const TrainReport& report);
TrainReport report_from_json(const std::string& text);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace moosurr
