#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "histocell/experiments.hpp"

namespace histocell {

/// Synthetic dataset with a known embedding-to-abundance map:
/// embeddings z ~ N(0, I), abundances max(0, softplus(G z + h) + sigma * noise),
/// with G and h drawn once and shared across patients.
struct SyntheticSpec {
  std::size_t n_patients = 3;
  std::size_t spots_per_patient = 200;
  std::size_t samples_per_patient = 1;
  std::size_t dim = 16;
  std::size_t cell_types = 5;
  double noise_sigma = 0.0;
  std::uint64_t seed = 7;
  double grid_pitch = 100.0;  // pixels between neighbouring spots
};

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

double softplus(double z);

Dataset generate_synthetic(const SyntheticSpec& spec);

/// Writes spots.csv and abundances.csv into `dir` and returns their paths.
DatasetPaths write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace histocell
