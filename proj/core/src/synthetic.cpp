#include "histocell/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "histocell/errors.hpp"
#include "json_fields.hpp"

namespace histocell {

nlohmann::json to_json(const SyntheticSpec& spec) {
  return {{"n_patients", spec.n_patients},
          {"spots_per_patient", spec.spots_per_patient},
          {"samples_per_patient", spec.samples_per_patient},
          {"dim", spec.dim},
          {"cell_types", spec.cell_types},
          {"noise_sigma", spec.noise_sigma},
          {"seed", spec.seed},
          {"grid_pitch", spec.grid_pitch}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec spec;
  detail::ObjectReader r(j, "synth");
  r.get("n_patients", spec.n_patients);
  r.get("spots_per_patient", spec.spots_per_patient);
  r.get("samples_per_patient", spec.samples_per_patient);
  r.get("dim", spec.dim);
  r.get("cell_types", spec.cell_types);
  r.get("noise_sigma", spec.noise_sigma);
  r.get("seed", spec.seed);
  r.get("grid_pitch", spec.grid_pitch);
  r.finish();
  return spec;
}

double softplus(double z) {
  // log(1 + e^z) without overflow for large z.
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

namespace {

void check(const SyntheticSpec& s) {
  if (s.n_patients == 0 || s.samples_per_patient == 0 || s.dim == 0)
    throw ConfigError("synth: n_patients, samples_per_patient and dim must be positive");
  if (s.spots_per_patient < 2 * s.samples_per_patient)
    throw ConfigError("synth: spots_per_patient must give every sample at least 2 spots");
  if (s.cell_types < 2) throw ConfigError("synth: need at least 2 cell types");
  if (!(s.noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be >= 0");
  if (!(s.grid_pitch > 0.0)) throw ConfigError("synth: grid_pitch must be > 0");
}

std::string numbered(const char* prefix, std::size_t k, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, k);
  return buf;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  check(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);

  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto c = static_cast<Eigen::Index>(spec.cell_types);
  // Shared map: rows of G have unit expected norm so G z ~ N(0, 1) per type.
  Matrix g(c, d);
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index k = 0; k < d; ++k) g(i, k) = normal(rng) / std::sqrt(static_cast<double>(spec.dim));
  Eigen::VectorXd h(c);
  for (Eigen::Index i = 0; i < c; ++i) h(i) = 0.5 * normal(rng);

  const std::size_t n = spec.n_patients * spec.spots_per_patient;
  Dataset data;
  auto& spots = data.spots;
  auto& ab = data.abundances;
  spots.embeddings.resize(static_cast<Eigen::Index>(n), d);
  ab.values.resize(static_cast<Eigen::Index>(n), c);
  for (std::size_t t = 0; t < spec.cell_types; ++t) ab.cell_types.push_back(numbered("ct", t, 2));

  std::size_t row = 0;
  for (std::size_t p = 0; p < spec.n_patients; ++p) {
    const auto patient = numbered("P", p, 2);
    for (std::size_t s = 0; s < spec.samples_per_patient; ++s) {
      const auto sample = patient + "_" + numbered("S", s, 1);
      // Spots split as evenly as possible across the patient's samples.
      const std::size_t count = spec.spots_per_patient / spec.samples_per_patient +
                                (s < spec.spots_per_patient % spec.samples_per_patient ? 1 : 0);
      const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
      for (std::size_t k = 0; k < count; ++k, ++row) {
        const auto r = static_cast<Eigen::Index>(row);
        spots.spot_ids.push_back(sample + "_" + numbered("", k, 4));
        spots.sample_ids.push_back(sample);
        spots.patient_ids.push_back(patient);
        spots.x.push_back(spec.grid_pitch * (static_cast<double>(k % side) + 1.0 + jitter(rng)));
        spots.y.push_back(spec.grid_pitch * (static_cast<double>(k / side) + 1.0 + jitter(rng)));
        for (Eigen::Index k2 = 0; k2 < d; ++k2) spots.embeddings(r, k2) = normal(rng);
        const Eigen::VectorXd link = g * spots.embeddings.row(r).transpose() + h;
        for (Eigen::Index i = 0; i < c; ++i) {
          const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * normal(rng) : 0.0;
          ab.values(r, i) = std::max(0.0, softplus(link(i)) + noise);
        }
      }
    }
  }
  ab.spot_ids = spots.spot_ids;
  return data;
}

DatasetPaths write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  const auto data = generate_synthetic(spec);
  DatasetPaths paths;
  paths.spots = dir / "spots.csv";
  paths.abundances = dir / "abundances.csv";
  save_spot_table(data.spots, paths.spots);
  save_abundance_table(data.abundances, paths.abundances);
  return paths;
}

}  // namespace histocell
