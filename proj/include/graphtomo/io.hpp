#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "graphtomo/model.hpp"
#include "graphtomo/qmetro.hpp"
#include "graphtomo/recon_single.hpp"
#include "graphtomo/stability.hpp"

namespace graphtomo {

using Json = nlohmann::ordered_json;

// Complex numbers are written as [re, im]; plain numbers are read as real.
Json complex_to_json(Complex z);
Complex complex_from_json(const Json& j, const std::string& field);

Json graph_to_json(const LatticeGraph& g);
// Either {"n", "edges", "boundary"} or {"lattice", "dims", "boundary"}.
LatticeGraph graph_from_json(const Json& j);

Json model_to_json(const HubbardParams& p);
// A model with explicit values, or {"family": {...}} for a generated SSH model.
HubbardParams model_from_json(const Json& j);

Json spectral_to_json(const SpectralData& d, const LatticeGraph& g);
SpectralData spectral_from_json(const Json& j);

Json gauge_report_to_json(const GaugeReport& r);
Json budget_to_json(const NoonBudget& b);
Json fit_to_json(const LinearFit& f);

Json read_json(const std::filesystem::path& path);

// FNV-1a, 64 bit.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);
std::string config_hash(const Json& config);

// Refuses to replace an existing file unless `force`.
void write_text(const std::filesystem::path& path, const std::string& text, bool force);

// Tidy CSV with a leading "# config_hash=..., seed=..." comment line.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  std::string render(const std::string& hash, std::uint64_t seed) const;
};

std::string fmt(double v);  // shortest round-trip representation

Json manifest(const std::string& command, const Json& config, std::uint64_t seed,
              const std::vector<std::string>& files);

}  // namespace graphtomo
