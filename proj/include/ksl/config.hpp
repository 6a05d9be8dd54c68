#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ksl/closedform.hpp"
#include "ksl/empirical.hpp"
#include "ksl/kernels.hpp"
#include "ksl/measures.hpp"
#include "ksl/optimizer.hpp"
#include "ksl/schema.hpp"

namespace ksl {

// A validated run configuration. `json` holds the materialized document
// (every schema default filled in); the typed views below are derived from
// it, so two configs are equal exactly when their documents are.
struct RunConfig {
  Json json;

  std::uint64_t seed() const;
  std::string command() const;
  bool has(const char* section) const { return json.contains(section); }
  // Section by name; a validation error naming "/<section>" when absent.
  const Json& section(const char* name) const;

  bool operator==(const RunConfig& other) const { return json == other.json; }
};

const Schema& config_schema();
const std::string& config_schema_text();

// Parses JSON text, validates it and fills defaults. Schema violations throw
// a validation error whose message starts with the offending JSON pointer.
RunConfig parse_config_text(const std::string& text, const std::string& source = "config");
RunConfig parse_config(const std::string& path);
RunConfig materialize(const Json& raw, const std::string& source = "config");

// Canonical text (two-space indent, trailing newline) and its SHA-256.
std::string dump_config(const RunConfig& config);
std::string config_hash(const RunConfig& config);

// Typed views. Each checks the family-specific fields the schema leaves
// optional and reports problems against the JSON pointer of the block.
KernelSpec kernel_from_json(const Json& j, const std::string& pointer = "/kernel");
DiscreteMeasure measure_from_json(const Json& j, const Dataset& data, const std::string& pointer);
Dataset dataset_from_config(const RunConfig& config);
OptimizerConfig optimizer_from_config(const RunConfig& config);
ExperimentConfig experiment_from_config(const RunConfig& config);
std::vector<double> theory_grid(const RunConfig& config);
double config_lambda(const RunConfig& config);
double config_noise(const RunConfig& config);

// Measures written by the optimizers: {"id": mass, ...} over dataset ids.
std::string measure_to_json(const DiscreteMeasure& measure, const Dataset& data);
DiscreteMeasure measure_from_file(const std::string& path, const Dataset& data);

// Reads integers that may have been written as integral floats.
std::int64_t json_int(const Json& j);
std::vector<double> json_doubles(const Json& j);
VectorXd json_vector(const Json& j);

}  // namespace ksl
