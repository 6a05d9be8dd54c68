#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace ksl {

using Json = nlohmann::ordered_json;

struct SchemaError {
  std::string pointer;  // JSON pointer into the instance, "" for the root
  std::string message;
};

// Validator for the subset of JSON Schema the config schema uses: local
// $ref, type, enum, const, properties, required, additionalProperties,
// items, minItems, maxItems, minimum, maximum, exclusiveMinimum,
// exclusiveMaximum. Other keywords are ignored.
class Schema {
 public:
  explicit Schema(Json root);

  std::vector<SchemaError> validate(const Json& instance) const;

  // Copy of instance with every absent property that declares a default
  // filled in, recursively. Only meaningful for valid instances.
  Json apply_defaults(const Json& instance) const;

 private:
  const Json& resolve(const Json& node) const;
  void check(const Json& node, const Json& value, const std::string& pointer, std::vector<SchemaError>& out) const;
  void fill(const Json& node, Json& value) const;

  Json root_;
};

std::string pointer_escape(const std::string& key);

}  // namespace ksl
