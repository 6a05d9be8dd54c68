#include "ksl/schema.hpp"

#include <cmath>

#include "ksl/error.hpp"

namespace ksl {

namespace {

bool is_integral(const Json& v) {
  if (v.is_number_integer()) return true;
  if (!v.is_number_float()) return false;
  double d = v.get<double>();
  return std::isfinite(d) && d == std::floor(d);
}

bool type_matches(const std::string& type, const Json& v) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") return is_integral(v);
  return false;
}

std::string describe(const Json& v) { return v.dump(); }

}  // namespace

std::string pointer_escape(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out += c;
  }
  return out;
}

Schema::Schema(Json root) : root_(std::move(root)) {}

const Json& Schema::resolve(const Json& node) const {
  const Json* cur = &node;
  for (int hops = 0; cur->is_object() && cur->contains("$ref"); ++hops) {
    if (hops > 32) fail(ErrorKind::validation, "schema: $ref cycle");
    const std::string ref = (*cur)["$ref"].get<std::string>();
    if (ref.rfind("#", 0) != 0) fail(ErrorKind::validation, "schema: only local $ref is supported: " + ref);
    cur = &root_.at(Json::json_pointer(ref.substr(1)));
  }
  return *cur;
}

void Schema::check(const Json& raw, const Json& value, const std::string& pointer,
                   std::vector<SchemaError>& out) const {
  // Sibling keywords next to $ref apply together with the referenced schema.
  if (raw.is_object() && raw.contains("$ref")) {
    check(resolve(raw), value, pointer, out);
  }
  if (!raw.is_object()) return;
  const Json& node = raw;

  if (node.contains("type")) {
    const Json& t = node["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = type_matches(t.get<std::string>(), value);
    } else {
      for (const auto& alt : t) ok = ok || type_matches(alt.get<std::string>(), value);
    }
    if (!ok) {
      out.push_back({pointer, "expected type " + t.dump() + ", got " + describe(value)});
      return;
    }
  }
  if (node.contains("enum")) {
    bool ok = false;
    for (const auto& e : node["enum"]) ok = ok || e == value;
    if (!ok) out.push_back({pointer, describe(value) + " is not one of " + node["enum"].dump()});
  }
  if (node.contains("const") && node["const"] != value) {
    out.push_back({pointer, "expected " + node["const"].dump()});
  }
  if (value.is_number()) {
    double x = value.get<double>();
    if (node.contains("minimum") && x < node["minimum"].get<double>())
      out.push_back({pointer, describe(value) + " is below the minimum " + node["minimum"].dump()});
    if (node.contains("maximum") && x > node["maximum"].get<double>())
      out.push_back({pointer, describe(value) + " is above the maximum " + node["maximum"].dump()});
    if (node.contains("exclusiveMinimum") && !(x > node["exclusiveMinimum"].get<double>()))
      out.push_back({pointer, describe(value) + " must be greater than " + node["exclusiveMinimum"].dump()});
    if (node.contains("exclusiveMaximum") && !(x < node["exclusiveMaximum"].get<double>()))
      out.push_back({pointer, describe(value) + " must be less than " + node["exclusiveMaximum"].dump()});
  }
  if (value.is_array()) {
    if (node.contains("minItems") && value.size() < node["minItems"].get<std::size_t>())
      out.push_back({pointer, "needs at least " + node["minItems"].dump() + " items"});
    if (node.contains("maxItems") && value.size() > node["maxItems"].get<std::size_t>())
      out.push_back({pointer, "allows at most " + node["maxItems"].dump() + " items"});
    if (node.contains("items")) {
      for (std::size_t i = 0; i < value.size(); ++i)
        check(node["items"], value[i], pointer + "/" + std::to_string(i), out);
    }
  }
  if (value.is_object()) {
    if (node.contains("required")) {
      for (const auto& key : node["required"]) {
        if (!value.contains(key.get<std::string>()))
          out.push_back({pointer + "/" + pointer_escape(key.get<std::string>()), "required key is missing"});
      }
    }
    const Json* props = node.contains("properties") ? &node["properties"] : nullptr;
    for (auto it = value.begin(); it != value.end(); ++it) {
      const std::string child = pointer + "/" + pointer_escape(it.key());
      if (props && props->contains(it.key())) {
        check((*props)[it.key()], it.value(), child, out);
      } else if (node.contains("additionalProperties")) {
        const Json& extra = node["additionalProperties"];
        if (extra.is_boolean()) {
          if (!extra.get<bool>()) out.push_back({child, "unknown key \"" + it.key() + "\""});
        } else {
          check(extra, it.value(), child, out);
        }
      }
    }
  }
}

std::vector<SchemaError> Schema::validate(const Json& instance) const {
  std::vector<SchemaError> out;
  check(root_, instance, "", out);
  return out;
}

void Schema::fill(const Json& raw, Json& value) const {
  if (!raw.is_object()) return;
  const Json& node = raw.contains("$ref") ? resolve(raw) : raw;
  if (value.is_object() && node.contains("properties")) {
    for (auto it = node["properties"].begin(); it != node["properties"].end(); ++it) {
      const Json& sub = it.value();
      if (!value.contains(it.key())) {
        if (sub.is_object() && sub.contains("default")) {
          value[it.key()] = sub["default"];
        } else {
          continue;
        }
      }
      fill(sub, value[it.key()]);
    }
  }
  if (value.is_array() && node.contains("items")) {
    for (auto& item : value) fill(node["items"], item);
  }
}

Json Schema::apply_defaults(const Json& instance) const {
  Json out = instance;
  fill(root_, out);
  return out;
}

}  // namespace ksl
