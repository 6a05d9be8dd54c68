#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ksl/commands.hpp"
#include "ksl/io.hpp"
#include "test_support.hpp"

using namespace ksl;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(KSL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string validation_message(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
    return e.what();
  }
  FAIL("expected a validation error");
  return {};
}

std::string example(const std::string& name) { return std::string(KSL_SOURCE_DIR) + "/configs/examples/" + name; }

// Small dataset file plus a config pointing at it.
fs::path write_problem(const fs::path& dir) {
  std::mt19937_64 gen(5);
  const MatrixXd X = ksl::test::random_matrix(30, 3, gen);
  save_dataset((dir / "data.csv").string(), make_dataset(X, X.col(0).array().sin().matrix()), DataFormat::csv);
  const Json cfg{{"seed", 2},
                 {"dataset", {{"path", (dir / "data.csv").string()}}},
                 {"kernel", {{"family", "rbf"}, {"bandwidth", 1.0}}},
                 {"regression", {{"lambda", 1e-3}, {"noise", 0.01}}},
                 {"theory", {{"P_grid", {1, 2, 5, 10, 20}}}},
                 {"empirical", {{"P_grid", {1, 2, 5, 10}}, {"trials", 20}}}};
  write_file_atomic((dir / "config.json").string(), cfg.dump(2));
  return dir / "config.json";
}

}  // namespace

TEST_CASE("misspelled top-level key is reported at its pointer") {
  const std::string msg = validation_message(R"({"kernal": {"family": "rbf"}})");
  CHECK(msg.find("/kernal") != std::string::npos);
}

TEST_CASE("schema errors name the nested pointer") {
  CHECK(validation_message(R"({"theory": {"P_grid": [1, -2]}})").find("/theory/P_grid/1") != std::string::npos);
  CHECK(validation_message(R"({"kernel": {"family": "cosine"}})").find("/kernel/family") != std::string::npos);
  CHECK(validation_message(R"({"regression": {"lambda": "big"}})").find("/regression/lambda") != std::string::npos);
  CHECK(validation_message(R"({"theory": {}})").find("/theory") != std::string::npos);
}

TEST_CASE("minimal config gets the documented defaults") {
  const RunConfig c = parse_config_text(R"({"kernel": {"family": "linear"}, "optimizer": {}})");
  CHECK(c.seed() == 0);
  CHECK(c.json.at("regression").at("lambda").get<double>() == 0.0);
  CHECK(c.json.at("regression").at("noise").get<double>() == 0.0);
  const Json& o = c.json.at("optimizer");
  CHECK(o.at("learning_rate").get<double>() == 1.0);
  CHECK(o.at("steps").get<int>() == 2000);
  CHECK(o.at("mode").get<std::string>() == "descent");
  CHECK(o.at("fd_step").get<double>() == 1e-5);
  CHECK(o.at("convergence_tol").get<double>() == 1e-6);
  CHECK(o.at("max_halvings").get<int>() == 20);
  CHECK(o.at("backtracking").get<bool>());
}

TEST_CASE("materialized config re-parses to an equal config") {
  for (const char* name : {"theory_curve.json", "optimize_train.json", "closed_form_sphere.json", "spectrum.json"}) {
    const RunConfig a = parse_config(example(name));
    const RunConfig b = parse_config_text(dump_config(a));
    CHECK(a == b);
    CHECK(config_hash(a) == config_hash(b));
    CHECK(dump_config(a) == dump_config(b));
  }
}

TEST_CASE("typed views reject family-specific gaps") {
  CHECK(ksl::test::error_kind_of([] { kernel_from_json(Json{{"family", "rbf"}}); }) == ErrorKind::validation);
  const RunConfig c = parse_config_text(R"({"synthetic": {"family": "sphere", "points": 4, "beta": [1, 0]}})");
  try {
    dataset_from_config(c);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("/synthetic/dimension") != std::string::npos);
  }
}

TEST_CASE("exit codes by error kind") {
  CHECK(exit_code_for(ErrorKind::validation) == 2);
  CHECK(exit_code_for(ErrorKind::parse) == 2);
  CHECK(exit_code_for(ErrorKind::domain) == 2);
  CHECK(exit_code_for(ErrorKind::numerical) == 3);
  CHECK(exit_code_for(ErrorKind::io) == 4);
}

TEST_CASE("theory curve from a cached decomposition") {
  const fs::path dir = ksl::test::temp_dir("cli_cache");
  const fs::path cfg = write_problem(dir);
  const fs::path cache = dir / "cache";
  REQUIRE(run_cli("decompose --config " + cfg.string() + " --out " + (dir / "dec").string() + " --cache " +
                      cache.string(),
                  dir / "log1") == 0);
  std::size_t cached = 0;
  for (const auto& e : fs::directory_iterator(cache)) cached += e.path().extension() == ".ksld";
  CHECK(cached == 1);
  REQUIRE(run_cli("theory-curve --config " + cfg.string() + " --out " + (dir / "th").string() + " --cache " +
                      cache.string(),
                  dir / "log2") == 0);
  const CsvTable t = read_csv_numeric((dir / "th" / "theory.csv").string());
  CHECK(t.header == theory_columns());
  CHECK(t.rows.size() == 5);
  // the cached and the fresh decomposition give the same bytes
  REQUIRE(run_cli("theory-curve --config " + cfg.string() + " --out " + (dir / "th2").string(), dir / "log3") == 0);
  CHECK(read_file((dir / "th" / "theory.csv").string()) == read_file((dir / "th2" / "theory.csv").string()));
  CHECK(fs::exists(dir / "th" / "config.json"));
  CHECK(fs::exists(dir / "th" / "manifest.json"));
}

TEST_CASE("compare with mismatched grids is a validation failure") {
  const fs::path dir = ksl::test::temp_dir("cli_compare");
  const fs::path cfg = write_problem(dir);
  REQUIRE(run_cli("theory-curve --config " + cfg.string() + " --out " + (dir / "th").string(), dir / "l1") == 0);
  REQUIRE(run_cli("empirical-curve --config " + cfg.string() + " --out " + (dir / "em").string(), dir / "l2") == 0);
  const Json cmp{{"compare", {{"theory", (dir / "th" / "theory.csv").string()},
                              {"empirical", (dir / "em" / "empirical.csv").string()}}}};
  write_file_atomic((dir / "cmp.json").string(), cmp.dump());
  CHECK(run_cli("compare --config " + (dir / "cmp.json").string() + " --out " + (dir / "c").string(), dir / "l3") ==
        exit_validation);
  CHECK(read_file((dir / "l3").string()).find("P grids differ") != std::string::npos);
}

TEST_CASE("compare report on matching grids") {
  const fs::path dir = ksl::test::temp_dir("cli_compare_ok");
  const fs::path cfg = write_problem(dir);
  Json j = Json::parse(read_file(cfg.string()));
  j["theory"]["P_grid"] = {1, 2, 5, 10};
  write_file_atomic(cfg.string(), j.dump());
  REQUIRE(run_cli("theory-curve --config " + cfg.string() + " --out " + (dir / "th").string(), dir / "l1") == 0);
  REQUIRE(run_cli("empirical-curve --config " + cfg.string() + " --out " + (dir / "em").string(), dir / "l2") == 0);
  const Json cmp{{"compare", {{"theory", (dir / "th" / "theory.csv").string()},
                              {"empirical", (dir / "em" / "empirical.csv").string()}}}};
  write_file_atomic((dir / "cmp.json").string(), cmp.dump());
  REQUIRE(run_cli("compare --config " + (dir / "cmp.json").string() + " --out " + (dir / "c").string(), dir / "l3") ==
          0);
  const Json rep = Json::parse(read_file((dir / "c" / "compare.json").string()));
  CHECK(rep.contains("rows"));
  CHECK(rep["rows"].size() == 4);
}

TEST_CASE("command line failures map to exit codes") {
  const fs::path dir = ksl::test::temp_dir("cli_codes");
  write_file_atomic((dir / "bad.json").string(), R"({"kernal": {}})");
  CHECK(run_cli("decompose --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string(), dir / "l1") ==
        exit_validation);
  CHECK(read_file((dir / "l1").string()).find("/kernal") != std::string::npos);
  write_file_atomic((dir / "broken.json").string(), "{\"seed\": ");
  CHECK(run_cli("decompose --config " + (dir / "broken.json").string(), dir / "l2") == exit_validation);
  CHECK(run_cli("decompose --config " + (dir / "missing.json").string(), dir / "l3") == exit_validation);
  CHECK(run_cli("frobnicate", dir / "l4") == exit_validation);
  CHECK(run_cli("reproduce figXYZ", dir / "l5") == exit_validation);

  // a dataset path that does not exist is an io failure
  const Json missing{{"dataset", {{"path", (dir / "nowhere.csv").string()}}}, {"kernel", {{"family", "linear"}}}};
  write_file_atomic((dir / "nodata.json").string(), missing.dump());
  CHECK(run_cli("decompose --config " + (dir / "nodata.json").string() + " --out " + (dir / "o2").string(),
                dir / "l6") == exit_io);

  // ridgeless fit exactly at the interpolation threshold diverges with label noise
  const Json div{{"synthetic", {{"family", "gaussian_diag"}, {"variances", {1, 1}}, {"points", 2}, {"beta", {1, 1}}}},
                 {"kernel", {{"family", "linear"}}},
                 {"regression", {{"lambda", 0}, {"noise", 0.1}}},
                 {"optimizer", {{"P_budget", 2}, {"steps", 2}}}};
  write_file_atomic((dir / "div.json").string(), div.dump());
  CHECK(run_cli("optimize-test --config " + (dir / "div.json").string() + " --out " + (dir / "o3").string(),
                dir / "l7") == exit_numerical);
}

TEST_CASE("every example config runs") {
  const fs::path dir = ksl::test::temp_dir("cli_examples");
  const std::vector<std::pair<std::string, std::string>> runs{
      {"decompose", "decompose.json"},           {"theory-curve", "theory_curve.json"},
      {"empirical-curve", "empirical_curve.json"}, {"optimize-train", "optimize_train.json"},
      {"optimize-test", "optimize_test.json"},   {"gradcheck", "gradcheck.json"},
      {"closed-form", "closed_form_diagonal.json"}, {"closed-form", "closed_form_sphere.json"},
      {"spectrum", "spectrum.json"}};
  for (const auto& [cmd, file] : runs) {
    INFO(cmd << " " << file);
    const fs::path out = dir / file;
    CHECK(run_cli(cmd + " --config " + example(file) + " --out " + out.string(), dir / "log") == 0);
    const Json manifest = Json::parse(read_file((out / "manifest.json").string()));
    CHECK(manifest.at("command") == cmd);
    CHECK(manifest.at("config_sha256").get<std::string>().size() == 64);
    // provenance: the directory holds the exact materialized config
    CHECK(read_file((out / "config.json").string()) ==
          dump_config(parse_config_text(read_file((out / "config.json").string()))));
  }
}

TEST_CASE("seed flag overrides the config seed") {
  const fs::path dir = ksl::test::temp_dir("cli_seed");
  REQUIRE(run_cli("empirical-curve --config " + example("empirical_curve.json") + " --out " + (dir / "a").string(),
                  dir / "l") == 0);
  REQUIRE(run_cli("empirical-curve --config " + example("empirical_curve.json") + " --seed 99 --out " +
                      (dir / "b").string(),
                  dir / "l") == 0);
  CHECK(Json::parse(read_file((dir / "b" / "config.json").string()))["seed"] == 99);
  CHECK(read_file((dir / "a" / "empirical.csv").string()) != read_file((dir / "b" / "empirical.csv").string()));
}
