#include <doctest.h>

#include "helpers.hpp"
#include "rainfuse/config.hpp"

using namespace rainfuse;
using testutil::TempDir;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_config(text, "run.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parsing sections, comments and dotted keys") {
  const RunConfig c = parse_config(
      "# demo\n[grid]\nnx = 8   # columns\nny=6\nT = 2\n\n[sampler]\nn_iter = 400\nburn_in = 200\n"
      "adapt_end = 200\nseed = 77\nmodel.preset = model2\n[holdout]\nfraction = 0.1\n");
  CHECK(c.grid.nx == 8);
  CHECK(c.grid.ny == 6);
  CHECK(c.T == 2);
  CHECK(c.sampler.n_iter == 400);
  CHECK(c.sampler.seed == 77u);
  CHECK(c.preset == "model2");
  CHECK_FALSE(c.model().bias_spatial);
  CHECK(c.model().shift_spatial);
  CHECK(c.holdout.fraction == 0.1);
}

TEST_CASE("errors carry the line number") {
  CHECK(message_of("[grid]\nnx = 5\nnxx = 4\n").find("run.cfg:3") != std::string::npos);
  CHECK(message_of("[grid]\nnx = 5\nnxx = 4\n").find("nxx") != std::string::npos);
  CHECK(message_of("[gird]\n").find("run.cfg:1") != std::string::npos);
  CHECK(message_of("[grid]\nnx = 5\nnx = 6\n").find("duplicate") != std::string::npos);
  CHECK(message_of("[grid]\nnx = five\n").find("grid.nx") != std::string::npos);
  CHECK(message_of("nx = 5\n").find("outside any section") != std::string::npos);
  CHECK(message_of("[grid]\nnx\n").find("key = value") != std::string::npos);
  CHECK(message_of("[model]\nscreen_gages = maybe\n").find("true or false") != std::string::npos);
}

TEST_CASE("validation names the field") {
  RunConfig c = parse_config("[grid]\nnx = 1\n");
  try {
    validate(c, Command::kSimulate);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("nx") != std::string::npos);
  }
  c = parse_config("[sampler]\nn_iter = 100\nburn_in = 100\n");
  CHECK_THROWS_WITH_AS(validate(c, Command::kSimulate), doctest::Contains("burn_in"), ConfigError);
  c = parse_config("[holdout]\nfraction = 1.5\n");
  CHECK_THROWS_WITH_AS(validate(c, Command::kSimulate), doctest::Contains("holdout.fraction"), ConfigError);
  CHECK(message_of("[model]\npreset = model9\n").find("model.preset") != std::string::npos);
  c = parse_config("[model]\nc2_rate = 0\n");
  CHECK_THROWS_WITH_AS(validate(c, Command::kSimulate), doctest::Contains("model.c2_rate"), ConfigError);
}

TEST_CASE("input files are checked before anything runs") {
  TempDir d("cfg");
  testutil::write_text(d / "run.cfg", "[paths]\ndata_dir = data\noutput_dir = out\n");
  const RunConfig c = load_config(d / "run.cfg");
  CHECK(c.base_dir == d.path());
  CHECK(c.gage_path() == d / "data" / "gage.csv");
  CHECK(c.trace_path() == d / "out" / "trace.csv");
  CHECK_THROWS_WITH_AS(validate(c, Command::kFit), doctest::Contains("paths.gage"), ConfigError);
  CHECK_NOTHROW(validate(c, Command::kSimulate));
  CHECK_FALSE(std::filesystem::exists(d / "out"));
  CHECK_THROWS_AS(load_config(d / "missing.cfg"), ConfigError);
}

TEST_CASE("overrides") {
  RunConfig c = parse_config("[sampler]\nseed = 3\n[simulate]\nseed = 4\n[holdout]\nseed = 5\n");
  c.override_seed(99);
  CHECK(c.sampler.seed == 99u);
  CHECK(c.simulate.seed == 99u);
  CHECK(c.holdout.seed == 99u);
  c.override_preset("model5");
  CHECK(c.model().bias_k() == 5);
  CHECK_THROWS_AS(c.override_preset("model0"), ConfigError);
  c.set("sampler.thin", "7");
  CHECK(c.sampler.thin == 7);
  CHECK_THROWS_AS(c.set("sampler.nope", "1"), ConfigError);
}

TEST_CASE("explicit model flags refine the preset") {
  const RunConfig c = parse_config("[model]\npreset = model4\nbias_spatial = false\nbasis_k_shift = 5\n");
  const ModelConfig m = c.model();
  CHECK_FALSE(m.bias_spatial);
  CHECK(m.bias_k() == 1);
  CHECK(m.shift_k() == 5);
}

TEST_CASE("help lists every section") {
  const std::string h = config_help();
  for (const char* s : {"[grid]", "[paths]", "[model]", "[sampler]", "[holdout]", "[simulate]"})
    CHECK(h.find(s) != std::string::npos);
  CHECK(h.find("n_iter") != std::string::npos);
  CHECK(h.find("wind_roughness") != std::string::npos);
}
