#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mia/error.hpp"
#include "mia/hashing.hpp"
#include "mia/prompts.hpp"

using namespace mia;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const std::string kTemplateDir = MIA_TEMPLATE_SOURCE_DIR;
const std::string kFixtureDir = std::string(MIA_FIXTURE_DIR) + "/prompts";

Bindings load_bindings(const std::string& template_id) {
  auto all = nlohmann::json::parse(slurp(kFixtureDir + "/bindings.json"));
  Bindings bindings;
  for (const auto& [k, v] : all.at(template_id).items()) {
    bindings[k] = v.get<std::string>();
  }
  return bindings;
}

}  // namespace

TEST_CASE("parse_template extracts sections and the placeholder manifest") {
  const PromptTemplate t = parse_template(
      "demo", "[system]\nYou check {thing}.\n[user]\nLook at {thing} and {place}.\n");
  CHECK(t.system == "You check {thing}.");
  CHECK(t.user == "Look at {thing} and {place}.");
  CHECK(t.manifest == std::vector<std::string>{"thing", "place"});
}

TEST_CASE("render substitutes exactly and rejects bad binding sets") {
  const PromptTemplate t =
      parse_template("demo", "[user]\nStep {step}/{max_steps} on {topic}.\n");

  SUBCASE("full binding set") {
    const RenderedPrompt r =
        render(t, {{"step", "2"}, {"max_steps", "3"}, {"topic", "keys"}});
    CHECK(r.user == "Step 2/3 on keys.");
  }
  SUBCASE("missing binding") {
    try {
      render(t, {{"step", "2"}, {"max_steps", "3"}});
      FAIL("expected MissingPlaceholder");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingPlaceholder);
    }
  }
  SUBCASE("unknown binding key") {
    try {
      render(t, {{"step", "1"}, {"max_steps", "3"}, {"topic", "x"}, {"bogus", "y"}});
      FAIL("expected UnknownPlaceholder");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownPlaceholder);
    }
  }
  SUBCASE("brace-bearing values substitute literally, no recursion") {
    const RenderedPrompt r = render(
        t, {{"step", "{max_steps}"}, {"max_steps", "3"}, {"topic", "{t}"}});
    CHECK(r.user == "Step {max_steps}/3 on {t}.");
  }
}

TEST_CASE("render is a pure function of template and bindings") {
  const PromptTemplate t = parse_template("demo", "[user]\nQ: {q}\n");
  const Bindings b{{"q", "same"}};
  CHECK(render(t, b).user == render(t, b).user);
}

TEST_CASE("literal JSON braces in templates pass through untouched") {
  const PromptTemplate t = parse_template(
      "demo", "[user]\nUse {\"answer\":\"x\"} with {name}.\n");
  CHECK(t.manifest == std::vector<std::string>{"name"});
  const RenderedPrompt r = render(t, {{"name", "care"}});
  CHECK(r.user == "Use {\"answer\":\"x\"} with care.");
}

TEST_CASE("shipped templates load and byte-match the vendored fixtures") {
  const TemplateSet set = TemplateSet::load(kTemplateDir);
  for (const auto& id : TemplateSet::shipped_ids()) {
    CAPTURE(id);
    const std::string shipped = slurp(kTemplateDir + "/" + id + ".txt");
    const std::string vendored = slurp(kFixtureDir + "/" + id + ".txt");
    CHECK(hex64(fnv1a64(shipped)) == hex64(fnv1a64(vendored)));
    CHECK(set.get(id).content_hash == hex64(fnv1a64(vendored)));
  }
}

TEST_CASE("rendered prompts byte-match the canonical fixtures") {
  const TemplateSet set = TemplateSet::load(kTemplateDir);
  for (const auto& id : TemplateSet::shipped_ids()) {
    CAPTURE(id);
    const RenderedPrompt r = render(set.get(id), load_bindings(id));
    CHECK(r.system == slurp(kFixtureDir + "/rendered/" + id + ".system.txt"));
    CHECK(r.user == slurp(kFixtureDir + "/rendered/" + id + ".user.txt"));
  }
}

TEST_CASE("the update template renders Step 2/3 from the canonical bindings") {
  const TemplateSet set = TemplateSet::load(kTemplateDir);
  const RenderedPrompt r = render(set.get("update"), load_bindings("update"));
  CHECK(r.user.find("Step 2/3") != std::string::npos);
}

TEST_CASE("parse_answer handles the three task formats") {
  SUBCASE("detective") {
    CHECK(parse_answer(R"({"answer":"D","reasoning":"..."})", TaskKind::Detective)
              .value == "D");
    // prose-wrapped output still yields the first JSON object
    CHECK(parse_answer("Sure! Here you go: {\"answer\":\"b\",\"reasoning\":\"x\"} ok?",
                       TaskKind::Detective)
              .value == "B");
    try {
      parse_answer("The answer is maybe", TaskKind::Detective);
      FAIL("expected UnparseableAnswer");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnparseableAnswer);
    }
    CHECK_THROWS_AS(
        parse_answer(R"({"answer":"E","reasoning":"x"})", TaskKind::Detective),
        Error);
  }
  SUBCASE("claim") {
    CHECK(parse_answer("<explanation>e</explanation>\n<answer>TRUE</answer>",
                       TaskKind::Claim)
              .value == "TRUE");
    CHECK(parse_answer("<answer>false</answer>", TaskKind::Claim).value == "FALSE");
    try {
      parse_answer("TRUE", TaskKind::Claim);
      FAIL("expected UnparseableAnswer");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnparseableAnswer);
    }
  }
  SUBCASE("open qa trims to a phrase") {
    CHECK(parse_answer("  in the cove \n", TaskKind::OpenQA).value == "in the cove");
  }
}

TEST_CASE("answer parsing round-trips canonical outputs for all task kinds") {
  CHECK(parse_answer(R"({"answer":"A","reasoning":"r"})", TaskKind::Detective).value ==
        "A");
  CHECK(parse_answer("<answer>FALSE</answer>", TaskKind::Claim).value == "FALSE");
  CHECK(parse_answer("the lighthouse", TaskKind::OpenQA).value == "the lighthouse");
}

TEST_CASE("template set rejects unknown ids and missing directories") {
  CHECK_THROWS_AS(TemplateSet::load("/nonexistent/dir"), Error);
  const TemplateSet set = TemplateSet::load(kTemplateDir);
  CHECK_THROWS_AS(set.get("nope"), Error);
}
