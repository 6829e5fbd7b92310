#include <doctest.h>

#include <string>

#include "sloc/config.hpp"
#include "sloc/error.hpp"

using namespace sloc;

namespace {

bool has(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("target parsing") {
    const auto g = parse_target(R"({"kind":"gaussian","mean":[1,2],"cov":[[2,0.5],[0.5,1]]})");
    REQUIRE(g.gaussian());
    CHECK(g.gaussian()->cov()(0, 1) == 0.5);
    const auto flat = parse_target(R"({"kind":"gaussian","mean":[1,2],"cov":[2,0.5,0.5,1]})");
    CHECK((flat.gaussian()->cov() - g.gaussian()->cov()).norm() == 0.0);
    const auto m = parse_target(
        R"({"kind":"mixture","components":[{"weight":0.25,"mean":[0],"cov":[[1]]},{"weight":0.75,"mean":[3],"cov":[1]}]})");
    REQUIRE(m.mixture());
    CHECK(m.mixture()->components().size() == 2);
    const auto p = parse_target(R"({"kind":"potential-ref","name":"logcosh","dim":3})");
    REQUIRE(p.generic());
    CHECK(p.dim() == 3);
    CHECK_THROWS_AS(parse_target(R"({"kind":"gaussian","mean":[0],"cov":[[-1]]})"), DomainError);
    CHECK_THROWS_AS(parse_target(R"({"kind":"gaussian","mean":[0,0],"cov":[1,0,0]})"), DimensionError);
    CHECK_THROWS_AS(parse_target(R"({"kind":"mixture","components":[{"weight":0.5,"mean":[0],"cov":[1]}]})"),
                    DomainError);
    CHECK_THROWS_AS(parse_target(R"({"kind":"potential-ref","name":"nope"})"), DomainError);
    CHECK_THROWS_AS(parse_target(R"({"kind":"circle"})"), DomainError);
    CHECK_THROWS_AS(parse_target("{not json"), DomainError);
}

TEST_CASE("config defaults and round trip") {
    const auto r = validate_config_text(R"({"target":{"kind":"gaussian","mean":[0],"cov":[[1]]},"paths":500,"extra":1})");
    REQUIRE(r.ok());
    const auto& c = *r.config;
    CHECK(c.paths == 500);
    CHECK(c.dt == 1e-3);
    CHECK(c.seed == 42);
    CHECK_FALSE(c.seed_given);
    CHECK(has(r.warnings, "extra"));
    const auto again = validate_config_text(config_to_json(c));
    REQUIRE(again.ok());
    CHECK(config_to_json(*again.config) == config_to_json(c));
}

TEST_CASE("config errors are collected together") {
    const auto r = validate_config_text(
        R"({"target":{"kind":"gaussian","mean":[0],"cov":[[0]]},"dt":-1,"paths":0,"format":"xml","seed":-3})");
    CHECK_FALSE(r.ok());
    CHECK(r.errors.size() == 5);
    CHECK(has(r.errors, "dt"));
    CHECK(has(r.errors, "paths"));
    CHECK(has(r.errors, "format"));
    CHECK(has(r.errors, "seed"));
    CHECK(has(r.errors, "positive definite"));
    CHECK(has(validate_config_text("{}").errors, "target"));
    CHECK(has(validate_config_text("[1]").errors, "object"));
    CHECK(has(validate_config("/nonexistent/x.json").errors, "cannot read"));
    CHECK(has(validate_config_text(R"({"target":{"kind":"potential-ref","name":"quartic"},"dt":2})").errors, "horizon"));
}
