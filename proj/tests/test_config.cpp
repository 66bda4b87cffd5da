#include <doctest.h>

#include <stdexcept>

#include "lumir/config.hpp"

using namespace lumir;

TEST_CASE("kv config parsing") {
    KvConfig cfg = KvConfig::parse_text(
        "# comment line\n"
        "steps = 8\n"
        "alpha_bar_start=0.9999  # trailing comment\n"
        "\n"
        "name = toy run\n");
    CHECK(cfg.get_int("steps", 0) == 8);
    CHECK(cfg.get_double("alpha_bar_start", 0.0) == doctest::Approx(0.9999));
    CHECK(cfg.get_str("name") == "toy run");
    CHECK_FALSE(cfg.has("missing"));
    CHECK(cfg.get_int("missing", 3) == 3);
    CHECK_THROWS_AS(cfg.get_str("missing"), std::invalid_argument);
    CHECK_THROWS_AS(KvConfig::parse_text("not a pair\n"), std::invalid_argument);
    CHECK_THROWS_AS(cfg.get_int("name", 0), std::invalid_argument);
}

TEST_CASE("overrides win over file values") {
    KvConfig cfg = KvConfig::parse_text("a = 1\nb = 2\n");
    cfg.apply_overrides({"b=5", "c=7"});
    CHECK(cfg.get_int("a", 0) == 1);
    CHECK(cfg.get_int("b", 0) == 5);
    CHECK(cfg.get_int("c", 0) == 7);
    CHECK_THROWS_AS(cfg.apply_overrides({"novalue"}), std::invalid_argument);
}

TEST_CASE("serialize round trip keeps values") {
    KvConfig cfg;
    cfg.set_int("x", 3);
    cfg.set_double("y", 0.125);
    cfg.set("z", "hello");
    KvConfig back = KvConfig::parse_text(cfg.serialize());
    CHECK(back.get_int("x", 0) == 3);
    CHECK(back.get_double("y", 0.0) == 0.125);
    CHECK(back.get_str("z") == "hello");
}

TEST_CASE("booleans") {
    KvConfig cfg = KvConfig::parse_text("a = true\nb = 0\nc = off\n");
    CHECK(cfg.get_bool("a", false));
    CHECK_FALSE(cfg.get_bool("b", true));
    CHECK_FALSE(cfg.get_bool("c", true));
    CHECK(cfg.get_bool("missing", true));
}
