#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "ctca/common.hpp"
#include "ctca/config.hpp"

using namespace ctca;
namespace fs = std::filesystem;

TEST_CASE("key-value parsing trims, skips comments, keeps embedded equals") {
    const KeyValueConfig config = KeyValueConfig::parse_text(
        "# experiment\n"
        "  iters =  600 \n"
        "name = desk run\n"
        "\n"
        "expr = a=b\n");
    CHECK(config.entries().size() == 3);
    CHECK(config.get_string("name") == "desk run");
    CHECK(config.get_int("iters") == 600);
    CHECK(config.get_string("expr") == "a=b");
}

TEST_CASE("parse rejects malformed lines") {
    CHECK_THROWS_AS(KeyValueConfig::parse_text("just words\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_text(" = 3\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_text("a = 1\na = 2\n"), ConfigError);
}

TEST_CASE("serialize then parse is the identity") {
    KeyValueConfig config;
    config.set("zeta", "1");
    config.set("alpha", "two words");
    config.set("mid", "0.5");
    const std::string text = config.serialize();
    const KeyValueConfig again = KeyValueConfig::parse_text(text);
    CHECK(again.entries() == config.entries());
    CHECK(again.serialize() == text);
    CHECK(text == "alpha = two words\nmid = 0.5\nzeta = 1\n");
}

TEST_CASE("typed getters parse strictly and fall back when absent") {
    const KeyValueConfig config = KeyValueConfig::parse_text(
        "count = 42\n"
        "rate = 3e-4\n"
        "flag = true\n"
        "off = 0\n"
        "clusters = 16, 64,256\n"
        "junk = 42x\n");
    CHECK(config.get_int("count") == 42);
    CHECK(config.get_double("rate") == 3e-4);
    CHECK(config.get_double("count") == 42.0);
    CHECK(config.get_bool("flag"));
    CHECK(!config.get_bool("off"));
    CHECK(config.get_int_list("clusters") == std::vector<int64_t>{16, 64, 256});

    CHECK_THROWS_AS(config.get_int("junk"), ConfigError);
    CHECK_THROWS_AS(config.get_double("junk"), ConfigError);
    CHECK_THROWS_AS(config.get_bool("count"), ConfigError);
    CHECK_THROWS_AS(config.get_string("absent"), ConfigError);
    CHECK_THROWS_AS(config.get_int_list("junk"), ConfigError);

    CHECK(config.get_int("absent", 7) == 7);
    CHECK(config.get_double("absent", 0.25) == 0.25);
    CHECK(config.get_bool("absent", true));
    CHECK(config.get_string("absent", "d") == "d");
    CHECK(config.get_int_list("absent", {1, 2}) == std::vector<int64_t>{1, 2});
}

TEST_CASE("list parsing rejects empty elements") {
    const KeyValueConfig config = KeyValueConfig::parse_text("bad = 1,,2\nempty =\n");
    CHECK_THROWS_AS(config.get_int_list("bad"), ConfigError);
    CHECK_THROWS_AS(config.get_int_list("empty"), ConfigError);
}

TEST_CASE("overrides replace file values") {
    KeyValueConfig base = KeyValueConfig::parse_text("iters = 100\nseed = 1\n");
    KeyValueConfig flags;
    flags.set("iters", "250");
    flags.set("out", "runs");
    base.merge_overrides(flags);
    CHECK(base.get_int("iters") == 250);
    CHECK(base.get_int("seed") == 1);
    CHECK(base.get_string("out") == "runs");
}

TEST_CASE("content id is a stable 16-digit hex address") {
    KeyValueConfig a = KeyValueConfig::parse_text("iters = 100\nseed = 1\n");
    KeyValueConfig b = KeyValueConfig::parse_text("seed = 1\niters = 100\n");
    KeyValueConfig c = KeyValueConfig::parse_text("iters = 101\nseed = 1\n");
    CHECK(a.content_id() == b.content_id());
    CHECK(a.content_id() != c.content_id());
    CHECK(a.content_id().size() == 16);
    for (char ch : a.content_id()) {
        CHECK(((ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f')));
    }
    CHECK(a.content_hash() != 0);
}

TEST_CASE("config files round-trip through disk") {
    const fs::path dir = fs::path("/tmp") / "ctca_config_test";
    fs::create_directories(dir);
    const std::string path = (dir / "exp.conf").string();
    KeyValueConfig config;
    config.set("dataset", "desk");
    config.set("budget", "600");
    config.save(path);
    const KeyValueConfig loaded = KeyValueConfig::parse_file(path);
    CHECK(loaded.entries() == config.entries());
    CHECK_THROWS_AS(KeyValueConfig::parse_file((dir / "missing.conf").string()), IoError);
    fs::remove_all(dir);
}
