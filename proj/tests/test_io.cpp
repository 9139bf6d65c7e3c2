#include "helpers.hpp"

#include "mib/io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>

using namespace mib;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

} // namespace

TEST_CASE("format_double round-trips") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng) * std::pow(10.0, (i % 40) - 20);
        CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(-3.0) == "-3");
}

TEST_CASE("load_dataset tolerates whitespace, CRLF, BOM and blank lines") {
    const auto dir = testutil::scratch_dir("io-lenient");
    testutil::write_text(dir / "a.csv", "\xEF\xBB\xBF" "y1, y2\r\n 1.5 ,+2\r\n\r\n-3e2,4\r\n");
    const Dataset d = load_dataset(dir / "a.csv", {"y1", "y2"});
    CHECK(d.n() == 2);
    CHECK(d.values()(0, 0) == 1.5);
    CHECK(d.values()(0, 1) == 2.0);
    CHECK(d.values()(1, 0) == -300.0);
}

TEST_CASE("load_dataset reports row and column") {
    const auto dir = testutil::scratch_dir("io-errors");
    testutil::write_text(dir / "e.csv", "a,b,c\n1,2,3\n4,,6\n");
    try {
        load_dataset(dir / "e.csv");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.row() == 2);
        CHECK(e.column() == 2);
    }
    testutil::write_text(dir / "h.csv", "a,b\n");
    CHECK_THROWS_AS(load_dataset(dir / "h.csv"), ParseError);
    testutil::write_text(dir / "empty.csv", "");
    CHECK_THROWS_AS(load_dataset(dir / "empty.csv"), ParseError);
    testutil::write_text(dir / "x.csv", "a,b\n1,2x\n");
    CHECK_THROWS_AS(load_dataset(dir / "x.csv"), ParseError);
}

TEST_CASE("datasets round-trip bit for bit") {
    const auto dir = testutil::scratch_dir("io-roundtrip");
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0.0, 1e3);
    Matrix v(50, 3);
    for (Index i = 0; i < v.rows(); ++i) v.row(i) << z(rng), z(rng) * 1e-9, z(rng) * 1e12;
    const Dataset d(v, {"p", "q", "r"});
    write_dataset(dir / "d.csv", d);
    const Dataset back = load_dataset(dir / "d.csv", {"p", "q", "r"});
    CHECK(back.values() == d.values());
}

TEST_CASE("chain export") {
    const auto dir = testutil::scratch_dir("io-chain");
    Chain c;
    c.draws.resize(3, 2);
    c.draws << 1, 2, 3, 4, 5, 6;
    c.log_post = Vector::LinSpaced(3, -1.0, -3.0);
    c.seed = 99;
    c.burn_in = 7;
    c.acceptance_rate = 0.25;
    write_chain(dir / "c.csv", c, {"a", "b"});
    const auto lines = lines_of(testutil::read_text(dir / "c.csv"));
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "a,b,log_post");
    CHECK(lines[2] == "3,4,-2");
    const Json meta = chain_metadata(c);
    CHECK(meta["seed"] == 99);
    CHECK(meta["B"] == 3);
    CHECK(meta["burn_in"] == 7);
    CHECK(meta["acceptance_rate"] == 0.25);

    write_chain(dir / "d.csv", c);
    CHECK(lines_of(testutil::read_text(dir / "d.csv"))[0] == "theta1,theta2,log_post");
    CHECK_THROWS_AS(write_chain(dir / "e.csv", c, {"a"}), DimensionError);
}

TEST_CASE("level set export") {
    const auto dir = testutil::scratch_dir("io-levelset");
    LevelSetRegion r;
    r.epsilon_n = 2.0;
    r.max_log_post = -1.0;
    r.argmax_theta = Vector::Constant(1, 0.5);
    r.threshold = -3.0;
    r.points = Matrix::Constant(2, 1, 0.25);
    r.points(1, 0) = 0.75;
    r.values = Vector::Constant(2, -2.0);
    r.spacing = Vector::Constant(1, 0.5);
    r.hull_lower = Vector::Constant(1, 0.25);
    r.hull_upper = Vector::Constant(1, 0.75);
    write_level_set(dir / "l.csv", r);
    const auto lines = lines_of(testutil::read_text(dir / "l.csv"));
    REQUIRE(lines.size() == 3);
    CHECK(lines[1] == "0.25,-2");
    const Json meta = level_set_metadata(r);
    CHECK(meta["epsilon_n"] == 2.0);
    CHECK(meta["threshold"] == -3.0);
    CHECK(meta["hull_upper"][0] == 0.75);
    CHECK(meta["grid_spacing"][0] == 0.5);
    CHECK(meta["points"] == 2);
}

TEST_CASE("selection report is sorted by weight") {
    const auto dir = testutil::scratch_dir("io-selection");
    CandidatePosterior post;
    post.approach = "A2";
    post.param = 100.0;
    post.candidates.push_back({{{0}, {0}}, -3.0, 0.0, 0.0, 0.0});
    post.candidates.push_back({{{0, 1}, {0}}, -1.0, 0.0, 0.0, 0.0});
    post.candidates.push_back({{{1}, {}}, -2.0, 0.0, 0.0, 0.0});
    normalise_weights(post);
    write_selection_report(dir / "s.csv", post);
    const auto lines = lines_of(testutil::read_text(dir / "s.csv"));
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "moment_subset,free_mask,log_evidence,log_prior,posterior_weight");
    CHECK(lines[1].rfind("1 2,1,-1,0,", 0) == 0);
    CHECK(lines[2].rfind("2,,-2,0,", 0) == 0);
    CHECK(lines[3].rfind("1,1,-3,0,", 0) == 0);
    const Json meta = selection_metadata(post);
    CHECK(meta["approach"] == "A2");
    CHECK(meta["sigma_n2"] == 100.0);
    CHECK(meta["argmax"]["moment_subset"] == "1 2");
    CHECK(meta["candidates"] == 3);
}

TEST_CASE("json output ends with a newline and creates directories") {
    const auto dir = testutil::scratch_dir("io-json");
    write_json(dir / "nested" / "x.json", Json{{"a", 1}, {"b", {1.5, 2.5}}});
    const std::string text = testutil::read_text(dir / "nested" / "x.json");
    CHECK(text.back() == '\n');
    CHECK(Json::parse(text)["b"][1] == 2.5);
    CHECK(text.find("\"a\"") < text.find("\"b\""));
}
