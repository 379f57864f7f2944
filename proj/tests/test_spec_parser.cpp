#include <string>

#include <gtest/gtest.h>

#include "ivdyn/spec_parser.hpp"

using namespace ivdyn;

namespace {

std::string parse_error(const std::string& text) {
    try {
        parse_map_spec(text);
    } catch (const DynamicsError& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        return e.what();
    }
    ADD_FAILURE() << "no error for:\n" << text;
    return {};
}

} // namespace

TEST(SpecParser, FamilyLogistic) {
    auto p = parse_map_spec("# comment\nfamily = logistic\nlambda = 3.2\n");
    EXPECT_NEAR(p.map.evaluate(0.3), 3.2 * 0.3 * 0.7, 1e-15);
    EXPECT_EQ(p.map.critical_count(), 1u);
}

TEST(SpecParser, ExplicitTentWithRationals) {
    auto p = parse_map_spec("name = t\ncritical = 1/2\nbranch = (0, 1/2) inc poly[0, 2]\nbranch = (1/2, 1) dec poly[2, -2]\n");
    EXPECT_EQ(p.name, "t");
    EXPECT_DOUBLE_EQ(p.map.evaluate(0.25), 0.5);
    EXPECT_DOUBLE_EQ(p.map.evaluate(0.75), 0.5);
}

TEST(SpecParser, CenteredPolynomialMatchesLogistic) {
    auto p = parse_map_spec("critical = 1/2\nbranch = (0, 1/2) inc poly[1, 0, -4] @ 1/2\nbranch = (1/2, 1) dec poly[1, 0, -4] @ 1/2\n");
    for (double x : {0.1, 0.3, 0.7, 0.95}) EXPECT_NEAR(p.map.evaluate(x), 4 * x * (1 - x), 1e-15);
}

TEST(SpecParser, BranchOrderDoesNotMatter) {
    auto p = parse_map_spec("critical = 1/2\nbranch = (1/2, 1) dec poly[2, -2]\nbranch = (0, 1/2) inc poly[0, 2]\n");
    EXPECT_DOUBLE_EQ(p.map.evaluate(0.25), 0.5);
}

TEST(SpecParser, ReportsLineAndColumn) {
    auto msg = parse_error("name = x\ncritical = 1/2\nbranch = (0, 1/2) inc poly[0, 2\nbranch = (1/2, 1) dec poly[2, -2]\n");
    EXPECT_NE(msg.find("3:32"), std::string::npos) << msg;
    EXPECT_NE(msg.find("expected ']'"), std::string::npos) << msg;
}

TEST(SpecParser, UnknownKey) {
    auto msg = parse_error("family = tent\n  colour = red\n");
    EXPECT_NE(msg.find("2:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("unknown key"), std::string::npos) << msg;
}

TEST(SpecParser, MissingEquals) { EXPECT_NE(parse_error("family tent\n").find("1:1"), std::string::npos); }

TEST(SpecParser, BadMonotonicity) { EXPECT_NE(parse_error("critical = 1/2\nbranch = (0, 1/2) up poly[0,2]\n").find("inc or dec"), std::string::npos); }

TEST(SpecParser, OverlappingBranches) {
    auto msg = parse_error("critical = 1/2\nbranch = (0, 0.6) inc poly[0, 1]\nbranch = (1/2, 1) dec poly[1, -1]\n");
    EXPECT_NE(msg.find("overlaps"), std::string::npos) << msg;
}

TEST(SpecParser, BranchCountMustMatchCriticalSet) {
    EXPECT_NE(parse_error("critical = 1/3, 2/3\nbranch = (0, 1/2) inc poly[0, 2]\nbranch = (1/2, 1) dec poly[2, -2]\n")
                  .find("expected 3 branches"),
              std::string::npos);
}

TEST(SpecParser, FamilyWithBranchesRejected) { parse_error("family = tent\nbranch = (0, 1) inc poly[0, 1]\n"); }

TEST(SpecParser, UnknownFamily) { EXPECT_NE(parse_error("family = henon\n").find("unknown family"), std::string::npos); }

TEST(SpecParser, TrailingCharacters) { EXPECT_NE(parse_error("family = tent\nslope = 2 3\n").find("trailing"), std::string::npos); }

TEST(SpecParser, MissingFileIsParseError) {
    try {
        load_map_spec("/nonexistent/none.map");
        FAIL();
    } catch (const DynamicsError& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
}

TEST(SpecParser, InvalidMapSurfacesFromConstruction) {
    try {
        parse_map_spec("critical = 1/2\nbranch = (0, 1/2) inc poly[0, 3]\nbranch = (1/2, 1) dec poly[3, -3]\n");
        FAIL();
    } catch (const DynamicsError& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidMap);
    }
}
