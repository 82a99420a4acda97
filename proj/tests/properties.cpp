// Randomized property tests. Each suite lives in property_suites.hpp so the
// acceptance binary can run the same checks; here every suite gets its own
// test case with a fixed seed and at least 200 generated instances.

#include <catch2/catch_amalgamated.hpp>

#include "property_suites.hpp"

namespace {

void report(const props::SuiteResult& res, std::size_t want_cases) {
    for (const std::string& msg : res.messages) UNSCOPED_INFO(msg);
    CHECK(res.cases >= want_cases);
    CHECK(res.failures == 0);
}

}  // namespace

TEST_CASE("survival estimates behave like survival functions", "[properties][suite1]") {
    report(props::run_survival_monotonicity(1001, 200), 200);
}

TEST_CASE("quantiles are generalized inverses of the survival step", "[properties][suite2]") {
    report(props::run_generalized_inverse(1002, 200), 200);
}

TEST_CASE("estimates commute with outcome and weight scaling", "[properties][suite3]") {
    report(props::run_scale_invariance(1003, 200), 200);
}

TEST_CASE("confidence bands are ordered, nested, and flagged", "[properties][suite4]") {
    report(props::run_band_geometry(1004, 200), 200);
}

TEST_CASE("kernel-ratio weights are positive, clipped, and mean one", "[properties][suite5]") {
    report(props::run_weight_normalization(1005, 200), 200);
}

TEST_CASE("the pipeline is bitwise reproducible from its seed", "[properties][suite6]") {
    report(props::run_determinism(1006, 200), 200);
}
