#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tmpred/errors.hpp"
#include "tmpred/rng.hpp"
#include "tmpred/textio.hpp"
#include "tmpred/tmdata.hpp"

using namespace tmpred;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    const fs::path path = fs::temp_directory_path() / ("tmpred_test_" + name);
    write_text_file(path, content);
    return path;
}

TmSeries random_series(Rng& rng, int nodes, int steps) {
    TmSeries tm;
    tm.node_count = nodes;
    tm.interval_seconds = 300;
    tm.values.resize(steps, nodes * nodes);
    for (int t = 0; t < steps; ++t) {
        tm.timestamps.push_back(1000 + 300LL * t);
        for (int f = 0; f < nodes * nodes; ++f)
            tm.values(t, f) = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.0, 1e6);
    }
    return tm;
}

} // namespace

TEST_CASE("ingest parses a two-step file") {
    const auto path = temp_file("ingest_ok.csv",
                                "timestamp,src,dst,bytes\n"
                                "100,0,1,5.0\n"
                                "400,0,1,7.0\n");
    const TmSeries tm = ingest_canonical(path, 2, 300);
    CHECK(tm.length() == 2);
    CHECK(tm.at(0, 0, 1) == 5.0);
    CHECK(tm.at(1, 0, 1) == 7.0);
    CHECK(tm.at(0, 0, 0) == 0.0);
    CHECK(tm.at(0, 1, 0) == 0.0);
    CHECK(tm.at(0, 1, 1) == 0.0);
    CHECK(tm.timestamps[0] == 100);
    CHECK(tm.timestamps[1] == 400);
}

TEST_CASE("ingest rejects degenerate inputs") {
    SUBCASE("empty file") {
        const auto path = temp_file("ingest_empty.csv", "");
        CHECK_THROWS_AS(ingest_canonical(path, 2, 300), EmptyInputError);
    }
    SUBCASE("header only") {
        const auto path = temp_file("ingest_header.csv", "timestamp,src,dst,bytes\n");
        CHECK_THROWS_AS(ingest_canonical(path, 2, 300), EmptyInputError);
    }
    SUBCASE("timestamps out of order") {
        const auto path = temp_file("ingest_order.csv",
                                    "timestamp,src,dst,bytes\n400,0,1,1\n100,0,1,1\n");
        CHECK_THROWS_AS(ingest_canonical(path, 2, 300), OrderingError);
    }
    SUBCASE("node index out of range") {
        const auto path =
            temp_file("ingest_bounds.csv", "timestamp,src,dst,bytes\n100,0,2,1\n");
        CHECK_THROWS_AS(ingest_canonical(path, 2, 300), BoundsError);
    }
    SUBCASE("malformed row reports the line number") {
        const auto path = temp_file("ingest_parse.csv",
                                    "timestamp,src,dst,bytes\n100,0,1,1\nnot,a,row\n");
        try {
            ingest_canonical(path, 2, 300);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SUBCASE("duplicate entry") {
        const auto path = temp_file("ingest_dup.csv",
                                    "timestamp,src,dst,bytes\n100,0,1,1\n100,0,1,2\n");
        CHECK_THROWS_AS(ingest_canonical(path, 2, 300), ParseError);
    }
    SUBCASE("negative bytes") {
        const auto path =
            temp_file("ingest_neg.csv", "timestamp,src,dst,bytes\n100,0,1,-4\n");
        CHECK_THROWS_AS(ingest_canonical(path, 2, 300), ParseError);
    }
}

TEST_CASE("canonical write/ingest round trip") {
    Rng rng(11);
    const TmSeries tm = random_series(rng, 3, 17);
    const fs::path path = fs::temp_directory_path() / "tmpred_test_roundtrip.csv";
    write_canonical(path, tm);
    const TmSeries back = ingest_canonical(path, 3, 300);
    REQUIRE(back.length() == tm.length());
    CHECK(back.timestamps == tm.timestamps);
    CHECK((back.values - tm.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("extract_flows unrolls matrices in flow_id order") {
    TmSeries tm;
    tm.node_count = 2;
    tm.interval_seconds = 300;
    tm.timestamps = {100};
    tm.values.resize(1, 4);
    tm.values << 1, 2, 3, 4;
    const auto flows = extract_flows(tm);
    REQUIRE(flows.size() == 4);
    for (int fid = 0; fid < 4; ++fid) {
        CHECK(flows[fid].flow_id == fid);
        CHECK(flows[fid].src == fid / 2);
        CHECK(flows[fid].dst == fid % 2);
        REQUIRE(flows[fid].values.size() == 1);
        CHECK(flows[fid].values[0] == fid + 1);
    }
}

TEST_CASE("extract_flows yields N^2 flows at network scale") {
    Rng rng(5);
    CHECK(extract_flows(random_series(rng, 12, 2)).size() == 144);
    CHECK(extract_flows(random_series(rng, 23, 2)).size() == 529);
}

TEST_CASE("extract_flows round trip reproduces the series") {
    Rng rng(7);
    const TmSeries tm = random_series(rng, 4, 9);
    const auto flows = extract_flows(tm);
    for (std::size_t t = 0; t < tm.length(); ++t)
        for (int s = 0; s < 4; ++s)
            for (int d = 0; d < 4; ++d)
                CHECK(flows[static_cast<std::size_t>(s * 4 + d)].values[t] == tm.at(t, s, d));
}

TEST_CASE("chronological_split sizes") {
    Rng rng(3);
    SUBCASE("80/20 with 10% validation") {
        const auto split = chronological_split(random_series(rng, 2, 100), 0.8, 0.1);
        CHECK(split.train.length() == 72);
        CHECK(split.val.length() == 8);
        CHECK(split.test.length() == 20);
    }
    SUBCASE("validation disabled") {
        const auto split = chronological_split(random_series(rng, 2, 10), 0.8, 0.0);
        CHECK(split.train.length() == 8);
        CHECK(split.val.length() == 0);
        CHECK(split.test.length() == 2);
    }
    SUBCASE("degenerate input") {
        CHECK_THROWS_AS(chronological_split(random_series(rng, 2, 2), 0.8, 0.1),
                        SplitError);
    }
}

TEST_CASE("chronological_split preserves order and covers the series") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const int steps = 10 + static_cast<int>(rng.below(200));
        const double tf = rng.uniform(0.3, 0.9);
        const double vf = rng.uniform(0.0, 0.3);
        const TmSeries tm = random_series(rng, 2, steps);
        SplitSeries split;
        try {
            split = chronological_split(tm, tf, vf);
        } catch (const SplitError&) {
            continue;
        }
        CHECK(split.train.length() + split.val.length() + split.test.length() ==
              tm.length());
        std::vector<std::int64_t> glued = split.train.timestamps;
        glued.insert(glued.end(), split.val.timestamps.begin(), split.val.timestamps.end());
        glued.insert(glued.end(), split.test.timestamps.begin(), split.test.timestamps.end());
        CHECK(glued == tm.timestamps);
    }
}

TEST_CASE("fit_normalization per-flow ranges and constant flags") {
    TmSeries tm;
    tm.node_count = 2;
    tm.interval_seconds = 300;
    tm.timestamps = {100, 400, 700};
    tm.values.resize(3, 4);
    tm.values << 2, 5, 0, 1,
                 4, 5, 0, 3,
                 6, 5, 0, 2;
    const auto p = fit_normalization(tm);
    CHECK(p.per_flow_min[0] == 2.0);
    CHECK(p.per_flow_max[0] == 6.0);
    CHECK_FALSE(p.is_constant(0));
    CHECK(p.is_constant(1)); // constant 5
    CHECK(p.is_constant(2)); // all zero
    CHECK_FALSE(p.is_constant(3));
}

TEST_CASE("normalize and denormalize") {
    NormalizationParams p;
    p.per_flow_min = Eigen::VectorXd(2);
    p.per_flow_max = Eigen::VectorXd(2);
    p.per_flow_min << 2.0, 5.0;
    p.per_flow_max << 6.0, 5.0;

    CHECK(normalize_value(4.0, p, 0) == 0.5);
    CHECK(normalize_value(8.0, p, 0) == 1.0);  // test-time overshoot clamps
    CHECK(normalize_value(0.0, p, 0) == 0.0);
    CHECK(normalize_value(5.0, p, 1) == 0.0);  // constant flow
    CHECK(denormalize_value(normalize_value(3.0, p, 0), p, 0) == doctest::Approx(3.0));
    CHECK(denormalize_value(0.7, p, 1) == 5.0);

    SUBCASE("monotone for non-constant flows") {
        Rng rng(17);
        double prev = -1.0;
        for (double v = 1.0; v <= 7.0; v += rng.uniform(0.0, 0.25)) {
            const double x = normalize_value(v, p, 0);
            CHECK(x >= prev);
            prev = x;
        }
    }
}

TEST_CASE("build_windows") {
    Rng rng(23);
    const TmSeries tm = random_series(rng, 2, 20);
    const auto p = fit_normalization(tm);
    SUBCASE("window count and input steps") {
        const auto ds = build_windows(tm, p, {0, 1, 2, 3}, 11);
        CHECK(ds.window_count() == 10);
        CHECK(ds.input_steps() == 10);
        CHECK(ds.flow_dim() == 4);
        for (int w = 0; w < ds.window_count(); ++w)
            CHECK(ds.target_index(w) == w + 10);
    }
    SUBCASE("single window boundary") {
        const auto ds = build_windows(random_series(rng, 2, 11), p, {0}, 11);
        CHECK(ds.window_count() == 1);
    }
    SUBCASE("insufficient data") {
        CHECK_THROWS_AS(build_windows(random_series(rng, 2, 10), p, {0}, 11),
                        InsufficientDataError);
    }
    SUBCASE("values normalized into [0,1] and targets aligned") {
        const auto ds = build_windows(tm, p, {0, 3}, 5);
        CHECK(ds.matrix().minCoeff() >= 0.0);
        CHECK(ds.matrix().maxCoeff() <= 1.0);
        for (int w = 0; w < ds.window_count(); ++w) {
            CHECK(ds.target(w)[0] ==
                  normalize_value(tm.values(w + 4, 0), p, 0));
            CHECK(ds.target(w)[1] ==
                  normalize_value(tm.values(w + 4, 3), p, 3));
        }
    }
    SUBCASE("sliding-window shift property") {
        const auto ds = build_windows(tm, p, {0, 1, 2, 3}, 6);
        for (int w = 0; w + 1 < ds.window_count(); ++w)
            for (int k = 0; k + 1 < ds.input_steps(); ++k)
                CHECK((ds.input_step(w + 1, k) - ds.input_step(w, k + 1)).norm() == 0.0);
    }
}

TEST_CASE("split_windows partitions by target step") {
    Rng rng(29);
    const TmSeries tm = random_series(rng, 2, 100);
    const auto p = fit_normalization(tm.slice(0, 72));
    const auto all = build_windows(tm, p, {0, 1, 2, 3}, 11);
    const SplitSizes sizes = split_sizes(tm.length(), 0.8, 0.1);
    const auto parts = split_windows(all, sizes);
    CHECK(parts.train.window_count() == 72 - 11 + 1);
    CHECK(parts.val.window_count() == 8);
    CHECK(parts.test.window_count() == 20);
    for (int w = 0; w < parts.train.window_count(); ++w)
        CHECK(parts.train.target_index(w) < 72);
    for (int w = 0; w < parts.val.window_count(); ++w) {
        CHECK(parts.val.target_index(w) >= 72);
        CHECK(parts.val.target_index(w) < 80);
    }
    for (int w = 0; w < parts.test.window_count(); ++w)
        CHECK(parts.test.target_index(w) >= 80);
}
