#include "doctest.h"

#include "svflow/study.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace svf;

namespace {

ConvergenceRecord rec(long long M, double err, const std::string& flag = "ok")
{
    ConvergenceRecord r;
    r.method = "h_version";
    r.M = M;
    r.e_u_w1p = r.e_S = r.e_F = r.e_q = err;
    r.flag = flag;
    return r;
}

} // namespace

TEST_CASE("rate fit on synthetic power laws")
{
    std::vector<ConvergenceRecord> rs;
    for (long long M : {100, 400, 1600, 6400})
        rs.push_back(rec(M, std::pow(static_cast<double>(M), -0.5)));
    const RateFit f = fit_rate(rs, "e_F");
    CHECK(f.gamma == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(f.points_used == 4);
    CHECK(f.residual < 1e-12);

    rs.clear();
    for (long long M : {100, 400, 1600, 6400})
        rs.push_back(rec(M, 7.0 * std::pow(static_cast<double>(M), -1.0)));
    CHECK(fit_rate(rs, "e_q").gamma == doctest::Approx(2.0).epsilon(1e-10));

    // scale invariance of the error
    std::vector<ConvergenceRecord> scaled = rs;
    for (auto& r : scaled) {
        r.e_u_w1p *= 123.0; r.e_S *= 123.0; r.e_F *= 123.0; r.e_q *= 123.0;
    }
    CHECK(fit_rate(scaled, "e_F").gamma ==
          doctest::Approx(fit_rate(rs, "e_F").gamma).epsilon(1e-12));

    // window keeps only the tail
    std::vector<ConvergenceRecord> mixed;
    mixed.push_back(rec(25, 1.0));  // off-trend point
    for (long long M : {100, 400, 1600})
        mixed.push_back(rec(M, std::pow(static_cast<double>(M), -1.5)));
    CHECK(fit_rate(mixed, "e_F", 3).gamma == doctest::Approx(3.0).epsilon(1e-10));

    // flagged rows are excluded
    std::vector<ConvergenceRecord> flagged = rs;
    flagged.push_back(rec(25600, 1e6, "diverged"));
    CHECK(fit_rate(flagged, "e_F").gamma == doctest::Approx(2.0).epsilon(1e-10));

    std::vector<ConvergenceRecord> few = {rec(10, 1.0), rec(40, 0.5)};
    CHECK_THROWS_AS(fit_rate(few, "e_F"), std::runtime_error);
    CHECK_THROWS_AS(fit_rate(rs, "nope"), std::invalid_argument);
}

TEST_CASE("csv round-trip preserves every field")
{
    std::vector<ConvergenceRecord> rs;
    ConvergenceRecord a;
    a.method = "p_version";
    a.p = 1.5;
    a.N = 7;
    a.level = 2;
    a.M = 12345;
    a.e_u_w1p = 0.1 / 3.0;
    a.e_S = 1.25e-7;
    a.e_F = 9.999999999999e-3;
    a.e_q = 0.5;
    a.wall_time_s = 0.123456789;
    a.flag = "ok";
    rs.push_back(a);
    rs.push_back(rec(99, 1e-4, "diverged"));

    std::stringstream ss;
    emit_csv(rs, ss);
    const auto back = parse_csv(ss);
    REQUIRE(back.size() == rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i) {
        CHECK(back[i].method == rs[i].method);
        CHECK(back[i].p == rs[i].p);
        CHECK(back[i].N == rs[i].N);
        CHECK(back[i].level == rs[i].level);
        CHECK(back[i].M == rs[i].M);
        CHECK(back[i].e_u_w1p == rs[i].e_u_w1p);
        CHECK(back[i].e_S == rs[i].e_S);
        CHECK(back[i].e_F == rs[i].e_F);
        CHECK(back[i].e_q == rs[i].e_q);
        CHECK(back[i].wall_time_s == rs[i].wall_time_s);
        CHECK(back[i].flag == rs[i].flag);
    }

    std::stringstream bad("method,p,N\nx,1,2\n");
    CHECK_THROWS_AS(parse_csv(bad), std::runtime_error);
    CHECK_THROWS_AS(emit_csv({}, ss), std::invalid_argument);
}

TEST_CASE("svg plot has one polyline per series")
{
    std::vector<ConvergenceRecord> rs;
    for (long long M : {100, 400, 1600}) {
        rs.push_back(rec(M, std::pow(static_cast<double>(M), -1.0)));
        ConvergenceRecord r = rec(M, 2.0 * std::pow(static_cast<double>(M), -1.5));
        r.method = "p_version";
        r.p = 3.0;
        rs.push_back(r);
    }
    const std::string path = "test_plot_tmp.svg";
    emit_svg_plot(rs, path);
    std::ifstream is(path);
    REQUIRE(is.good());
    std::stringstream content;
    content << is.rdbuf();
    const std::string svg = content.str();
    std::size_t n_polylines = 0, pos = 0;
    while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
        ++n_polylines;
        ++pos;
    }
    CHECK(n_polylines == 2);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("log10 e_F") != std::string::npos);
    std::remove(path.c_str());

    // every record filtered out -> error, no file
    std::vector<ConvergenceRecord> dead = {rec(100, 1.0, "diverged")};
    CHECK_THROWS_AS(emit_svg_plot(dead, "test_plot_dead.svg"),
                    std::invalid_argument);
    CHECK_FALSE(std::filesystem::exists("test_plot_dead.svg"));
}

TEST_CASE("tiny study runs deterministically and reports true sizes")
{
    StudyConfig cfg;
    cfg.method = "h";
    cfg.solution = "smooth";
    cfg.p = 2.0;
    cfg.N = 4;
    cfg.levels = 1;
    cfg.base_refinements = 0;
    const auto run1 = run_convergence_study(cfg);
    const auto run2 = run_convergence_study(cfg);
    REQUIRE(run1.size() == 2);
    REQUIRE(run2.size() == run1.size());
    for (std::size_t i = 0; i < run1.size(); ++i) {
        CHECK(run1[i].method == "h_version");
        CHECK(run1[i].flag == "ok");
        CHECK(run1[i].e_u_w1p == run2[i].e_u_w1p);
        CHECK(run1[i].e_S == run2[i].e_S);
        CHECK(run1[i].e_F == run2[i].e_F);
        CHECK(run1[i].e_q == run2[i].e_q);
        CHECK(run1[i].M == run2[i].M);
    }

    // M matches an independent recount of the two spaces
    Mesh m = unit_square_initial();
    for (std::size_t i = 0; i < run1.size(); ++i) {
        VelocitySpace V(m, 4, true);
        PressureSpace Q(m, 3, m.enclosed());
        CHECK(run1[i].M == static_cast<long long>(V.dim()) + Q.dim());
        m = uniform_refine(m);
    }

    // errors shrink under refinement
    CHECK(run1[1].e_F < run1[0].e_F);

    StudyConfig badm = cfg;
    badm.method = "x";
    CHECK_THROWS_AS(run_convergence_study(badm), std::invalid_argument);
}
