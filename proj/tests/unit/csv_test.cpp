#include "dkpc/csv.hpp"
#include "dkpc/lti.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace dkpc;
using namespace dkpc::csv;

namespace {

SweepRow row(metrics::ControllerTag c, double q, double r, double lg, std::optional<double> ls, double eps,
             double ju, std::string status = "ok") {
    SweepRow s;
    s.metrics.controller = c;
    s.metrics.config = {q, r, lg, ls};
    s.metrics.epsilon = eps;
    s.metrics.j_u = ju;
    s.status = std::move(status);
    return s;
}

std::size_t error_line(const std::string& text) {
    std::istringstream in(text);
    try {
        read_sweep(in);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

} // namespace

TEST_CASE("doubles print shortest and parse back exactly") {
    CHECK(format_double(0.07) == "0.07");
    CHECK(format_double(1e5) == "1e+05");
    CHECK(format_double(1e4) == "10000");
    CHECK(format_double(-0.0) == "-0");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(std::isnan(parse_double("nan")));
    CHECK(parse_double("inf") == std::numeric_limits<double>::infinity());
    CHECK(parse_double("+2.5") == 2.5);

    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::uint64_t> bits;
    for (int i = 0; i < 2000; ++i) {
        double v;
        const std::uint64_t b = bits(rng);
        std::memcpy(&v, &b, sizeof v);
        if (!std::isfinite(v)) continue;
        CHECK(parse_double(format_double(v)) == v);
    }
}

TEST_CASE("malformed numbers") {
    CHECK_THROWS_AS(parse_double(""), ParseError);
    CHECK_THROWS_AS(parse_double("1.5x"), ParseError);
    CHECK_THROWS_AS(parse_double(" 1"), ParseError);
    try {
        parse_double("abc", 12);
    } catch (const ParseError& e) {
        CHECK(e.line() == 12);
        CHECK(std::string(e.what()).rfind("line 12:", 0) == 0);
    }
}

TEST_CASE("table reader") {
    std::istringstream in("# config_hash=abc\n# a note without equals\n#  dt = 0.5 \nx,y\n1,2\n\n3,\n# k=late\n");
    const Table t = read_table(in);
    CHECK(t.meta.at("config_hash") == "abc");
    CHECK(t.meta.at("dt") == "0.5");
    CHECK(t.meta.count("k") == 0); // after the header: ignored
    CHECK(t.header == std::vector<std::string>{"x", "y"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1] == std::vector<std::string>{"3", ""});
    CHECK(t.row_lines == std::vector<std::size_t>{5, 7});
    CHECK(t.column("y") == 1);
    CHECK_THROWS_AS(t.column("z"), std::invalid_argument);

    std::istringstream empty("# only comments\n");
    CHECK_THROWS_AS(read_table(empty), ParseError);
    std::istringstream ragged("a,b\n1,2\n1,2,3\n");
    try {
        read_table(ragged);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("trajectory round trip") {
    Trajectory t;
    t.u = uniform_inputs(3, 25, -1, 1, 1);
    t.y = uniform_inputs(2, 25, -1e-3, 1e-3, 2);
    t.dt = 0.02;
    std::stringstream buf;
    write_trajectory(buf, t, "0123456789abcdef");
    const std::string text = buf.str();
    CHECK(text.rfind("# config_hash=0123456789abcdef\n", 0) == 0);
    CHECK(text.find("k,t,u_1,u_2,u_3,y_1,y_2\n") != std::string::npos);
    const Trajectory back = read_trajectory(buf);
    CHECK(back.u == t.u);
    CHECK(back.y == t.y);
    CHECK(back.dt == 0.02);

    std::istringstream gap("k,t,u_1,y_1\n0,0,1,1\n2,0.02,1,1\n");
    CHECK_THROWS_AS(read_trajectory(gap), ParseError);
    std::istringstream noy("k,t,u_1\n0,0,1\n");
    CHECK_THROWS_AS(read_trajectory(noy), std::invalid_argument);
}

TEST_CASE("trace columns") {
    control::ClosedLoopTrace tr;
    tr.activation_step = 1;
    for (Index k = 0; k < 2; ++k) {
        control::TraceStep s;
        s.k = k;
        s.t = 0.01 * static_cast<double>(k);
        s.active = k == 1;
        s.u = Vector::Constant(2, 0.5 * static_cast<double>(k));
        s.y = Vector::Constant(2, 0.1);
        if (s.active) {
            s.status = qp::QpStatus::Solved;
            s.iterations = 25;
        }
        tr.steps.push_back(s);
    }
    std::ostringstream out;
    write_trace(out, tr, "h");
    std::istringstream in(out.str());
    const Table t = read_table(in);
    CHECK(t.header == std::vector<std::string>{"k", "t", "active", "u_1", "u_2", "y_1", "y_2", "cost", "status", "iters"});
    CHECK(t.meta.at("activation_step") == "1");
    CHECK(t.rows[0][8] == "inactive");
    CHECK(t.rows[1][8] == qp::to_string(qp::QpStatus::Solved));
    CHECK(t.rows[1][9] == "25");
}

TEST_CASE("sweep round trip") {
    using metrics::ControllerTag;
    const std::vector<SweepRow> rows{
        row(ControllerTag::Dkpc, 300, 0.01, 500, std::nullopt, 1.25, 3.5),
        row(ControllerTag::Deepc, 10, 1, 1, 1e4, 0.1, 0.2),
        row(ControllerTag::Deepc, 10, 1, 10, 1e5, std::nan(""), std::nan(""), "error: infeasible"),
    };
    std::stringstream buf;
    write_sweep(buf, rows, "h");
    CHECK(buf.str().find("controller,q,r,lambda_g,lambda_sigma,epsilon,j_u,status\n") != std::string::npos);
    CHECK(buf.str().find("dkpc,300,0.01,500,,1.25,3.5,ok\n") != std::string::npos);
    const auto back = read_sweep(buf);
    REQUIRE(back.size() == 3);
    CHECK(back[0].metrics.config == rows[0].metrics.config);
    CHECK(back[1].metrics.config.lambda_sigma == 1e4);
    CHECK(back[1].metrics.epsilon == 0.1);
    CHECK(back[0].metrics.ok);
    CHECK_FALSE(back[2].metrics.ok);
    CHECK(back[2].status == "error: infeasible");
}

TEST_CASE("sweep files without a status column are accepted") {
    std::istringstream in("controller,q,r,lambda_g,lambda_sigma,epsilon,j_u\ndkpc,1,1,1,,2,3\n");
    const auto rows = read_sweep(in);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].status == "ok");
}

TEST_CASE("malformed sweep rows report their line") {
    const std::string head = "# config_hash=x\ncontroller,q,r,lambda_g,lambda_sigma,epsilon,j_u,status\n";
    CHECK(error_line(head + "dkpc,1,1,1,,1,1,ok\nmpc,1,1,1,,1,1,ok\n") == 4);
    CHECK(error_line(head + "dkpc,1,1,1,,one,1,ok\n") == 3);
    CHECK(error_line(head + "deepc,1,1,1,,1,1,ok\n") == 3);
    CHECK(error_line(head + "dkpc,1,1,1,5,1,1,ok\n") == 3);
    CHECK(error_line(head + "dkpc,1,1,1,,-1,1,ok\n") == 3);
    CHECK(error_line(head + "dkpc,1,1,1,,1,1\n") == 3);
    std::istringstream missing("controller,q,r,epsilon,j_u\n");
    CHECK_THROWS_AS(read_sweep(missing), std::invalid_argument);
}

TEST_CASE("frontier and winner files") {
    metrics::FrontierPoint p;
    p.j_u = 2.0;
    p.epsilon = 0.5;
    p.config = {100, 0.1, 10, std::nullopt};
    std::ostringstream f;
    write_frontier(f, {p}, "h");
    CHECK(f.str() == "# config_hash=h\ncontroller,q,r,lambda_g,lambda_sigma,epsilon,j_u\ndkpc,100,0.1,10,,0.5,2\n");

    metrics::RunMetrics d, e;
    d.config = {1, 2, 3, std::nullopt};
    e.controller = metrics::ControllerTag::Deepc;
    e.config = {4, 5, 6, 1e4};
    std::ostringstream w;
    write_winners(w, {{0.5, 0, 0.25, 0, 0.75}}, {d}, {e}, "h");
    CHECK(w.str().find("0.5,1,2,3,0.25,4,5,6,10000,0.75,dkpc\n") != std::string::npos);
}
