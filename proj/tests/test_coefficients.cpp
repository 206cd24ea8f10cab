#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "stabcert/coefficients.hpp"
#include "stabcert/errors.hpp"

using namespace stabcert;

TEST_SUITE("coefficients") {

TEST_CASE("constant preset evaluates exactly") {
    const CoefficientModel m = make_constant(1.0, 1.2, 0.5, 0.0, 10.0);
    const CoefficientBundle b = eval_bundle(m, 3.7);
    CHECK(b.eps == doctest::Approx(1.0));
    CHECK(b.eps_d1 == doctest::Approx(0.0));
    CHECK(b.eps_d2 == doctest::Approx(0.0));
    CHECK(b.cc == doctest::Approx(1.2));
    CHECK(b.cc_d1 == doctest::Approx(0.0));
    CHECK(m.a == doctest::Approx(0.5));
}

TEST_CASE("evaluation outside the horizon throws") {
    const CoefficientModel m = make_constant(1.0, 1.0, 0.0, 0.0, 10.0);
    CHECK_THROWS_AS((void)eval_bundle(m, -1.0), std::domain_error);
    CHECK_THROWS_AS((void)eval_bundle(m, 10.5), std::domain_error);
}

TEST_CASE("algebraic decay preset derivatives at the left end") {
    const CoefficientModel m = make_example1();
    const CoefficientBundle b = eval_bundle(m, 0.0);
    CHECK(b.eps == doctest::Approx(1.0));
    CHECK(b.eps_d1 == doctest::Approx(-1.0));
    CHECK(b.eps_d2 == doctest::Approx(2.0));
    CHECK(b.cc == doctest::Approx(1.2));
    CHECK(b.cc_d1 == doctest::Approx(0.0));
}

TEST_CASE("oscillating preset hits its closed-form values at t = 0") {
    const CoefficientModel m = make_example3();
    const CoefficientBundle b = eval_bundle(m, 0.0);
    CHECK(b.eps == doctest::Approx(1.0));
    CHECK(b.cc == doctest::Approx(3.0));
    CHECK(b.cc_d1 == doctest::Approx(-0.5));
}

TEST_CASE("positive and negative parts of Cdot recompose") {
    const CoefficientModel m = make_example3();
    for (double t : {0.0, 0.4, 1.3, 2.9, 7.7}) {
        const CoefficientBundle b = eval_bundle(m, t);
        CHECK(b.cc_d1_pos >= 0.0);
        CHECK(b.cc_d1_neg <= 0.0);
        CHECK(b.cc_d1_pos + b.cc_d1_neg == doctest::Approx(b.cc_d1));
        CHECK(b.cc_d1_pos * b.cc_d1_neg == doctest::Approx(0.0));
    }
}

TEST_CASE("decay-rate infimum is the safeguarded grid minimum") {
    SUBCASE("constant coefficients") {
        const CoefficientModel m = make_constant(1.0, 1.2, 0.0);
        CHECK(infimum_mu(m) == doctest::Approx(0.99 * 0.6));
    }
    SUBCASE("algebraic decay preset") {
        // min over s = 1+t of (1.2 s^2 + 1)/(s^2 + s) sits near s = 2.05.
        const CoefficientModel m = make_example1();
        CHECK(infimum_mu(m) == doctest::Approx(0.9565).epsilon(1e-3));
    }
    SUBCASE("non-positive infimum yields zero") {
        const CoefficientModel m = make_constant(1.0, -1.0, 0.0);
        CHECK(infimum_mu(m) == 0.0);
    }
}

TEST_CASE("admissibility scan flags and margin") {
    const CoefficientModel m = make_constant(1.0, 1.2, 0.0);
    SUBCASE("all clauses pass with slack") {
        const AdmissibilityReport rep = check_condi4(m, 1.0, 0.5);
        CHECK(rep.all_ok());
        CHECK(rep.margin == doctest::Approx(0.2));
        CHECK(rep.eps_inf == doctest::Approx(1.0));
        CHECK(rep.cc_inf == doctest::Approx(1.2));
    }
    SUBCASE("boundary decay rate still passes") {
        const AdmissibilityReport rep = check_condi4(m, 1.0, 0.6);
        CHECK(rep.all_ok());
        CHECK(rep.margin == doctest::Approx(0.0));
    }
    SUBCASE("too large a decay rate fails clause 4 only") {
        const AdmissibilityReport rep = check_condi4(m, 1.0, 0.7);
        CHECK_FALSE(rep.all_ok());
        CHECK_FALSE(rep.cond_flags[3]);
        CHECK(rep.cond_flags[0]);
        CHECK(rep.cond_flags[1]);
        CHECK(rep.cond_flags[2]);
        CHECK(rep.cond_flags[4]);
    }
    SUBCASE("negative stiffness fails clause 1") {
        const AdmissibilityReport rep = check_condi4(make_constant(1.0, -1.0, 0.0), 1.0, 0.1);
        CHECK_FALSE(rep.cond_flags[0]);
    }
    SUBCASE("negative total damping fails clause 3") {
        const AdmissibilityReport rep = check_condi4(make_constant(0.5, 1.0, -1.0), 1.0, 0.1);
        CHECK_FALSE(rep.cond_flags[2]);
    }
}

TEST_CASE("horizon bounds prefer exact preset values") {
    const CoefficientModel m = make_example1();
    const HorizonBounds hb = horizon_bounds(m);
    CHECK(hb.eps_inf == doctest::Approx(1.0 / 51.0));
    CHECK(hb.eps_sup == doctest::Approx(1.0));
    CHECK(hb.cc_inf == doctest::Approx(1.2));
}

TEST_CASE("sampled model reproduces smooth closed forms") {
    const int n = 2001;
    std::vector<double> t(n), eps(n), cc(n);
    for (int i = 0; i < n; ++i) {
        t[i] = 10.0 * i / (n - 1);
        eps[i] = 2.0 + std::sin(t[i]);
        cc[i] = 3.0 + std::cos(t[i]);
    }
    const CoefficientModel m = make_sampled_from_values(t, eps, cc, 0.5);
    CHECK(m.kind == CoefficientKind::Sampled);
    CHECK_FALSE(m.tail_ok);
    for (double tt : {0.0, 1.234, 5.0, 9.876, 10.0}) {
        const CoefficientBundle b = eval_bundle(m, tt);
        CHECK(b.eps == doctest::Approx(2.0 + std::sin(tt)).epsilon(1e-6));
        CHECK(b.cc == doctest::Approx(3.0 + std::cos(tt)).epsilon(1e-6));
        CHECK(b.eps_d1 == doctest::Approx(std::cos(tt)).epsilon(1e-4));
        CHECK(b.eps_d2 == doctest::Approx(-std::sin(tt)).epsilon(1e-3));
        CHECK(b.cc_d1 == doctest::Approx(-std::sin(tt)).epsilon(1e-4));
    }
}

TEST_CASE("sampled CSV round trip and validation") {
    const std::string path = "coeff_table_test.csv";
    {
        std::ofstream out(path);
        out << "t,eps,C\n";
        for (int i = 0; i <= 100; ++i) {
            const double t = 0.1 * i;
            out << t << "," << 1.0 + 0.01 * t << "," << 2.0 - 0.01 * t << "\n";
        }
    }
    const CoefficientModel m = make_sampled_from_csv(path, 1.0);
    const CoefficientBundle b = eval_bundle(m, 5.0);
    CHECK(b.eps == doctest::Approx(1.05).epsilon(1e-9));
    CHECK(b.cc == doctest::Approx(1.95).epsilon(1e-9));
    CHECK(b.eps_d1 == doctest::Approx(0.01).epsilon(1e-6));
    std::remove(path.c_str());

    SUBCASE("wrong header is rejected") {
        const std::string bad = "coeff_bad_header.csv";
        {
            std::ofstream out(bad);
            out << "time,eps,C\n0,1,1\n1,1,1\n";
        }
        CHECK_THROWS_AS((void)make_sampled_from_csv(bad, 0.0), config_error);
        std::remove(bad.c_str());
    }
    SUBCASE("non-uniform spacing is rejected") {
        std::vector<double> t{0.0, 1.0, 2.5};
        std::vector<double> e{1.0, 1.0, 1.0};
        std::vector<double> c{1.0, 1.0, 1.0};
        CHECK_THROWS_AS((void)make_sampled_from_values(t, e, c, 0.0), config_error);
    }
}

TEST_CASE("preset factory applies parameter overrides") {
    const CoefficientModel m = make_preset("example1", {{"eps0", 2.0}, {"C", 3.0}}, 0.0, 10.0);
    const CoefficientBundle b = eval_bundle(m, 0.0);
    CHECK(b.eps == doctest::Approx(2.0));
    CHECK(b.cc == doctest::Approx(3.0));
    CHECK_THROWS_AS((void)make_preset("nonsense", {}, 0.0, 1.0), config_error);
}

}  // TEST_SUITE
