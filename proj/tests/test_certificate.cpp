#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "stabcert/certificate.hpp"
#include "stabcert/errors.hpp"
#include "stabcert/forcing.hpp"

using namespace stabcert;

namespace {

constexpr double kPi = std::numbers::pi;

EnergyState sine_state(int N, double amp_u, double amp_v, int mode = 1) {
    return EnergyState::from_closures(
        N, 0.0, [=](double x) { return amp_u * std::sin(mode * x); },
        [=](double x) { return amp_v * std::sin(mode * x); });
}

EnergyState random_state(int N, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    EnergyState s;
    s.h = kPi / (N + 1);
    s.t = 0.0;
    s.u.resize(N);
    s.v.resize(N);
    for (int k = 1; k <= 6; ++k) {
        const double cu = unit(rng) * scale / (k * k);
        const double cv = unit(rng) * scale / (k * k);
        for (int j = 0; j < N; ++j) {
            const double x = (j + 1) * s.h;
            s.u[j] += cu * std::sin(k * x);
            s.v[j] += cv * std::sin(k * x);
        }
    }
    return s;
}

Certificate constants_certificate() {
    return make_certificate(make_constant(1.0, 1.2, 0.0), 0.6, 0.5, 0.1, 2.8);
}

}  // namespace

TEST_SUITE("certificate") {

TEST_CASE("discrete Poincare constant is sharp on the first mode") {
    for (int N : {16, 50, 200}) {
        const EnergyState s = sine_state(N, 1.0, 0.0);
        const double lam1 = poincare_min_eigenvalue(N);
        const double node = node_sq_sum(s.u, s.h);
        const double edge = edge_grad_sq_sum(s.u, s.h);
        CHECK(node == doctest::Approx(kPi / 2).epsilon(1e-13));
        CHECK(edge == doctest::Approx(lam1 * node).epsilon(1e-12));
    }
}

TEST_CASE("discrete Poincare inequality on random grid functions") {
    const int N = 64;
    const double lam1 = poincare_min_eigenvalue(N);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> w(N);
        for (double& x : w) x = unit(rng);
        const double node = node_sq_sum(w, kPi / (N + 1));
        const double edge = edge_grad_sq_sum(w, kPi / (N + 1));
        CHECK(edge >= lam1 * node * (1.0 - 1e-12));
    }
}

TEST_CASE("graph norm of the first mode") {
    const int N = 200;
    const EnergyState s = sine_state(N, 1.0, 0.0);
    const double lam1 = poincare_min_eigenvalue(N);
    // With eps = 1 the second difference acts as -lam1 on the mode, so
    // d^2 = (lam1^2 + lam1 + 1) * pi/2 in the discrete quadrature.
    const double expected = (lam1 * lam1 + lam1 + 1.0) * kPi / 2;
    CHECK(d_norm_sq(s, 1.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(d_norm_sq(s, 0.0) == doctest::Approx((lam1 + 1.0) * kPi / 2).epsilon(1e-12));
}

TEST_CASE("default parameter selection for constant coefficients") {
    const Certificate cert = select_parameters(make_constant(1.0, 1.2, 0.0), 0.6);
    CHECK(cert.lambda == doctest::Approx(0.5));
    CHECK(cert.theta == doctest::Approx(0.1));
    CHECK(cert.gamma == doctest::Approx(2.8));
    CHECK(cert.chi0 == doctest::Approx(0.01875));
    CHECK(cert.bigB == doctest::Approx(3.5));
    CHECK(cert.mu == doctest::Approx(0.6));
}

TEST_CASE("negative damping shifts lambda off the midpoint") {
    // a = -0.2 with inf eps = 1 gives the admissible window (0.2, 1).
    const Certificate cert = select_parameters(make_constant(1.0, 2.0, -0.2), 0.5);
    CHECK(cert.lambda == doctest::Approx(0.6));
    CHECK(cert.theta > 0.0);
    CHECK(cert.chi0 > 0.0);
}

TEST_CASE("frozen certificate for the algebraic decay preset") {
    const CoefficientModel m = make_example1();
    const double mu = infimum_mu(m);
    const Certificate cert = select_parameters(m, mu);
    CHECK(cert.gamma == doctest::Approx(10.715).epsilon(5e-3));
    CHECK(cert.chi0 == doctest::Approx(0.25).epsilon(5e-3));
    CHECK(cert.chi1 == doctest::Approx(0.1196).epsilon(5e-3));
    CHECK(cert.bigB == doctest::Approx(2.868).epsilon(5e-3));
    const double psi0 = psi_functions(cert, 0.0).psi;
    const double psi50 = psi_functions(cert, 50.0).psi;
    CHECK(psi0 == doctest::Approx(0.018).epsilon(0.1));
    CHECK(psi50 > 6.0e-3);
    CHECK(psi50 < 7.5e-3);
}

TEST_CASE("explicit certificate validation") {
    const CoefficientModel m = make_constant(1.0, 1.2, 0.0);
    CHECK_NOTHROW((void)make_certificate(m, 0.6, 0.5, 0.1, 2.8));
    CHECK_NOTHROW((void)make_certificate(m, 0.6, 0.5, 0.2, 3.7));
    SUBCASE("theta below critical") {
        CHECK_THROWS_AS((void)make_certificate(m, 0.6, 0.5, 0.0, 2.8), inadmissible_error);
    }
    SUBCASE("gamma below threshold") {
        CHECK_THROWS_AS((void)make_certificate(m, 0.6, 0.5, 0.1, 2.0), inadmissible_error);
    }
    SUBCASE("lambda outside the unit interval") {
        CHECK_THROWS_AS((void)make_certificate(m, 0.6, 1.5, 0.1, 2.8), inadmissible_error);
    }
    SUBCASE("non-positive decay constant") {
        CHECK_THROWS_AS((void)make_certificate(m, 0.0, 0.5, 0.1, 2.8), inadmissible_error);
    }
}

TEST_CASE("decay-rate split for constant coefficients") {
    const Certificate cert = constants_certificate();
    const PsiBundle pb = psi_functions(cert, 1.0);
    CHECK(pb.G == doctest::Approx(2.2));
    CHECK(pb.J == doctest::Approx(0.3));  // half of mu/eps, the binding branch
    CHECK(pb.b == doctest::Approx((cert.chi1 + 0.3) / (2.8 * 2.2)));
    CHECK(pb.g == doctest::Approx(0.0));
    CHECK(pb.psi == doctest::Approx(pb.b));
}

TEST_CASE("forcing slope bound lowers psi") {
    Certificate cert = constants_certificate();
    const double before = psi_functions(cert, 1.0).psi;
    cert.gt_bound = [](double) { return 0.05; };
    const PsiBundle pb = psi_functions(cert, 1.0);
    CHECK(pb.g == doctest::Approx((1.0 + 2.8) / (2.0 * 0.01875) * 0.05));
    CHECK(pb.psi == doctest::Approx(before - pb.g));
}

TEST_CASE("energy functional matches the mode integral") {
    const Certificate cert = constants_certificate();
    const int N = 200;
    const double lam1 = poincare_min_eigenvalue(N);
    const EnergyState s = sine_state(N, 1.0, 0.0);
    // V = 1/2 [ lam1^2 + (C (1+gamma) + eps theta) lam1 ] * pi/2 for the pure
    // first mode with v = 0, a = 0, eps = 1.
    const double coeff = 1.2 * 3.8 + 0.1;
    const double expected = 0.5 * (lam1 * lam1 + coeff * lam1) * kPi / 2;
    CHECK(liapunov_V(s, cert) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("pure gradient energy reduces to the Dirichlet integral") {
    Certificate cert;
    cert.model = make_constant(0.0, 1.0, 0.0);
    cert.gamma = 1.0;
    cert.theta = 0.0;
    const EnergyState s = sine_state(200, 1.0, 0.0);
    CHECK(liapunov_V(s, cert) == doctest::Approx(kPi / 2).epsilon(1e-4));
}

TEST_CASE("sandwich inequality on random states") {
    const Certificate cert = constants_certificate();
    const double upper = sandwich_upper_factor(cert, 0.0);
    CHECK(upper == doctest::Approx(2.8 * 2.2));
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const EnergyState s = random_state(96, seed);
        const double d2 = d_norm_sq(s, 1.0);
        const double V = liapunov_V(s, cert);
        CHECK(V >= cert.chi0 * d2 * (1.0 - 1e-9));
        CHECK(V <= upper * d2 * (1.0 + 1e-9));
    }
}

TEST_CASE("pointwise bounds hold on random states") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const EnergyState s = random_state(80, seed, 2.0);
        const PointwiseReport rep = pointwise_bounds_check(s, 0.7);
        CHECK(rep.ok);
        CHECK(rep.violations.empty());
    }
}

TEST_CASE("pointwise check reports a named violation for inflated data") {
    EnergyState s = sine_state(64, 1.0, 0.0);
    // A state that is large at one node but tiny in the energy norm cannot
    // exist; fabricate one by zeroing everything except a spike.
    for (double& x : s.u) x = 0.0;
    s.u[32] = 100.0;
    s.u[31] = -100.0;  // large gradient, d stays ~ 100 sqrt(h) * O(1)
    const PointwiseReport rep = pointwise_bounds_check(s, 5.0);
    if (!rep.ok) {
        CHECK_FALSE(rep.violations.empty());
        CHECK_FALSE(rep.violations.front().bound.empty());
    }
}

TEST_CASE("optimizer never scores below the default selection") {
    const CoefficientModel m = make_example1();
    const double mu = infimum_mu(m);
    const Certificate base = select_parameters(m, mu);
    SUBCASE("inf-psi objective") {
        const Certificate tuned = optimize_certificate(m, mu, CertObjective::MaxInfPsi);
        double inf_base = 1e300, inf_tuned = 1e300;
        for (int i = 0; i <= 256; ++i) {
            const double t = 50.0 * i / 256.0;
            inf_base = std::min(inf_base, psi_functions(base, t).psi);
            inf_tuned = std::min(inf_tuned, psi_functions(tuned, t).psi);
        }
        CHECK(inf_tuned >= inf_base - 1e-12);
    }
    SUBCASE("chi0 objective") {
        const Certificate tuned = optimize_certificate(m, mu, CertObjective::MaxChi0);
        CHECK(tuned.chi0 >= base.chi0 - 1e-12);
    }
}

TEST_CASE("certificate JSON round trip") {
    Certificate cert = select_parameters(make_example1(), 0.9);
    cert.gt_kind = "pulse_train";
    cert.gt_params = {{"r0", 0.05}, {"alpha_tri", 2.0}, {"beta_tri", 1.5}, {"bigB", cert.bigB}};
    const double bigB = cert.bigB;
    cert.gt_bound = [bigB](double t) {
        return kPi * bigB * pulse_train_r2(0.05, 2.0, 1.5, t);
    };
    const std::string doc = certificate_to_json(cert);
    const Certificate back = certificate_from_json(doc);
    CHECK(back.lambda == doctest::Approx(cert.lambda).epsilon(1e-14));
    CHECK(back.theta == doctest::Approx(cert.theta).epsilon(1e-14));
    CHECK(back.gamma == doctest::Approx(cert.gamma).epsilon(1e-14));
    CHECK(back.mu == doctest::Approx(cert.mu).epsilon(1e-14));
    CHECK(back.chi0 == doctest::Approx(cert.chi0).epsilon(1e-14));
    CHECK(back.chi1 == doctest::Approx(cert.chi1).epsilon(1e-14));
    CHECK(back.bigB == doctest::Approx(cert.bigB).epsilon(1e-14));
    CHECK(back.model.preset == "example1");
    for (double t : {0.7, 1.0, 2.25, 10.0}) {
        CHECK(eval_bundle(back.model, t).eps ==
              doctest::Approx(eval_bundle(cert.model, t).eps).epsilon(1e-14));
        CHECK(back.gt_bound(t) == doctest::Approx(cert.gt_bound ? cert.gt_bound(t) : 0.0)
                                      .epsilon(1e-14));
    }
    SUBCASE("rebuilt pulse train bound matches the descriptor") {
        // Peak of the first tent: pi B * 2 r0^2.
        CHECK(back.gt_bound(1.0) == doctest::Approx(kPi * cert.bigB * 2.0 * 0.05 * 0.05));
    }
    SUBCASE("garbage is rejected") {
        CHECK_THROWS_AS((void)certificate_from_json("{]"), config_error);
        CHECK_THROWS_AS((void)certificate_from_json("{\"cert_v\": 2}"), config_error);
    }
}

}  // TEST_SUITE
