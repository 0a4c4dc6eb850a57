#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pullback/attacks.hpp"
#include "pullback/errors.hpp"

using namespace pullback;

namespace {

VaeModel random_model(std::size_t n, std::size_t dz, std::uint64_t seed) {
    RngState rng(seed);
    return build_vae({{8, 6}, dz, false, false}, n, Likelihood::gaussian, 1.0, rng);
}

}  // namespace

TEST_CASE("attack mode names") {
    CHECK(parse_attack_mode("scaled") == AttackMode::eigenvalue_scaled);
    CHECK(parse_attack_mode("unit") == AttackMode::unit_step);
    CHECK(parse_attack_mode(to_string(AttackMode::unit_step)) == AttackMode::unit_step);
    CHECK_THROWS_AS(parse_attack_mode("fgsm"), InvalidArgument);
}

TEST_CASE("demonstration step sizes") {
    CHECK(kDemoDeltaSmall == 0.5233);
    CHECK(kDemoDeltaLarge == 0.7443);
}

TEST_CASE("canonicalize_sign") {
    DenseVector v{-0.6, 0.8};
    canonicalize_sign(v);
    CHECK(v == DenseVector{0.6, -0.8});
    DenseVector w{1e-13, -1.0};
    canonicalize_sign(w);
    CHECK(w == DenseVector{-1e-13, 1.0});
    DenseVector z{0.0, 0.0};
    canonicalize_sign(z);
    CHECK(z == DenseVector{0.0, 0.0});
}

TEST_CASE("eigen attack on a diagonal toy") {
    // J_μ = diag(2, 1), constant σ: Ĝ = diag(4, 1).
    const VaeModel m = oracle::linear_vae(DenseMatrix{{2, 0}, {0, 1}}, 0.0, DenseMatrix::identity(2));
    const DenseVector x{0.5, -0.25};
    const AttackResult r = eigen_attack(m, x, 0.5, 1);
    CHECK(r.eigenvalue == doctest::Approx(4.0));
    CHECK(r.step == doctest::Approx(2.0));
    CHECK(r.x_corrupted[0] == doctest::Approx(2.5));
    CHECK(r.x_corrupted[1] == doctest::Approx(-0.25));
    CHECK(r.direction[0] == doctest::Approx(1.0));
    CHECK(r.latent_shift == doctest::Approx(4.0));

    const AttackResult u = eigen_attack(m, x, 0.5, 1, AttackMode::unit_step);
    CHECK(u.x_corrupted[0] == doctest::Approx(1.0));
    const AttackResult second = eigen_attack(m, x, 0.5, 2);
    CHECK(second.eigenvalue == doctest::Approx(1.0));
    CHECK(second.x_corrupted[1] == doctest::Approx(0.25));
}

TEST_CASE("eigen attack argument checks") {
    const VaeModel m = oracle::linear_vae(DenseMatrix{{2, 0, 0}}, 0.0, DenseMatrix{{1}, {0}, {0}});
    const DenseVector x{0, 0, 0};
    CHECK_THROWS_AS(eigen_attack(m, x, 0.5, 2), RankError);
    CHECK_THROWS_AS(eigen_attack(m, x, 0.5, 0), RankError);
    CHECK_THROWS_AS(eigen_attack(m, x, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(eigen_attack(m, x, -1.0, 1), InvalidArgument);
    CHECK_NOTHROW(eigen_attack(m, x, 0.5, 1));
    const MetricTensor g = metric_at(m, x, MetricSource::encoder_flat);
    const AttackResult zero = eigen_step(m, x, g, 0.0, 1, AttackMode::eigenvalue_scaled);
    CHECK(zero.x_corrupted == x);
    CHECK(zero.latent_shift == 0.0);
    CHECK_THROWS_AS(eigen_step(m, DenseVector{0, 0}, g, 0.1, 1, AttackMode::unit_step), ShapeError);
}

TEST_CASE("top eigendirection beats random directions") {
    RngState rng(5);
    const VaeModel m = random_model(12, 3, 21);
    for (int t = 0; t < 5; ++t) {
        const DenseVector x = oracle::random_vector(12, rng);
        const MetricTensor g = metric_at(m, x, MetricSource::encoder_flat);
        const AttackResult r = eigen_attack(m, x, g, 0.1, 1);
        CHECK(norm2(r.direction) == doctest::Approx(1.0).epsilon(1e-12));
        const double top = quadratic_form(g, r.direction);
        CHECK(top == doctest::Approx(r.eigenvalue).epsilon(1e-10));
        CHECK(top >= oracle::best_random_direction(g.dense(), 1000, rng));
    }
}

TEST_CASE("attack direction sign is canonical") {
    RngState rng(6);
    const VaeModel m = random_model(10, 2, 22);
    const DenseVector x = oracle::random_vector(10, rng);
    for (std::size_t k = 1; k <= 2; ++k) {
        const AttackResult r = eigen_attack(m, x, 0.2, k);
        for (double c : r.direction) {
            if (std::abs(c) > 1e-12) {
                CHECK(c > 0.0);
                break;
            }
        }
    }
}

TEST_CASE("latent shift grows with small steps") {
    RngState rng(7);
    const VaeModel m = random_model(10, 3, 23);
    const DenseVector x = oracle::random_vector(10, rng);
    const MetricTensor g = metric_at(m, x, MetricSource::encoder_flat);
    double prev = 0.0;
    for (double d : {0.01, 0.02, 0.04, 0.08, 0.16}) {
        const AttackResult r = eigen_attack(m, x, g, d, 1);
        CHECK(r.latent_shift > prev);
        prev = r.latent_shift;
    }
}

TEST_CASE("PGA on the identity encoder reaches the budget") {
    const VaeModel m = oracle::linear_vae(DenseMatrix::identity(4), 0.0, DenseMatrix::identity(4));
    RngState rng(8);
    const AttackResult r = pga_latent_attack(m, DenseVector{0.1, 0.2, 0.3, 0.4}, {0.7, 50, 0.5}, rng);
    CHECK(r.latent_shift * r.latent_shift == doctest::Approx(0.49).epsilon(1e-9));
    CHECK(r.step <= 0.7 + 1e-12);
}

TEST_CASE("PGA on a linear encoder finds the top singular direction") {
    RngState rng(9);
    const DenseMatrix w = oracle::random_matrix(3, 6, rng);
    const VaeModel m = oracle::linear_vae(w, 0.0, oracle::random_matrix(6, 3, rng));
    const double lmax = oracle::power_iteration(oracle::naive_matmul(oracle::naive_transpose(w), w));
    const double eta0 = 0.5;
    const AttackResult r = pga_latent_attack(m, oracle::random_vector(6, rng), {eta0, 200, 0.5}, rng);
    const double d = r.latent_shift * r.latent_shift;
    CHECK(d <= eta0 * eta0 * lmax * (1 + 1e-9));
    CHECK(d >= 0.99 * eta0 * eta0 * lmax);
}

TEST_CASE("PGA with a smaller budget moves the latent less") {
    const VaeModel m = random_model(8, 3, 24);
    RngState rng(10);
    const DenseVector x = oracle::random_vector(8, rng);
    RngState a(11), b(11);
    const double big = pga_latent_attack(m, x, {1.0, 100, 0.5}, a).latent_shift;
    const double small = pga_latent_attack(m, x, {0.1, 100, 0.5}, b).latent_shift;
    CHECK(small < big);
    RngState c(1);
    CHECK_THROWS_AS(pga_latent_attack(m, x, {0.0, 10, 0.5}, c), InvalidArgument);
    CHECK_THROWS_AS(pga_latent_attack(m, x, {1.0, 0, 0.5}, c), InvalidArgument);
}

TEST_CASE("random direction baseline") {
    const VaeModel m = random_model(6, 2, 25);
    RngState rng(12);
    const DenseVector x = oracle::random_vector(6, rng);
    const AttackResult r = random_direction_attack(m, x, 0.3, rng);
    CHECK(norm2(subtract(r.x_corrupted, x)) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(norm2(r.direction) == doctest::Approx(1.0).epsilon(1e-12));
    RngState a(3), b(3);
    CHECK(random_direction_attack(m, x, 0.3, a).x_corrupted == random_direction_attack(m, x, 0.3, b).x_corrupted);
    CHECK_THROWS_AS(random_direction_attack(m, x, 0.0, a), InvalidArgument);
}

TEST_CASE("random directions see the average eigenvalue") {
    // E[uᵀGu] = tr(G)/N for u uniform on the sphere.
    const VaeModel m = random_model(10, 3, 26);
    RngState rng(13);
    const DenseVector x = oracle::random_vector(10, rng);
    const MetricTensor g = metric_at(m, x, MetricSource::encoder_flat);
    double acc = 0.0;
    const int n = 20000;
    for (int t = 0; t < n; ++t) acc += quadratic_form(g, random_direction_attack(m, x, 1.0, rng).direction);
    const double want = g.dense().trace() / 10.0;
    CHECK(std::abs(acc / n - want) < 0.05 * want);
}
