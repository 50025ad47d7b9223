#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracle.hpp"
#include "qdl/qstate.hpp"

using namespace qdl;

namespace {

const double kR = (1.0 / std::numbers::sqrt2);

Ket bell_phi_plus() { return Ket(2, {kR, 0.0, 0.0, kR}); }
Ket bell_psi_minus() { return Ket(2, {0.0, kR, -kR, 0.0}); }

StageOperator stage(std::vector<Gate2x2> factors) { return StageOperator(std::move(factors), 1); }

double max_diff(const Ket& v, const oracle::Vec& w) {
    double m = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        m = std::max(m, std::abs(v[i] - w[i]));
    }
    return m;
}

Ket random_ket(std::size_t n, Rng& rng) {
    std::vector<Amplitude> a(std::size_t{1} << n);
    for (auto& x : a) {
        x = {rng.uniform() - 0.5, rng.uniform() - 0.5};
    }
    return Ket(n, std::move(a)).normalized();
}

} // namespace

TEST_CASE("ket construction validates its shape") {
    CHECK_THROWS_AS(Ket(2, {1.0, 0.0, 0.0}), QuantumError);
    CHECK_THROWS_AS(Ket(1, {std::nan(""), 0.0}), QuantumError);
    CHECK_THROWS_AS(Ket::basis(15, 0), QuantumError);
    CHECK(Ket().dimension() == 1);
    CHECK(Ket::basis(3, 5)[5] == Amplitude{1.0, 0.0});
}

TEST_CASE("tensor follows the g h j component ordering") {
    CHECK(tensor(Ket(1.0, 0.0), Ket(0.0, 1.0)) == Ket(2, {0.0, 1.0, 0.0, 0.0}));

    const Ket g(2.0, 3.0), h(5.0, 7.0), j(11.0, 13.0);
    const Ket ghj = tensor(tensor(g, h), j);
    CHECK(ghj.num_qubits() == 3);
    CHECK(ghj[0] == Amplitude{110.0, 0.0});
    CHECK(ghj[7] == Amplitude{273.0, 0.0});
    // Full ordering g1h1j1, g1h1j2, g1h2j1, ..., g2h2j2
    const double gs[] = {2, 3}, hs[] = {5, 7}, js[] = {11, 13};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                CHECK(ghj[static_cast<std::size_t>(a * 4 + b * 2 + c)] == Amplitude{gs[a] * hs[b] * js[c], 0.0});

    CHECK(tensor(g, tensor(h, j)) == ghj);
    CHECK(tensor(g, Ket()) == g);
    CHECK(tensor(Ket(), g) == g);
}

TEST_CASE("tensor of basis kets is the basis ket of the concatenated bits") {
    for (std::uint64_t a = 0; a < 4; ++a) {
        for (std::uint64_t b = 0; b < 2; ++b) {
            CHECK(tensor(Ket::basis(2, a), Ket::basis(1, b)) == Ket::basis(3, a * 2 + b));
        }
    }
}

TEST_CASE("apply_stage on basis inputs") {
    const auto& I = gates::I();
    const auto& H = gates::H();

    const Ket out = apply_stage(stage({I, H, I}), Ket::zeros(3));
    CHECK(max_abs_diff(out, Ket(3, {kR, 0, kR, 0, 0, 0, 0, 0})) < 1e-15);

    Rng rng(3);
    const Ket v = random_ket(3, rng);
    CHECK(apply_stage(stage({I, I, I}), v) == v);

    const Ket minus = apply_stage(stage({I, I, H}), Ket::basis(3, 1));
    CHECK(max_abs_diff(minus, Ket(3, {kR, -kR, 0, 0, 0, 0, 0, 0})) < 1e-15);

    CHECK_THROWS_WITH_AS(apply_stage(stage({I, I}), v), doctest::Contains("2 factors"), QuantumError);
}

TEST_CASE("factor placement matches the explicitly assembled 8x8 matrix") {
    const std::vector<std::pair<Gate2x2, oracle::Mat>> gs = {
        {gates::I(), oracle::I2()}, {gates::H(), oracle::H2()}, {gates::X(), oracle::X2()}, {gates::Z(), oracle::Z2()}};
    Rng rng(11);
    for (const auto& [g, m] : gs) {
        const auto dense = oracle::kron3(oracle::I2(), m, oracle::I2());
        for (int trial = 0; trial < 20; ++trial) {
            const Ket v = random_ket(3, rng);
            const Ket placed = apply_stage(stage({gates::I(), g, gates::I()}), v);
            CHECK(max_diff(placed, oracle::matvec(dense, {v.amplitudes().begin(), v.amplitudes().end()})) < 1e-12);
        }
    }
}

TEST_CASE("built-in gates and stage operators are unitary") {
    for (const auto* g : {&gates::I(), &gates::H(), &gates::X(), &gates::Z()}) {
        CHECK(g->is_unitary());
    }
    CHECK(stage({gates::H(), gates::X(), gates::Z()}).dense().is_unitary());
    CHECK_THROWS_AS(stage({Gate2x2{"bad", {1.0, 1.0, 0.0, 1.0}}}), QuantumError);
}

TEST_CASE("norm is preserved by stages and CNOT") {
    Rng rng(5);
    const std::vector<Gate2x2> pool = {gates::I(), gates::H(), gates::X(), gates::Z()};
    for (int trial = 0; trial < 200; ++trial) {
        const Ket v = random_ket(3, rng);
        std::vector<Gate2x2> f;
        for (int q = 0; q < 3; ++q) {
            f.push_back(pool[rng.next() % pool.size()]);
        }
        CHECK(std::abs(apply_stage(stage(f), v).norm() - v.norm()) < 1e-12);
        const std::size_t c = rng.next() % 3;
        const std::size_t t = (c + 1 + rng.next() % 2) % 3;
        CHECK(apply_controlled_not(c, t, v).norm() == doctest::Approx(v.norm()).epsilon(1e-15));
    }
}

TEST_CASE("double Hadamard is the identity") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const Ket v = random_ket(3, rng);
        for (std::size_t q = 0; q < 3; ++q) {
            CHECK(max_abs_diff(apply_gate(gates::H(), q, apply_gate(gates::H(), q, v)), v) < 1e-12);
        }
    }
}

TEST_CASE("controlled not") {
    CHECK(apply_controlled_not(0, 1, Ket::basis(2, 0b10)) == Ket::basis(2, 0b11));
    CHECK(apply_controlled_not(0, 1, Ket::basis(2, 0b01)) == Ket::basis(2, 0b01));
    const Ket plus0(2, {kR, 0.0, kR, 0.0});
    CHECK(apply_controlled_not(0, 1, plus0) == bell_phi_plus());

    CHECK_THROWS_AS(apply_controlled_not(1, 1, plus0), QuantumError);
    CHECK_THROWS_AS(apply_controlled_not(0, 2, plus0), QuantumError);
}

TEST_CASE("outcome distribution") {
    const auto bell = outcome_distribution(bell_phi_plus(), {0, 1});
    REQUIRE(bell.size() == 2);
    CHECK(bell.at("00") == doctest::Approx(0.5));
    CHECK(bell.at("11") == doctest::Approx(0.5));

    const auto zero = outcome_distribution(Ket::basis(1, 0), {0});
    REQUIRE(zero.size() == 1);
    CHECK(zero.at("0") == 1.0);

    const Ket h = apply_stage(stage({gates::I(), gates::H(), gates::I()}), Ket::zeros(3));
    const auto mid = outcome_distribution(h, {1});
    CHECK(mid.at("0") == doctest::Approx(0.5));
    CHECK(mid.at("1") == doctest::Approx(0.5));

    Rng rng(1);
    const Ket v = random_ket(4, rng);
    const auto p = outcome_probabilities(v, {3, 1});
    double total = 0;
    for (double x : p) total += x;
    CHECK(std::abs(total - 1.0) < 1e-12);

    CHECK_THROWS_AS(outcome_probabilities(Ket(2.0, 0.0), {0}), QuantumError);
    CHECK_THROWS_AS(outcome_probabilities(v, {0, 0}), QuantumError);
    CHECK_THROWS_AS(outcome_probabilities(v, {4}), QuantumError);
}

TEST_CASE("measurement collapses by the Born rule") {
    const Ket bell = bell_phi_plus();
    int ones = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto m = measure(bell, {0}, seed);
        CHECK(m.record.probability == doctest::Approx(0.5));
        const int b = m.record.outcomes[0];
        ones += b;
        CHECK(max_abs_diff(m.post_state, Ket::basis(2, b ? 0b11 : 0b00)) < 1e-15);
    }
    CHECK(ones > 50);
    CHECK(ones < 150);

    const auto eig = measure(tensor(Ket::basis(1, 1), Ket::basis(1, 0)), {0}, 42);
    CHECK(eig.record.outcomes[0] == 1);
    CHECK(eig.record.probability == 1.0);
    CHECK(eig.post_state == Ket::basis(2, 0b10));

    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto m = measure(bell_psi_minus(), {0, 1}, seed);
        CHECK(m.record.outcomes[0] != m.record.outcomes[1]);
    }

    // Same seed, same outcome.
    Rng rng(77);
    const Ket v = random_ket(3, rng);
    CHECK(measure(v, {0, 2}, 1234).record.outcomes == measure(v, {0, 2}, 1234).record.outcomes);

    CHECK_THROWS_AS(measure(Ket(1.0, 1.0), {0}, 1), QuantumError);
}

TEST_CASE("empirical measurement frequencies stay within 3 sigma of the Born probabilities") {
    Rng gen(2024);
    const Ket v = random_ket(3, gen);
    const std::vector<std::size_t> qubits = {2, 0};
    const auto p = outcome_probabilities(v, qubits);
    std::vector<int> counts(p.size());
    constexpr int kSamples = 100000;
    Rng rng(99);
    for (int i = 0; i < kSamples; ++i) {
        const auto m = measure(v, qubits, rng);
        counts[static_cast<std::size_t>(m.record.outcomes[0] * 2 + m.record.outcomes[1])]++;
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double sigma = std::sqrt(p[k] * (1 - p[k]) / kSamples);
        CHECK(std::abs(counts[k] / double(kSamples) - p[k]) <= 3 * sigma + 1e-12);
    }
}

TEST_CASE("partial trace") {
    const auto mixed = partial_trace(bell_phi_plus(), {0});
    CHECK(std::abs(mixed(0, 0) - 0.5) < 1e-15);
    CHECK(std::abs(mixed(1, 1) - 0.5) < 1e-15);
    CHECK(std::abs(mixed(0, 1)) < 1e-15);
    CHECK(mixed.purity() == doctest::Approx(0.5));

    const auto zero = partial_trace(tensor(Ket::basis(1, 0), Ket::basis(1, 1)), {0});
    CHECK(zero.entries() == DensityMatrix::pure(Ket::basis(1, 0)).entries());

    const auto rho = partial_trace(tensor(Ket(0.6, 0.8), bell_phi_plus()), {0});
    CHECK(rho(0, 0).real() == doctest::Approx(0.36));
    CHECK(rho(0, 1).real() == doctest::Approx(0.48));
    CHECK(rho(1, 0).real() == doctest::Approx(0.48));
    CHECK(rho(1, 1).real() == doctest::Approx(0.64));
    CHECK(rho.is_valid());

    CHECK_THROWS_AS(partial_trace(bell_phi_plus(), {2}), QuantumError);
}

TEST_CASE("partial trace of product states is pure") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const Ket v = tensor(tensor(random_ket(1, rng), random_ket(2, rng)), random_ket(1, rng));
        for (const auto& keep : std::vector<std::vector<std::size_t>>{{0}, {1, 2}, {3}, {2, 1}}) {
            const auto rho = partial_trace(v, keep);
            CHECK(std::abs(rho.purity() - 1.0) < 1e-10);
            CHECK(std::abs(rho.trace() - Amplitude{1.0}) < 1e-12);
        }
    }
}

TEST_CASE("fidelity") {
    const auto zero = DensityMatrix::pure(Ket::basis(1, 0));
    CHECK(fidelity(zero, Ket::basis(1, 0)) == 1.0);
    CHECK(fidelity(zero, Ket::basis(1, 1)) == 0.0);
    CHECK(fidelity(partial_trace(bell_phi_plus(), {1}), Ket::basis(1, 0)) == doctest::Approx(0.5));
    CHECK_THROWS_AS(fidelity(zero, bell_phi_plus()), QuantumError);
}

TEST_CASE("trace distance") {
    const auto a = DensityMatrix::pure(Ket::basis(1, 0));
    const auto b = DensityMatrix::pure(Ket::basis(1, 1));
    CHECK(trace_distance(a, b) == doctest::Approx(1.0));
    CHECK(trace_distance(a, a) == 0.0);
    CHECK(trace_distance(a, partial_trace(bell_phi_plus(), {0})) == doctest::Approx(0.5));
}

TEST_CASE("correlations of Bell states") {
    CHECK(correlation(bell_phi_plus(), 0, 1, Basis::Z) == 1.0);
    CHECK(correlation(bell_psi_minus(), 0, 1, Basis::Z) == -1.0);
    CHECK(correlation(bell_phi_plus(), 0, 1, Basis::X) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(correlation(bell_psi_minus(), 0, 1, Basis::X) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(correlation(tensor(Ket::basis(1, 0), Ket(kR, kR)), 0, 1, Basis::Z) == doctest::Approx(0.0));
    CHECK_THROWS_AS(correlation(bell_phi_plus(), 1, 1, Basis::Z), QuantumError);
}

TEST_CASE("X-basis correlation of Phi+ by brute force over amplitudes") {
    // Expand Phi+ in the X eigenbasis: <s t|Phi+> with |+> = (1,1)/sqrt2, |-> = (1,-1)/sqrt2.
    const double eig[2][2] = {{kR, kR}, {kR, -kR}};
    const Ket phi = bell_phi_plus();
    double e = 0.0;
    for (int s = 0; s < 2; ++s) {
        for (int t = 0; t < 2; ++t) {
            Amplitude amp = 0.0;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    amp += eig[s][a] * eig[t][b] * phi[static_cast<std::size_t>(a * 2 + b)];
            e += std::norm(amp) * (s == t ? 1.0 : -1.0);
        }
    }
    CHECK(std::abs(e - 1.0) < 1e-15);
    CHECK(std::abs(correlation(phi, 0, 1, Basis::X) - e) < 1e-12);
}

TEST_CASE("ket JSON layout") {
    const Ket v(Amplitude{0.6, 0.0}, Amplitude{0.0, 0.8});
    const Json j = ket_to_json(v);
    CHECK(j.dump() == R"({"num_qubits":1,"amplitudes":[[0.6,0.0],[0.0,0.8]]})");
    CHECK(ket_from_json(j) == v);
}
