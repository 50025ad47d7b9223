#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracle.hpp"
#include "qdl/teleport.hpp"

using namespace qdl;
using namespace qdl::teleport;

namespace {

const double kR = (1.0 / std::numbers::sqrt2);

oracle::Mat to_oracle(const DenseMatrix& m) {
    oracle::Mat out(m.rows(), std::vector<oracle::C>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            out[r][c] = m(r, c);
    return out;
}

bool exactly_equal(const oracle::Mat& a, const oracle::Mat& b) { return a == b; }

TeleportPipeline corrupted_pipeline() {
    auto p = build_canonical_pipeline();
    p.steps[5].action = StageOperator({gates::I(), gates::I(), gates::I()}, 6);
    return p;
}

} // namespace

TEST_CASE("canonical pipeline layout") {
    const auto p = build_canonical_pipeline();
    REQUIRE(p.steps.size() == 10);
    for (std::size_t i = 0; i < p.steps.size(); ++i) {
        CHECK(p.steps[i].index == static_cast<int>(i) + 1);
    }
    CHECK(std::get<StageOperator>(p.steps[0].action).factors() ==
          std::vector<Gate2x2>{gates::I(), gates::I(), gates::I()});
    CHECK(std::get<StageOperator>(p.steps[1].action).factors() ==
          std::vector<Gate2x2>{gates::I(), gates::H(), gates::I()});
    CHECK(std::get<CnotStep>(p.steps[2].action) == CnotStep{1, 2});
    CHECK(std::get<CnotStep>(p.steps[4].action) == CnotStep{0, 1});
    CHECK(std::get<StageOperator>(p.steps[5].action).factors() ==
          std::vector<Gate2x2>{gates::H(), gates::I(), gates::I()});
    CHECK(std::get<StageOperator>(p.steps[9].action).factors() ==
          std::vector<Gate2x2>{gates::I(), gates::I(), gates::H()});
}

TEST_CASE("step 2 and step 10 dense matrices are the Kronecker products I H I and I I H") {
    const auto p = build_canonical_pipeline();
    const auto step2 = dense(p.steps[1], 3);
    const std::vector<Amplitude> row0(step2.row(0).begin(), step2.row(0).end());
    CHECK(row0 == std::vector<Amplitude>{kR, 0, kR, 0, 0, 0, 0, 0});
    CHECK(exactly_equal(to_oracle(step2), oracle::kron3(oracle::I2(), oracle::H2(), oracle::I2())));
    CHECK(exactly_equal(to_oracle(dense(p.steps[9], 3)), oracle::kron3(oracle::I2(), oracle::I2(), oracle::H2())));
    CHECK(exactly_equal(to_oracle(dense(p.steps[2], 3)), oracle::cnot(3, 1, 2)));
    CHECK(exactly_equal(to_oracle(dense(p.steps[4], 3)), oracle::cnot(3, 0, 1)));
}

TEST_CASE("step 1 reproduces the symbolic stage-1 vector") {
    const Ket g(2.0, 3.0), h(5.0, 7.0), j(11.0, 13.0);
    const Ket input = tensor(tensor(g, h), j);
    const auto trace = run_unitary_on(build_canonical_pipeline(), input);
    CHECK(trace.stage_vectors.front() == input);
}

TEST_CASE("run_unitary") {
    const auto p = build_canonical_pipeline();

    const auto zero = run_unitary(p, Ket::basis(1, 0));
    REQUIRE(zero.stage_vectors.size() == 10);
    CHECK(max_abs_diff(zero.stage_vectors[0], Ket::zeros(3)) == 0.0);
    CHECK(max_abs_diff(zero.stage_vectors[1], Ket(3, {kR, 0, kR, 0, 0, 0, 0, 0})) < 1e-15);

    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const auto t = run_unitary(p, random_qubit(rng));
        for (const auto& v : t.stage_vectors) {
            CHECK(std::abs(v.norm() - 1.0) < 1e-12);
        }
    }

    CHECK_THROWS_AS(run_unitary(p, Ket(1.0, 1.0)), QuantumError);
    CHECK_THROWS_AS(run_unitary(p, Ket::zeros(2)), QuantumError);
}

TEST_CASE("final stage vector matches the product of the ten explicit dense matrices") {
    const auto trace = run_unitary(build_canonical_pipeline(), Ket(0.6, 0.8));
    oracle::Vec v = oracle::input(0.6, 0.8);
    for (const auto& m : oracle::canonical_steps()) {
        v = oracle::matvec(m, v);
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        diff = std::max(diff, std::abs(trace.stage_vectors.back()[i] - v[i]));
    }
    CHECK(diff < 1e-12);
}

TEST_CASE("pipeline statistics") {
    auto p = build_canonical_pipeline();
    CHECK(pipeline_stats(p) == PipelineStats{10, 30, 9, 39});

    TeleportPipeline one = p;
    one.steps.erase(one.steps.begin() + 1, one.steps.end());
    CHECK(pipeline_stats(one) == PipelineStats{1, 3, 0, 3});

    TeleportPipeline two = p;
    two.steps.erase(two.steps.begin() + 2, two.steps.end());
    CHECK(pipeline_stats(two) == PipelineStats{2, 6, 1, 7});
}

TEST_CASE("run_measured teleports basis and superposition states") {
    for (std::uint64_t seed = 0; seed < 16; ++seed) {
        const auto zero = run_measured(Ket::basis(1, 0), seed);
        CHECK(zero.fidelity_vs_input == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(max_abs_diff(zero.output_state, Ket::basis(1, 0)) < 1e-12);

        const auto one = run_measured(Ket::basis(1, 1), seed);
        const auto dist = outcome_distribution(one.output_state, {0});
        CHECK(dist.size() == 1);
        CHECK(dist.count("1") == 1);

        const auto plus = run_measured(Ket(kR, kR), seed);
        CHECK(plus.fidelity_vs_input >= 1.0 - 1e-9);
    }
}

TEST_CASE("run_measured output agrees with the brute-force branch oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Ket g = random_qubit(rng);
        const auto ref = oracle::teleport(g[0], g[1]);
        CHECK(oracle::fidelity(ref.rho, g[0], g[1]) == doctest::Approx(1.0).epsilon(1e-12));

        const auto out = run_measured(g, static_cast<std::uint64_t>(trial));
        const int m1 = out.record.outcomes[0];
        const int m2 = out.record.outcomes[1];
        const auto& branch = ref.branches[static_cast<std::size_t>(m1 * 2 + m2)];
        CHECK(out.record.probability == doctest::Approx(branch.probability).epsilon(1e-12));
        CHECK(std::abs(out.output_state[0] - branch.output[0]) < 1e-12);
        CHECK(std::abs(out.output_state[1] - branch.output[1]) < 1e-12);
        CHECK(out.fidelity_vs_input >= 1.0 - 1e-9);
    }
}

TEST_CASE("Bell outcomes are uniform for any input") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Ket g = random_qubit(rng);
        const auto trace = run_unitary(build_canonical_pipeline(), g);
        const auto p = outcome_probabilities(trace.stage_vectors[5], {0, 1});
        for (double x : p) {
            CHECK(std::abs(x - 0.25) < 1e-12);
        }
        for (const auto& branch : oracle::teleport(g[0], g[1]).branches) {
            CHECK(std::abs(branch.probability - 0.25) < 1e-12);
        }
    }
}

TEST_CASE("corrections rule") {
    CHECK(corrections_for(0, 0).empty());
    CHECK(corrections_for(0, 1) == std::vector<Pauli>{Pauli::X});
    CHECK(corrections_for(1, 0) == std::vector<Pauli>{Pauli::Z});
    CHECK(corrections_for(1, 1) == std::vector<Pauli>{Pauli::X, Pauli::Z});
}

TEST_CASE("factorization of the final stage") {
    const auto p = build_canonical_pipeline();

    const auto zero = verify_factorization(run_unitary(p, Ket::basis(1, 0)), Ket::basis(1, 0));
    CHECK(zero.holds);
    CHECK(zero.trace_distance < 1e-12);
    CHECK(zero.remnant.num_qubits() == 2);
    CHECK(zero.remnant.is_valid());

    const Ket g(0.6, 0.8);
    const auto r = verify_factorization(run_unitary(p, g), g);
    CHECK(r.holds);
    CHECK(r.branches.size() == 4);

    // Oracle: the branch-averaged corrected output is |g><g|.
    const auto ref = oracle::teleport(0.6, 0.8);
    for (const auto& b : r.branches) {
        const auto& rb = ref.branches[static_cast<std::size_t>(b.m1 * 2 + b.m2)];
        CHECK(std::abs(b.probability - rb.probability) < 1e-12);
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < 2; ++k)
                CHECK(std::abs(b.output(i, k) - rb.output[i] * std::conj(rb.output[k])) < 1e-12);
    }

    const auto bad = verify_factorization(run_unitary(corrupted_pipeline(), g), g);
    CHECK_FALSE(bad.holds);
    CHECK(bad.trace_distance > 0.1);

    auto partial = run_unitary(p, g);
    partial.stage_vectors.pop_back();
    CHECK_THROWS_AS(verify_factorization(partial, g), std::invalid_argument);
}

TEST_CASE("deferred measurement matches run_measured branch by branch") {
    Rng rng(12);
    for (int trial = 0; trial < 25; ++trial) {
        const Ket g = random_qubit(rng);
        const auto branches = corrected_branches(run_unitary(build_canonical_pipeline(), g));
        REQUIRE(branches.size() == 4);
        const std::vector<std::size_t> out = {0};
        double averaged0 = 0.0;
        for (const auto& b : branches) {
            averaged0 += b.probability * b.output(0, 0).real();
        }
        // Sample run_measured until every branch has been seen.
        std::array<bool, 4> seen{};
        for (std::uint64_t seed = 0; seed < 64; ++seed) {
            const auto m = run_measured(g, seed);
            const std::size_t k = static_cast<std::size_t>(m.record.outcomes[0] * 2 + m.record.outcomes[1]);
            seen[k] = true;
            const auto measured = outcome_probabilities(m.output_state, out);
            const auto& b = branches[k];
            CHECK(std::abs(measured[0] - b.output(0, 0).real()) < 1e-9);
            CHECK(std::abs(measured[1] - b.output(1, 1).real()) < 1e-9);
        }
        CHECK(seen == std::array<bool, 4>{true, true, true, true});
        CHECK(std::abs(averaged0 - std::norm(g[0])) < 1e-9);
    }
}

TEST_CASE("teleportation is linear on conditioned branches") {
    Rng rng(21);
    const auto p = build_canonical_pipeline();
    for (int trial = 0; trial < 10; ++trial) {
        const Ket g = random_qubit(rng);
        const auto b0 = corrected_branches(run_unitary(p, Ket::basis(1, 0)));
        const auto b1 = corrected_branches(run_unitary(p, Ket::basis(1, 1)));
        const auto bg = corrected_branches(run_unitary(p, g));
        // Each branch delivers the basis states exactly, so the superposition's
        // output is alpha|0> + beta|1> with the same coefficients.
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(fidelity(b0[k].output, Ket::basis(1, 0)) == doctest::Approx(1.0));
            CHECK(fidelity(b1[k].output, Ket::basis(1, 1)) == doctest::Approx(1.0));
            CHECK(trace_distance(bg[k].output, DensityMatrix::pure(g)) < 1e-9);
        }
    }
}

TEST_CASE("cascade") {
    const std::vector<Ket> blocks = {Ket::basis(1, 0), Ket::basis(1, 1), Ket::basis(1, 0)};
    const auto out = cascade(blocks, 3);
    REQUIRE(out.size() == 3);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].fidelity_vs_input >= 1.0 - 1e-9);
        CHECK(out[i].times.epr_created < out[i].times.bell_measured);
        CHECK(out[i].times.bell_measured < out[i].times.corrected);
        if (i > 0) {
            CHECK(out[i - 1].times.corrected < out[i].times.epr_created);
        }
    }

    Rng rng(100);
    std::vector<Ket> random_blocks;
    for (int i = 0; i < 10; ++i) {
        random_blocks.push_back(random_qubit(rng));
    }
    const auto rout = cascade(random_blocks, 9);
    for (std::size_t i = 0; i < rout.size(); ++i) {
        const auto ref = oracle::teleport(random_blocks[i][0], random_blocks[i][1]);
        CHECK(oracle::fidelity(ref.rho, random_blocks[i][0], random_blocks[i][1]) >= 1.0 - 1e-9);
        CHECK(rout[i].fidelity_vs_input >= 1.0 - 1e-9);
    }

    CHECK(cascade({}, 1).empty());
}

TEST_CASE("stage trace JSON") {
    const auto trace = run_unitary(build_canonical_pipeline(), Ket::basis(1, 0));
    const Json j = trace_to_json(trace);
    CHECK(j["stages"].size() == 10);
    CHECK(j["stats"]["total_matrix_count"] == 39);
    CHECK(ket_from_json(j["stages"][9]) == trace.stage_vectors[9]);
    CHECK(j.begin().key() == "stages");
}
