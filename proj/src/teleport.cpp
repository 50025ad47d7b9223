#include "qdl/teleport.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qdl::teleport {

namespace {

PipelineStep product_step(int index, std::string label, std::vector<Gate2x2> factors) {
    return PipelineStep{index, std::move(label), StageOperator(std::move(factors), index)};
}

PipelineStep cnot_step(int index, std::string label, std::size_t control, std::size_t target) {
    return PipelineStep{index, std::move(label), CnotStep{control, target}};
}

Ket apply_corrections(Ket v, const std::vector<Pauli>& corrections, std::size_t slot) {
    for (Pauli p : corrections) {
        v = apply_gate(p == Pauli::X ? gates::X() : gates::Z(), slot, v);
    }
    return v;
}

} // namespace

TeleportPipeline build_canonical_pipeline() {
    using gates::H;
    using gates::I;
    TeleportPipeline p;
    p.steps.push_back(product_step(1, "input", {I(), I(), I()}));
    p.steps.push_back(product_step(2, "hadamard on pair", {I(), H(), I()}));
    p.steps.push_back(cnot_step(3, "bell pair", 1, 2));
    p.steps.push_back(product_step(4, "epr distribution", {I(), I(), I()}));
    p.steps.push_back(cnot_step(5, "data onto pair", 0, 1));
    p.steps.push_back(product_step(6, "hadamard on data", {H(), I(), I()}));
    p.steps.push_back(product_step(7, "measure", {I(), I(), I()}));
    p.steps.push_back(product_step(8, "classical transfer", {I(), I(), I()}));
    p.steps.push_back(product_step(9, "correction", {I(), I(), I()}));
    p.steps.push_back(product_step(10, "output", {I(), I(), H()}));
    return p;
}

DenseMatrix dense(const PipelineStep& step, std::size_t num_qubits) {
    if (const auto* op = std::get_if<StageOperator>(&step.action)) {
        if (op->num_qubits() != num_qubits) {
            throw QuantumError("stage operator width does not match register width");
        }
        return op->dense();
    }
    const auto& cx = std::get<CnotStep>(step.action);
    const std::size_t dim = std::size_t{1} << num_qubits;
    DenseMatrix m(dim, dim);
    for (std::size_t col = 0; col < dim; ++col) {
        // Column `col` is the image of basis state |col>.
        const Ket image = apply_controlled_not(cx.control, cx.target, Ket::basis(num_qubits, col));
        for (std::size_t row = 0; row < dim; ++row) {
            m(row, col) = image[row];
        }
    }
    return m;
}

Ket apply_step(const PipelineStep& step, const Ket& v) {
    if (const auto* op = std::get_if<StageOperator>(&step.action)) {
        return apply_stage(*op, v);
    }
    const auto& cx = std::get<CnotStep>(step.action);
    return apply_controlled_not(cx.control, cx.target, v);
}

PipelineStep adjoint(const PipelineStep& step) {
    if (const auto* op = std::get_if<StageOperator>(&step.action)) {
        return PipelineStep{step.index, step.label, op->adjoint()};
    }
    return step; // CNOT is self-inverse
}

StageTrace run_unitary_on(const TeleportPipeline& pipeline, const Ket& input) {
    if (input.num_qubits() != pipeline.num_qubits) {
        throw QuantumError("pipeline expects " + std::to_string(pipeline.num_qubits) + " qubits, input has " +
                           std::to_string(input.num_qubits()));
    }
    StageTrace trace{pipeline, {}, input};
    Ket v = input;
    for (const auto& step : pipeline.steps) {
        v = apply_step(step, v);
        trace.stage_vectors.push_back(v);
    }
    return trace;
}

StageTrace run_unitary(const TeleportPipeline& pipeline, const Ket& g) {
    if (g.num_qubits() != 1) {
        throw QuantumError("teleported state must be a single qubit");
    }
    if (!g.is_normalized(kAlgebraTol)) {
        throw QuantumError("teleported state must be normalized");
    }
    StageTrace trace = run_unitary_on(pipeline, tensor(g, Ket::zeros(pipeline.num_qubits - 1)));
    trace.input = g;
    return trace;
}

PipelineStats pipeline_stats(const TeleportPipeline& pipeline) {
    PipelineStats s;
    s.stage_operator_count = pipeline.steps.size();
    s.factor_matrix_count = pipeline.steps.size() * pipeline.num_qubits;
    s.intermediate_vector_count = pipeline.steps.empty() ? 0 : pipeline.steps.size() - 1;
    s.total_matrix_count = s.factor_matrix_count + s.intermediate_vector_count;
    return s;
}

std::string to_string(Pauli p) { return p == Pauli::X ? "X" : "Z"; }

std::vector<Pauli> corrections_for(int m1, int m2) {
    std::vector<Pauli> out;
    if (m2) {
        out.push_back(Pauli::X);
    }
    if (m1) {
        out.push_back(Pauli::Z);
    }
    return out;
}

TeleportOutcome run_measured(const Ket& g, Rng& rng, std::uint64_t& clock) {
    if (g.num_qubits() != 1) {
        throw QuantumError("teleported state must be a single qubit");
    }
    if (std::abs(g.norm() - 1.0) > kPipelineTol) {
        throw QuantumError("teleported state must be normalized");
    }
    static const TeleportPipeline pipeline = build_canonical_pipeline();

    TeleportOutcome out{.record = {},
                        .corrections = {},
                        .output_state = g,
                        .output_density = DensityMatrix::pure(g),
                        .fidelity_vs_input = 0.0,
                        .times = {}};
    Ket v = tensor(g, Ket::zeros(2));
    for (std::size_t s = 0; s < pipeline.measure_after; ++s) {
        if (pipeline.steps[s].index == 3) {
            out.times.epr_created = ++clock;
        }
        v = apply_step(pipeline.steps[s], v);
    }

    auto m = measure(v, {0, 1}, rng);
    out.times.bell_measured = ++clock;
    out.record = m.record;
    const int m1 = m.record.outcomes[0];
    const int m2 = m.record.outcomes[1];
    out.corrections = corrections_for(m1, m2);
    v = apply_corrections(m.post_state, out.corrections, kOutputSlot);
    out.times.corrected = ++clock;

    // Slots 0/1 are now in the definite state |m1 m2>.
    const std::size_t base = (static_cast<std::size_t>(m1) << 2) | (static_cast<std::size_t>(m2) << 1);
    out.output_state = Ket(v[base], v[base | 1]);
    out.output_density = partial_trace(v, {kOutputSlot});
    out.fidelity_vs_input = fidelity(out.output_density, g);
    return out;
}

TeleportOutcome run_measured(const Ket& g, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    std::uint64_t clock = 0;
    return run_measured(g, rng, clock);
}

std::vector<BranchOutput> corrected_branches(const StageTrace& trace) {
    const auto& pipeline = trace.pipeline;
    if (trace.stage_vectors.size() != pipeline.steps.size() || pipeline.steps.size() < pipeline.measure_after) {
        throw std::invalid_argument("stage trace is incomplete");
    }
    // Bring the final vector back to the measurement point.
    Ket v = trace.stage_vectors.back();
    for (std::size_t s = pipeline.steps.size(); s-- > pipeline.measure_after;) {
        v = apply_step(adjoint(pipeline.steps[s]), v);
    }
    if (std::abs(v.norm() - 1.0) > kPipelineTol) {
        throw QuantumError("stage trace is not normalized");
    }

    std::vector<BranchOutput> out;
    const auto probs = outcome_probabilities(v, {0, 1});
    for (int m1 = 0; m1 < 2; ++m1) {
        for (int m2 = 0; m2 < 2; ++m2) {
            const double p = probs[static_cast<std::size_t>(m1 * 2 + m2)];
            if (p <= 1e-15) {
                continue;
            }
            const auto collapsed = collapse(v, {0, 1}, {m1, m2});
            const Ket corrected = apply_corrections(collapsed.post_state, corrections_for(m1, m2), kOutputSlot);
            out.push_back(BranchOutput{m1, m2, p, partial_trace(corrected, {kOutputSlot})});
        }
    }
    return out;
}

FactorizationReport verify_factorization(const StageTrace& trace, const Ket& g) {
    if (trace.stage_vectors.size() != kCanonicalStages || trace.pipeline.steps.size() != kCanonicalStages) {
        throw std::invalid_argument("factorization check needs all " + std::to_string(kCanonicalStages) +
                                    " stages, trace has " + std::to_string(trace.stage_vectors.size()));
    }
    FactorizationReport report{.holds = false,
                               .remnant = partial_trace(trace.stage_vectors.back(), {0, 1}),
                               .trace_distance = 0.0,
                               .branches = corrected_branches(trace)};
    const DensityMatrix target = DensityMatrix::pure(g);
    for (const auto& b : report.branches) {
        report.trace_distance = std::max(report.trace_distance, qdl::trace_distance(b.output, target));
    }
    report.holds = !report.branches.empty() && report.trace_distance < kPipelineTol;
    return report;
}

std::vector<TeleportOutcome> cascade(const std::vector<Ket>& blocks, Rng& rng, std::uint64_t& clock) {
    std::vector<TeleportOutcome> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) {
        out.push_back(run_measured(b, rng, clock));
    }
    return out;
}

std::vector<TeleportOutcome> cascade(const std::vector<Ket>& blocks, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    std::uint64_t clock = 0;
    return cascade(blocks, rng, clock);
}

Json stats_to_json(const PipelineStats& s) {
    Json j;
    j["stage_operator_count"] = s.stage_operator_count;
    j["factor_matrix_count"] = s.factor_matrix_count;
    j["intermediate_vector_count"] = s.intermediate_vector_count;
    j["total_matrix_count"] = s.total_matrix_count;
    return j;
}

Json trace_to_json(const StageTrace& trace) {
    Json stages = Json::array();
    for (const auto& v : trace.stage_vectors) {
        stages.push_back(ket_to_json(v));
    }
    Json j;
    j["stages"] = std::move(stages);
    j["stats"] = stats_to_json(pipeline_stats(trace.pipeline));
    return j;
}

} // namespace qdl::teleport
