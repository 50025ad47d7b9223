#pragma once

// Ten-stage teleportation pipeline over the register |g>|h>|j>.
//
// Slot 0 carries the block state |g>, slots 1 and 2 hold the entangled pair.
// After step 6 slots 0 and 1 are measured; slot 2 is the output.

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qdl/qstate.hpp"

namespace qdl::teleport {

struct CnotStep {
    std::size_t control;
    std::size_t target;

    friend bool operator==(const CnotStep&, const CnotStep&) = default;
};

struct PipelineStep {
    int index; // 1-based
    std::string label;
    std::variant<StageOperator, CnotStep> action;

    bool is_cnot() const { return std::holds_alternative<CnotStep>(action); }
};

struct TeleportPipeline {
    std::size_t num_qubits = 3;
    /// Steps 1..measure_after are the coherent part; later steps act after the Bell measurement.
    std::size_t measure_after = 6;
    std::vector<PipelineStep> steps;
};

inline constexpr std::size_t kCanonicalStages = 10;
inline constexpr std::size_t kOutputSlot = 2;

TeleportPipeline build_canonical_pipeline();

DenseMatrix dense(const PipelineStep& step, std::size_t num_qubits);
Ket apply_step(const PipelineStep& step, const Ket& v);
PipelineStep adjoint(const PipelineStep& step);

struct StageTrace {
    TeleportPipeline pipeline;
    /// |stage1> .. |stageN>; stage 1 is the input after step 1.
    std::vector<Ket> stage_vectors;
    Ket input;
};

/// |stage1> = g (x) |0> (x) |0>, then every step in order.
StageTrace run_unitary(const TeleportPipeline& pipeline, const Ket& g);
/// Runs the pipeline on an arbitrary (possibly unnormalized) 3-qubit input.
StageTrace run_unitary_on(const TeleportPipeline& pipeline, const Ket& input);

struct PipelineStats {
    std::size_t stage_operator_count = 0;
    std::size_t factor_matrix_count = 0;
    std::size_t intermediate_vector_count = 0;
    std::size_t total_matrix_count = 0;

    friend bool operator==(const PipelineStats&, const PipelineStats&) = default;
};

/// Every step occupies one factor slot per qubit, CNOT steps included.
PipelineStats pipeline_stats(const TeleportPipeline& pipeline);

enum class Pauli { X, Z };
std::string to_string(Pauli p);

/// Discrete event times of one teleport.
struct EventStamps {
    std::uint64_t epr_created = 0;
    std::uint64_t bell_measured = 0;
    std::uint64_t corrected = 0;
};

struct TeleportOutcome {
    MeasurementRecord record;
    std::vector<Pauli> corrections;
    Ket output_state;
    DensityMatrix output_density;
    double fidelity_vs_input = 0.0;
    EventStamps times;
};

/// Corrections for Bell outcome (m1, m2): X^m2 first, then Z^m1.
std::vector<Pauli> corrections_for(int m1, int m2);

/// Measured teleport of a normalized single-qubit state. The event clock is
/// advanced for EPR creation, Bell measurement and correction.
TeleportOutcome run_measured(const Ket& g, Rng& rng, std::uint64_t& clock);
TeleportOutcome run_measured(const Ket& g, std::uint64_t rng_seed);

/// Output slot of one measurement branch, conditioned and corrected.
struct BranchOutput {
    int m1 = 0;
    int m2 = 0;
    double probability = 0.0;
    DensityMatrix output;
};

/// Undoes the post-measurement steps of the trace, projects slots 0/1 onto each
/// of the four outcomes and applies the matching corrections to slot 2.
/// Branches of zero probability are omitted.
std::vector<BranchOutput> corrected_branches(const StageTrace& trace);

struct FactorizationReport {
    bool holds = false;
    /// Reduced state of slots 0 and 1 of the final stage vector.
    DensityMatrix remnant;
    /// Largest trace distance between a corrected branch output and |g><g|.
    double trace_distance = 0.0;
    std::vector<BranchOutput> branches;
};

/// Throws std::invalid_argument if the trace does not hold all ten stages.
FactorizationReport verify_factorization(const StageTrace& trace, const Ket& g);

/// Teleports each block in order. The EPR pair for block i is created only
/// after block i-1 has been measured and corrected.
std::vector<TeleportOutcome> cascade(const std::vector<Ket>& blocks, std::uint64_t rng_seed);
std::vector<TeleportOutcome> cascade(const std::vector<Ket>& blocks, Rng& rng, std::uint64_t& clock);

Json stats_to_json(const PipelineStats& s);
/// {"stages": [ket, ...], "stats": {...}}
Json trace_to_json(const StageTrace& trace);

} // namespace qdl::teleport
