#pragma once

// Dense state-vector quantum mechanics for small registers.
//
// Amplitudes are stored big-endian by qubit index: qubit 0 is the most
// significant bit of the amplitude index, so for |g>|h>|j> the index order
// reads g1h1j1, g1h1j2, g1h2j1, ..., g2h2j2.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdl/rng.hpp"

namespace qdl {

using Json = nlohmann::ordered_json;
using Amplitude = std::complex<double>;

inline constexpr std::size_t kMaxQubits = 14;
inline constexpr double kAlgebraTol = 1e-12;
inline constexpr double kPipelineTol = 1e-9;

class QuantumError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class Ket {
  public:
    /// Zero-qubit ket with the single amplitude 1.
    Ket();
    /// Throws QuantumError unless amplitudes.size() == 2^num_qubits and all are finite.
    Ket(std::size_t num_qubits, std::vector<Amplitude> amplitudes);
    /// Single-qubit ket a|0> + b|1>.
    Ket(Amplitude a, Amplitude b);

    static Ket basis(std::size_t num_qubits, std::uint64_t index);
    static Ket zeros(std::size_t num_qubits) { return basis(num_qubits, 0); }

    std::size_t num_qubits() const { return num_qubits_; }
    std::size_t dimension() const { return amplitudes_.size(); }
    const std::vector<Amplitude>& amplitudes() const { return amplitudes_; }
    const Amplitude& operator[](std::size_t i) const { return amplitudes_[i]; }

    double norm_squared() const;
    double norm() const;
    bool is_normalized(double tol = kAlgebraTol) const;
    Ket normalized() const;

    friend bool operator==(const Ket&, const Ket&) = default;

  private:
    std::size_t num_qubits_;
    std::vector<Amplitude> amplitudes_;
};

/// Largest componentwise |a_i - b_i|. Kets must have equal width.
double max_abs_diff(const Ket& a, const Ket& b);

/// Random pure single-qubit state, uniform on the Bloch sphere.
Ket random_qubit(Rng& rng);

/// Row-major dense complex matrix.
class DenseMatrix {
  public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    Amplitude& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const Amplitude& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<const Amplitude> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    DenseMatrix adjoint() const;
    DenseMatrix operator*(const DenseMatrix& rhs) const;
    Ket operator*(const Ket& v) const;

    double max_abs_diff(const DenseMatrix& other) const;
    bool is_unitary(double tol = kAlgebraTol) const;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Amplitude> data_;
};

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b);

struct Gate2x2 {
    std::string name;
    std::array<Amplitude, 4> entries; // row-major

    Amplitude operator()(std::size_t r, std::size_t c) const { return entries[r * 2 + c]; }
    DenseMatrix dense() const;
    Gate2x2 adjoint() const;
    bool is_unitary(double tol = kAlgebraTol) const { return dense().is_unitary(tol); }

    friend bool operator==(const Gate2x2&, const Gate2x2&) = default;
};

namespace gates {
const Gate2x2& I();
const Gate2x2& H();
const Gate2x2& X();
const Gate2x2& Z();
} // namespace gates

/// A register-wide operator written as one single-qubit factor per slot,
/// leftmost factor on qubit 0.
class StageOperator {
  public:
    /// Throws QuantumError if any factor is not unitary.
    StageOperator(std::vector<Gate2x2> factors, int stage_index);

    const std::vector<Gate2x2>& factors() const { return factors_; }
    int stage_index() const { return stage_index_; }
    std::size_t num_qubits() const { return factors_.size(); }

    DenseMatrix dense() const;
    StageOperator adjoint() const;

    friend bool operator==(const StageOperator&, const StageOperator&) = default;

  private:
    std::vector<Gate2x2> factors_;
    int stage_index_;
};

struct MeasurementRecord {
    std::vector<std::size_t> measured_qubits;
    std::vector<int> outcomes;
    double probability = 0.0;
};

class DensityMatrix {
  public:
    DensityMatrix(std::size_t num_qubits, DenseMatrix entries);

    static DensityMatrix pure(const Ket& v);

    std::size_t num_qubits() const { return num_qubits_; }
    std::size_t dimension() const { return entries_.rows(); }
    const DenseMatrix& entries() const { return entries_; }
    Amplitude operator()(std::size_t r, std::size_t c) const { return entries_(r, c); }

    Amplitude trace() const;
    double purity() const;
    std::vector<double> eigenvalues() const;
    /// Hermitian, unit trace and positive semidefinite.
    bool is_valid(double tol = kAlgebraTol) const;

  private:
    std::size_t num_qubits_;
    DenseMatrix entries_;
};

/// Half the trace norm of a - b.
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

enum class Basis { Z, X };

std::string to_string(Basis b);
Basis parse_basis(const std::string& s);

Ket tensor(const Ket& a, const Ket& b);
Ket apply_gate(const Gate2x2& gate, std::size_t qubit, const Ket& v);
Ket apply_stage(const StageOperator& op, const Ket& v);
Ket apply_controlled_not(std::size_t control, std::size_t target, const Ket& v);

/// Probability of every joint outcome on `qubits`, indexed by bit pattern with
/// the first listed qubit as the most significant bit.
std::vector<double> outcome_probabilities(const Ket& v, const std::vector<std::size_t>& qubits);
/// Nonzero entries of outcome_probabilities keyed by bit string ("01", ...).
std::map<std::string, double> outcome_distribution(const Ket& v, const std::vector<std::size_t>& qubits);

struct Measurement {
    MeasurementRecord record;
    Ket post_state;
};

Measurement measure(const Ket& v, const std::vector<std::size_t>& qubits, Rng& rng);
Measurement measure(const Ket& v, const std::vector<std::size_t>& qubits, std::uint64_t rng_seed);

/// Projects onto a fixed outcome and renormalizes. Throws if the outcome has zero probability.
Measurement collapse(const Ket& v, const std::vector<std::size_t>& qubits, const std::vector<int>& outcomes);

DensityMatrix partial_trace(const Ket& v, const std::vector<std::size_t>& keep);
double fidelity(const DensityMatrix& rho, const Ket& target);
double correlation(const Ket& v, std::size_t qubit_a, std::size_t qubit_b, Basis basis);

/// {"num_qubits": n, "amplitudes": [[re, im], ...]}
Json ket_to_json(const Ket& v);
Ket ket_from_json(const Json& j);

} // namespace qdl
