#include "qdl/qstate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

namespace qdl {

namespace {

std::size_t dim_of(std::size_t num_qubits) { return std::size_t{1} << num_qubits; }

// Bit mask of `qubit` inside an index over `num_qubits` (qubit 0 is the MSB).
std::size_t mask_of(std::size_t qubit, std::size_t num_qubits) {
    return std::size_t{1} << (num_qubits - 1 - qubit);
}

void check_qubit_list(const std::vector<std::size_t>& qubits, std::size_t num_qubits) {
    for (std::size_t i = 0; i < qubits.size(); ++i) {
        if (qubits[i] >= num_qubits) {
            throw QuantumError("qubit index " + std::to_string(qubits[i]) + " out of range for " +
                               std::to_string(num_qubits) + "-qubit register");
        }
        for (std::size_t k = 0; k < i; ++k) {
            if (qubits[k] == qubits[i]) {
                throw QuantumError("qubit index " + std::to_string(qubits[i]) + " listed twice");
            }
        }
    }
}

void require_normalized(const Ket& v) {
    if (std::abs(v.norm() - 1.0) > kPipelineTol) {
        std::ostringstream msg;
        msg << "state is not normalized (norm " << v.norm() << ")";
        throw QuantumError(msg.str());
    }
}

// Joint pattern of `qubits` in basis index i, first listed qubit most significant.
std::size_t pattern_of(std::size_t i, const std::vector<std::size_t>& qubits, std::size_t num_qubits) {
    std::size_t p = 0;
    for (std::size_t q : qubits) {
        p = (p << 1) | ((i & mask_of(q, num_qubits)) ? 1 : 0);
    }
    return p;
}

Eigen::MatrixXcd to_eigen(const DenseMatrix& m) {
    Eigen::MatrixXcd out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out(r, c) = m(r, c);
        }
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Ket

Ket::Ket() : num_qubits_(0), amplitudes_{Amplitude{1.0, 0.0}} {}

Ket::Ket(std::size_t num_qubits, std::vector<Amplitude> amplitudes)
    : num_qubits_(num_qubits), amplitudes_(std::move(amplitudes)) {
    if (num_qubits_ > kMaxQubits) {
        throw QuantumError("dense registers are limited to " + std::to_string(kMaxQubits) + " qubits, got " +
                           std::to_string(num_qubits_));
    }
    if (amplitudes_.size() != dim_of(num_qubits_)) {
        throw QuantumError("ket of " + std::to_string(num_qubits_) + " qubits needs " +
                           std::to_string(dim_of(num_qubits_)) + " amplitudes, got " +
                           std::to_string(amplitudes_.size()));
    }
    for (const auto& a : amplitudes_) {
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) {
            throw QuantumError("ket amplitude is not finite");
        }
    }
}

Ket::Ket(Amplitude a, Amplitude b) : Ket(1, {a, b}) {}

Ket Ket::basis(std::size_t num_qubits, std::uint64_t index) {
    if (num_qubits > kMaxQubits) {
        throw QuantumError("dense registers are limited to " + std::to_string(kMaxQubits) + " qubits");
    }
    if (index >= dim_of(num_qubits)) {
        throw QuantumError("basis index " + std::to_string(index) + " out of range");
    }
    std::vector<Amplitude> amps(dim_of(num_qubits));
    amps[index] = 1.0;
    return Ket(num_qubits, std::move(amps));
}

double Ket::norm_squared() const {
    double s = 0.0;
    for (const auto& a : amplitudes_) {
        s += std::norm(a);
    }
    return s;
}

double Ket::norm() const { return std::sqrt(norm_squared()); }

bool Ket::is_normalized(double tol) const { return std::abs(norm_squared() - 1.0) <= tol; }

Ket Ket::normalized() const {
    const double n = norm();
    if (n == 0.0) {
        throw QuantumError("cannot normalize the zero vector");
    }
    std::vector<Amplitude> amps = amplitudes_;
    for (auto& a : amps) {
        a /= n;
    }
    return Ket(num_qubits_, std::move(amps));
}

double max_abs_diff(const Ket& a, const Ket& b) {
    if (a.num_qubits() != b.num_qubits()) {
        throw QuantumError("cannot compare kets of different widths");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.dimension(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

Ket random_qubit(Rng& rng) {
    const double theta = std::acos(1.0 - 2.0 * rng.uniform());
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    return Ket(Amplitude{std::cos(theta / 2.0), 0.0}, std::polar(std::sin(theta / 2.0), phi));
}

// ---------------------------------------------------------------------------
// DenseMatrix

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

DenseMatrix DenseMatrix::adjoint() const {
    DenseMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            out(c, r) = std::conj((*this)(r, c));
        }
    }
    return out;
}

DenseMatrix DenseMatrix::operator*(const DenseMatrix& rhs) const {
    if (cols_ != rhs.rows_) {
        throw QuantumError("matrix product dimension mismatch");
    }
    DenseMatrix out(rows_, rhs.cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = 0; k < cols_; ++k) {
            const Amplitude a = (*this)(r, k);
            if (a == Amplitude{}) {
                continue;
            }
            for (std::size_t c = 0; c < rhs.cols_; ++c) {
                out(r, c) += a * rhs(k, c);
            }
        }
    }
    return out;
}

Ket DenseMatrix::operator*(const Ket& v) const {
    if (cols_ != v.dimension() || rows_ != cols_) {
        throw QuantumError("matrix-vector dimension mismatch");
    }
    std::vector<Amplitude> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        Amplitude s{};
        for (std::size_t c = 0; c < cols_; ++c) {
            s += (*this)(r, c) * v[c];
        }
        out[r] = s;
    }
    return Ket(v.num_qubits(), std::move(out));
}

double DenseMatrix::max_abs_diff(const DenseMatrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) {
        throw QuantumError("cannot compare matrices of different shapes");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) {
        m = std::max(m, std::abs(data_[i] - other.data_[i]));
    }
    return m;
}

bool DenseMatrix::is_unitary(double tol) const {
    if (rows_ != cols_) {
        return false;
    }
    return ((*this) * adjoint()).max_abs_diff(identity(rows_)) <= tol;
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t ar = 0; ar < a.rows(); ++ar) {
        for (std::size_t ac = 0; ac < a.cols(); ++ac) {
            for (std::size_t br = 0; br < b.rows(); ++br) {
                for (std::size_t bc = 0; bc < b.cols(); ++bc) {
                    out(ar * b.rows() + br, ac * b.cols() + bc) = a(ar, ac) * b(br, bc);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gates

DenseMatrix Gate2x2::dense() const {
    DenseMatrix m(2, 2);
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
            m(r, c) = (*this)(r, c);
        }
    }
    return m;
}

Gate2x2 Gate2x2::adjoint() const {
    // Every built-in gate is Hermitian, so the adjoint keeps its label.
    Gate2x2 g{name, {std::conj(entries[0]), std::conj(entries[2]), std::conj(entries[1]), std::conj(entries[3])}};
    if (g.entries != entries) {
        g.name = name + "^dag";
    }
    return g;
}

namespace gates {

const Gate2x2& I() {
    static const Gate2x2 g{"I", {1.0, 0.0, 0.0, 1.0}};
    return g;
}

const Gate2x2& H() {
    static const Gate2x2 g{"H", {(1.0 / std::numbers::sqrt2), (1.0 / std::numbers::sqrt2), (1.0 / std::numbers::sqrt2),
                                 -(1.0 / std::numbers::sqrt2)}};
    return g;
}

const Gate2x2& X() {
    static const Gate2x2 g{"X", {0.0, 1.0, 1.0, 0.0}};
    return g;
}

const Gate2x2& Z() {
    static const Gate2x2 g{"Z", {1.0, 0.0, 0.0, -1.0}};
    return g;
}

} // namespace gates

StageOperator::StageOperator(std::vector<Gate2x2> factors, int stage_index)
    : factors_(std::move(factors)), stage_index_(stage_index) {
    for (const auto& f : factors_) {
        if (!f.is_unitary()) {
            throw QuantumError("stage factor '" + f.name + "' is not unitary");
        }
    }
}

DenseMatrix StageOperator::dense() const {
    DenseMatrix m = DenseMatrix::identity(1);
    for (const auto& f : factors_) {
        m = kron(m, f.dense());
    }
    return m;
}

StageOperator StageOperator::adjoint() const {
    std::vector<Gate2x2> adj;
    adj.reserve(factors_.size());
    for (const auto& f : factors_) {
        adj.push_back(f.adjoint());
    }
    return StageOperator(std::move(adj), stage_index_);
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(std::size_t num_qubits, DenseMatrix entries)
    : num_qubits_(num_qubits), entries_(std::move(entries)) {
    if (entries_.rows() != dim_of(num_qubits_) || entries_.cols() != dim_of(num_qubits_)) {
        throw QuantumError("density matrix over " + std::to_string(num_qubits_) + " qubits must be " +
                           std::to_string(dim_of(num_qubits_)) + " square");
    }
}

DensityMatrix DensityMatrix::pure(const Ket& v) {
    DenseMatrix m(v.dimension(), v.dimension());
    for (std::size_t r = 0; r < v.dimension(); ++r) {
        for (std::size_t c = 0; c < v.dimension(); ++c) {
            m(r, c) = v[r] * std::conj(v[c]);
        }
    }
    return DensityMatrix(v.num_qubits(), std::move(m));
}

Amplitude DensityMatrix::trace() const {
    Amplitude t{};
    for (std::size_t i = 0; i < dimension(); ++i) {
        t += entries_(i, i);
    }
    return t;
}

double DensityMatrix::purity() const {
    // tr(rho^2) = sum_{rc} rho_rc rho_cr = sum |rho_rc|^2 for Hermitian rho
    double s = 0.0;
    for (std::size_t r = 0; r < dimension(); ++r) {
        for (std::size_t c = 0; c < dimension(); ++c) {
            s += (entries_(r, c) * entries_(c, r)).real();
        }
    }
    return s;
}

std::vector<double> DensityMatrix::eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(to_eigen(entries_), Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

bool DensityMatrix::is_valid(double tol) const {
    if (entries_.max_abs_diff(entries_.adjoint()) > tol) {
        return false;
    }
    if (std::abs(trace() - Amplitude{1.0, 0.0}) > tol) {
        return false;
    }
    const auto ev = eigenvalues();
    return std::all_of(ev.begin(), ev.end(), [](double x) { return x >= -1e-10; });
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
    if (a.num_qubits() != b.num_qubits()) {
        throw QuantumError("trace distance between density matrices of different widths");
    }
    DenseMatrix diff(a.dimension(), a.dimension());
    for (std::size_t r = 0; r < a.dimension(); ++r) {
        for (std::size_t c = 0; c < a.dimension(); ++c) {
            diff(r, c) = a(r, c) - b(r, c);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(to_eigen(diff), Eigen::EigenvaluesOnly);
    return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

// ---------------------------------------------------------------------------
// Operations

std::string to_string(Basis b) { return b == Basis::Z ? "Z" : "X"; }

Basis parse_basis(const std::string& s) {
    if (s == "Z" || s == "z") {
        return Basis::Z;
    }
    if (s == "X" || s == "x") {
        return Basis::X;
    }
    throw std::invalid_argument("unknown basis '" + s + "' (expected Z or X)");
}

Ket tensor(const Ket& a, const Ket& b) {
    if (a.num_qubits() + b.num_qubits() > kMaxQubits) {
        throw QuantumError("tensor product would exceed " + std::to_string(kMaxQubits) + " qubits");
    }
    std::vector<Amplitude> out;
    out.reserve(a.dimension() * b.dimension());
    for (const auto& x : a.amplitudes()) {
        for (const auto& y : b.amplitudes()) {
            out.push_back(x * y);
        }
    }
    return Ket(a.num_qubits() + b.num_qubits(), std::move(out));
}

Ket apply_gate(const Gate2x2& gate, std::size_t qubit, const Ket& v) {
    if (qubit >= v.num_qubits()) {
        throw QuantumError("gate target " + std::to_string(qubit) + " out of range for " +
                           std::to_string(v.num_qubits()) + "-qubit register");
    }
    const std::size_t mask = mask_of(qubit, v.num_qubits());
    std::vector<Amplitude> out = v.amplitudes();
    for (std::size_t i = 0; i < v.dimension(); ++i) {
        if (i & mask) {
            continue;
        }
        const Amplitude a0 = v[i];
        const Amplitude a1 = v[i | mask];
        out[i] = gate(0, 0) * a0 + gate(0, 1) * a1;
        out[i | mask] = gate(1, 0) * a0 + gate(1, 1) * a1;
    }
    return Ket(v.num_qubits(), std::move(out));
}

Ket apply_stage(const StageOperator& op, const Ket& v) {
    if (op.num_qubits() != v.num_qubits()) {
        throw QuantumError("stage operator has " + std::to_string(op.num_qubits()) +
                           " factors but the state has " + std::to_string(v.num_qubits()) + " qubits");
    }
    Ket out = v;
    for (std::size_t q = 0; q < op.num_qubits(); ++q) {
        if (op.factors()[q] == gates::I()) {
            continue;
        }
        out = apply_gate(op.factors()[q], q, out);
    }
    return out;
}

Ket apply_controlled_not(std::size_t control, std::size_t target, const Ket& v) {
    if (control == target) {
        throw QuantumError("CNOT control and target must differ (both " + std::to_string(control) + ")");
    }
    if (control >= v.num_qubits() || target >= v.num_qubits()) {
        throw QuantumError("CNOT qubit index out of range for " + std::to_string(v.num_qubits()) +
                           "-qubit register");
    }
    const std::size_t cmask = mask_of(control, v.num_qubits());
    const std::size_t tmask = mask_of(target, v.num_qubits());
    std::vector<Amplitude> out = v.amplitudes();
    for (std::size_t i = 0; i < v.dimension(); ++i) {
        if (i & cmask) {
            out[i] = v[i ^ tmask];
        }
    }
    return Ket(v.num_qubits(), std::move(out));
}

std::vector<double> outcome_probabilities(const Ket& v, const std::vector<std::size_t>& qubits) {
    check_qubit_list(qubits, v.num_qubits());
    require_normalized(v);
    std::vector<double> probs(dim_of(qubits.size()), 0.0);
    for (std::size_t i = 0; i < v.dimension(); ++i) {
        probs[pattern_of(i, qubits, v.num_qubits())] += std::norm(v[i]);
    }
    return probs;
}

std::map<std::string, double> outcome_distribution(const Ket& v, const std::vector<std::size_t>& qubits) {
    const auto probs = outcome_probabilities(v, qubits);
    std::map<std::string, double> out;
    for (std::size_t p = 0; p < probs.size(); ++p) {
        if (probs[p] <= 0.0) {
            continue;
        }
        std::string key(qubits.size(), '0');
        for (std::size_t k = 0; k < qubits.size(); ++k) {
            if (p & (std::size_t{1} << (qubits.size() - 1 - k))) {
                key[k] = '1';
            }
        }
        out.emplace(std::move(key), probs[p]);
    }
    return out;
}

Measurement collapse(const Ket& v, const std::vector<std::size_t>& qubits, const std::vector<int>& outcomes) {
    check_qubit_list(qubits, v.num_qubits());
    if (outcomes.size() != qubits.size()) {
        throw QuantumError("outcome count does not match measured qubit count");
    }
    std::size_t wanted = 0;
    for (int b : outcomes) {
        wanted = (wanted << 1) | (b ? 1 : 0);
    }
    const auto probs = outcome_probabilities(v, qubits);
    const double p = probs[wanted];
    if (p <= 0.0) {
        throw QuantumError("cannot collapse onto an outcome of zero probability");
    }
    const double scale = 1.0 / std::sqrt(p);
    std::vector<Amplitude> amps(v.dimension());
    for (std::size_t i = 0; i < v.dimension(); ++i) {
        if (pattern_of(i, qubits, v.num_qubits()) == wanted) {
            amps[i] = v[i] * scale;
        }
    }
    std::vector<int> bits;
    bits.reserve(outcomes.size());
    for (int b : outcomes) {
        bits.push_back(b ? 1 : 0);
    }
    return {MeasurementRecord{qubits, std::move(bits), p}, Ket(v.num_qubits(), std::move(amps))};
}

Measurement measure(const Ket& v, const std::vector<std::size_t>& qubits, Rng& rng) {
    const auto probs = outcome_probabilities(v, qubits);
    const double u = rng.uniform();
    std::size_t chosen = probs.size();
    double cumulative = 0.0;
    for (std::size_t p = 0; p < probs.size(); ++p) {
        cumulative += probs[p];
        if (probs[p] > 0.0 && u < cumulative) {
            chosen = p;
            break;
        }
    }
    if (chosen == probs.size()) {
        // u landed in the rounding gap above the cumulative sum: take the last possible outcome.
        for (std::size_t p = probs.size(); p-- > 0;) {
            if (probs[p] > 0.0) {
                chosen = p;
                break;
            }
        }
    }
    std::vector<int> outcomes(qubits.size());
    for (std::size_t k = 0; k < qubits.size(); ++k) {
        outcomes[k] = (chosen >> (qubits.size() - 1 - k)) & 1;
    }
    return collapse(v, qubits, outcomes);
}

Measurement measure(const Ket& v, const std::vector<std::size_t>& qubits, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return measure(v, qubits, rng);
}

DensityMatrix partial_trace(const Ket& v, const std::vector<std::size_t>& keep) {
    check_qubit_list(keep, v.num_qubits());
    std::vector<std::size_t> traced;
    for (std::size_t q = 0; q < v.num_qubits(); ++q) {
        if (std::find(keep.begin(), keep.end(), q) == keep.end()) {
            traced.push_back(q);
        }
    }
    // Reshape psi into M[kept][traced]; rho = M M^dagger.
    const std::size_t kd = dim_of(keep.size());
    const std::size_t td = dim_of(traced.size());
    std::vector<Amplitude> m(kd * td);
    for (std::size_t i = 0; i < v.dimension(); ++i) {
        m[pattern_of(i, keep, v.num_qubits()) * td + pattern_of(i, traced, v.num_qubits())] = v[i];
    }
    DenseMatrix rho(kd, kd);
    for (std::size_t r = 0; r < kd; ++r) {
        for (std::size_t c = 0; c < kd; ++c) {
            Amplitude s{};
            for (std::size_t t = 0; t < td; ++t) {
                s += m[r * td + t] * std::conj(m[c * td + t]);
            }
            rho(r, c) = s;
        }
    }
    return DensityMatrix(keep.size(), std::move(rho));
}

double fidelity(const DensityMatrix& rho, const Ket& target) {
    if (rho.num_qubits() != target.num_qubits()) {
        throw QuantumError("fidelity: density matrix has " + std::to_string(rho.num_qubits()) +
                           " qubits but target has " + std::to_string(target.num_qubits()));
    }
    require_normalized(target);
    Amplitude s{};
    for (std::size_t r = 0; r < rho.dimension(); ++r) {
        for (std::size_t c = 0; c < rho.dimension(); ++c) {
            s += std::conj(target[r]) * rho(r, c) * target[c];
        }
    }
    return std::clamp(s.real(), 0.0, 1.0);
}

double correlation(const Ket& v, std::size_t qubit_a, std::size_t qubit_b, Basis basis) {
    if (qubit_a == qubit_b) {
        throw QuantumError("correlation needs two distinct qubits");
    }
    Ket rotated = v;
    if (basis == Basis::X) {
        rotated = apply_gate(gates::H(), qubit_a, rotated);
        rotated = apply_gate(gates::H(), qubit_b, rotated);
    }
    const auto p = outcome_probabilities(rotated, {qubit_a, qubit_b});
    const double same = p[0b00] + p[0b11];
    const double differ = p[0b01] + p[0b10];
    return std::clamp((same - differ) / (same + differ), -1.0, 1.0);
}

Json ket_to_json(const Ket& v) {
    Json amps = Json::array();
    for (const auto& a : v.amplitudes()) {
        amps.push_back(Json::array({a.real(), a.imag()}));
    }
    Json j;
    j["num_qubits"] = v.num_qubits();
    j["amplitudes"] = std::move(amps);
    return j;
}

Ket ket_from_json(const Json& j) {
    std::vector<Amplitude> amps;
    for (const auto& pair : j.at("amplitudes")) {
        amps.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
    }
    return Ket(j.at("num_qubits").get<std::size_t>(), std::move(amps));
}

} // namespace qdl
