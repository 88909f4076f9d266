#pragma once

// Truncated Fock-space operator algebra and an exact Lindblad integrator.
//
// The Hilbert space is the tensor product atom (x) phonon (x) photon, in that
// order, with the atom factor optional (atom_levels == 1 means "absent") and
// the photon factor optional. Frequencies are angular and hbar is divided out,
// so a Hamiltonian is stored in units of rad/s.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "phonox/error.hpp"
#include "phonox/ode.hpp"

namespace phonox {

using complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

class FockSpace {
public:
    /// `atom_levels` is 2 for a {|g>, |e>} atom or 1 when the atom is traced out.
    FockSpace(int atom_levels, int phonon_cutoff, std::optional<int> photon_cutoff = std::nullopt)
        : atom_levels_(atom_levels), phonon_cutoff_(phonon_cutoff), photon_cutoff_(photon_cutoff)
    {
        if (atom_levels != 1 && atom_levels != 2) {
            detail::invalid("atom_levels", "must be 2 (or 1 when the atom is omitted)");
        }
        if (phonon_cutoff < 1) {
            detail::invalid("phonon_cutoff", "must be >= 1");
        }
        if (photon_cutoff && *photon_cutoff < 1) {
            detail::invalid("photon_cutoff", "must be >= 1");
        }
    }

    static FockSpace atom_phonon(int phonon_cutoff) { return FockSpace(2, phonon_cutoff); }

    static FockSpace phonon_photon(int phonon_cutoff, int photon_cutoff)
    {
        return FockSpace(1, phonon_cutoff, photon_cutoff);
    }

    int atom_levels() const noexcept { return atom_levels_; }
    int phonon_cutoff() const noexcept { return phonon_cutoff_; }
    std::optional<int> photon_cutoff() const noexcept { return photon_cutoff_; }
    bool has_atom() const noexcept { return atom_levels_ == 2; }
    bool has_photon() const noexcept { return photon_cutoff_.has_value(); }

    Eigen::Index phonon_levels() const noexcept { return phonon_cutoff_ + 1; }
    Eigen::Index photon_levels() const noexcept { return photon_cutoff_ ? *photon_cutoff_ + 1 : 1; }
    Eigen::Index dimension() const noexcept { return atom_levels_ * phonon_levels() * photon_levels(); }

    /// Row index of |atom, phonon, photon>; atom 0 = |g>, 1 = |e>.
    Eigen::Index index(int atom, int phonon, int photon = 0) const noexcept
    {
        return (atom * phonon_levels() + phonon) * photon_levels() + photon;
    }

    int atom_of(Eigen::Index i) const noexcept
    {
        return static_cast<int>(i / (phonon_levels() * photon_levels()));
    }
    int phonon_of(Eigen::Index i) const noexcept
    {
        return static_cast<int>((i / photon_levels()) % phonon_levels());
    }
    int photon_of(Eigen::Index i) const noexcept { return static_cast<int>(i % photon_levels()); }

    friend bool operator==(const FockSpace&, const FockSpace&) = default;

    std::string describe() const
    {
        std::ostringstream os;
        os << "FockSpace(atom=" << atom_levels_ << ", phonon<=" << phonon_cutoff_;
        if (photon_cutoff_) {
            os << ", photon<=" << *photon_cutoff_;
        }
        os << ")";
        return os.str();
    }

private:
    int atom_levels_;
    int phonon_cutoff_;
    std::optional<int> photon_cutoff_;
};

namespace detail {

inline void require_same_space(const FockSpace& a, const FockSpace& b, const char* what)
{
    if (!(a == b)) {
        throw InvalidArgument(std::string(what) + ": dimension mismatch (" + a.describe() +
                              " vs " + b.describe() + ")");
    }
}

inline double max_abs(const ComplexMatrix& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

} // namespace detail

/// A linear operator on a FockSpace, stored dense.
class OperatorMatrix {
public:
    OperatorMatrix(FockSpace space, ComplexMatrix entries)
        : space_(std::move(space)), entries_(std::move(entries))
    {
        if (entries_.rows() != space_.dimension() || entries_.cols() != space_.dimension()) {
            detail::invalid("entries", "must be square with the dimension of the space");
        }
    }

    static OperatorMatrix zero(const FockSpace& s)
    {
        return {s, ComplexMatrix::Zero(s.dimension(), s.dimension())};
    }

    static OperatorMatrix identity(const FockSpace& s)
    {
        return {s, ComplexMatrix::Identity(s.dimension(), s.dimension())};
    }

    /// b: <m-1| b |m> = sqrt(m); annihilates the vacuum, truncated at the cutoff.
    static OperatorMatrix phonon_annihilation(const FockSpace& s)
    {
        return ladder(s, [&](Eigen::Index i) -> std::optional<std::pair<Eigen::Index, double>> {
            const int m = s.phonon_of(i);
            if (m == 0) {
                return std::nullopt;
            }
            return std::pair{s.index(s.atom_of(i), m - 1, s.photon_of(i)), std::sqrt(double(m))};
        });
    }

    static OperatorMatrix phonon_creation(const FockSpace& s)
    {
        return phonon_annihilation(s).adjoint();
    }

    static OperatorMatrix photon_annihilation(const FockSpace& s)
    {
        if (!s.has_photon()) {
            detail::invalid("space", "has no photon subsystem");
        }
        return ladder(s, [&](Eigen::Index i) -> std::optional<std::pair<Eigen::Index, double>> {
            const int n = s.photon_of(i);
            if (n == 0) {
                return std::nullopt;
            }
            return std::pair{s.index(s.atom_of(i), s.phonon_of(i), n - 1), std::sqrt(double(n))};
        });
    }

    static OperatorMatrix photon_creation(const FockSpace& s)
    {
        return photon_annihilation(s).adjoint();
    }

    /// sigma^- = |g><e|.
    static OperatorMatrix atom_lowering(const FockSpace& s)
    {
        if (!s.has_atom()) {
            detail::invalid("space", "has no atom subsystem");
        }
        return ladder(s, [&](Eigen::Index i) -> std::optional<std::pair<Eigen::Index, double>> {
            if (s.atom_of(i) == 0) {
                return std::nullopt;
            }
            return std::pair{s.index(0, s.phonon_of(i), s.photon_of(i)), 1.0};
        });
    }

    static OperatorMatrix atom_raising(const FockSpace& s) { return atom_lowering(s).adjoint(); }

    const FockSpace& space() const noexcept { return space_; }
    const ComplexMatrix& entries() const noexcept { return entries_; }
    Eigen::Index dimension() const noexcept { return entries_.rows(); }

    OperatorMatrix adjoint() const { return {space_, entries_.adjoint()}; }

    double hermiticity_error() const { return detail::max_abs(entries_ - entries_.adjoint()); }

    friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b)
    {
        detail::require_same_space(a.space_, b.space_, "operator product");
        return {a.space_, a.entries_ * b.entries_};
    }
    friend OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b)
    {
        detail::require_same_space(a.space_, b.space_, "operator sum");
        return {a.space_, a.entries_ + b.entries_};
    }
    friend OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b)
    {
        detail::require_same_space(a.space_, b.space_, "operator difference");
        return {a.space_, a.entries_ - b.entries_};
    }
    friend OperatorMatrix operator*(complex z, const OperatorMatrix& a) { return {a.space_, z * a.entries_}; }
    friend OperatorMatrix operator*(double x, const OperatorMatrix& a) { return {a.space_, x * a.entries_}; }

private:
    template <class Target>
    static OperatorMatrix ladder(const FockSpace& s, Target target)
    {
        ComplexMatrix m = ComplexMatrix::Zero(s.dimension(), s.dimension());
        for (Eigen::Index col = 0; col < s.dimension(); ++col) {
            if (auto t = target(col)) {
                m(t->first, col) = t->second;
            }
        }
        return {s, std::move(m)};
    }

    FockSpace space_;
    ComplexMatrix entries_;
};

/// Validation limits for a physical state.
struct DensityTolerances {
    double hermiticity = 1e-10;
    double trace = 1e-10;
    double min_eigenvalue = -1e-8;
};

/// A quantum state. Construction checks Hermiticity, unit trace and
/// positivity; an instance that exists is a valid state.
class DensityMatrix {
public:
    DensityMatrix(FockSpace space, ComplexMatrix entries, DensityTolerances tol = {})
        : space_(std::move(space)), entries_(std::move(entries))
    {
        if (entries_.rows() != space_.dimension() || entries_.cols() != space_.dimension()) {
            detail::invalid("rho", "must be square with the dimension of the space");
        }
        if (!entries_.allFinite()) {
            detail::invalid("rho", "entries must be finite");
        }
        if (const double h = hermiticity_error(); h > tol.hermiticity) {
            detail::invalid("rho", "not Hermitian (max |rho - rho^dagger| = " + std::to_string(h) + ")");
        }
        if (const double tr = std::abs(trace() - 1.0); tr > tol.trace) {
            detail::invalid("rho", "trace differs from 1 by " + std::to_string(tr));
        }
        if (const double e = min_eigenvalue(); e < tol.min_eigenvalue) {
            detail::invalid("rho", "negative eigenvalue " + std::to_string(e));
        }
    }

    /// |psi><psi| for a normalised-on-construction state vector.
    static DensityMatrix pure(const FockSpace& s, const Eigen::VectorXcd& psi)
    {
        if (psi.size() != s.dimension()) {
            detail::invalid("psi", "length must equal the space dimension");
        }
        const double norm = psi.norm();
        if (!(norm > 0.0)) {
            detail::invalid("psi", "must be non-zero");
        }
        const Eigen::VectorXcd v = psi / norm;
        return {s, v * v.adjoint()};
    }

    static DensityMatrix basis(const FockSpace& s, int atom, int phonon, int photon = 0)
    {
        if (atom < 0 || atom >= s.atom_levels() || phonon < 0 || phonon > s.phonon_cutoff() ||
            photon < 0 || photon >= s.photon_levels()) {
            detail::invalid("basis", "state label outside the truncated space");
        }
        ComplexMatrix m = ComplexMatrix::Zero(s.dimension(), s.dimension());
        m(s.index(atom, phonon, photon), s.index(atom, phonon, photon)) = 1.0;
        return {s, std::move(m)};
    }

    /// Truncated, renormalised thermal phonon state with p_m proportional to
    /// exp(-lambda m); atom in |g>, cavity in vacuum.
    static DensityMatrix thermal_phonons(const FockSpace& s, double lambda)
    {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) {
            detail::invalid("lambda", "must be positive and finite");
        }
        ComplexMatrix m = ComplexMatrix::Zero(s.dimension(), s.dimension());
        double z = 0.0;
        for (int k = 0; k <= s.phonon_cutoff(); ++k) {
            z += std::exp(-lambda * k);
        }
        for (int k = 0; k <= s.phonon_cutoff(); ++k) {
            m(s.index(0, k), s.index(0, k)) = std::exp(-lambda * k) / z;
        }
        return {s, std::move(m)};
    }

    const FockSpace& space() const noexcept { return space_; }
    const ComplexMatrix& entries() const noexcept { return entries_; }

    complex trace_complex() const { return entries_.trace(); }
    double trace() const { return entries_.trace().real(); }
    double hermiticity_error() const { return detail::max_abs(entries_ - entries_.adjoint()); }

    /// Rows and columns that are identically zero contribute exact zero
    /// eigenvalues, so only the occupied principal block is diagonalised.
    double min_eigenvalue() const
    {
        const Eigen::Index n = entries_.rows();
        std::vector<Eigen::Index> active;
        for (Eigen::Index i = 0; i < n; ++i) {
            if ((entries_.row(i).array() != complex(0.0)).any() || (entries_.col(i).array() != complex(0.0)).any()) {
                active.push_back(i);
            }
        }
        const auto k = static_cast<Eigen::Index>(active.size());
        if (k == 0) {
            return 0.0;
        }
        ComplexMatrix block(k, k);
        for (Eigen::Index r = 0; r < k; ++r) {
            for (Eigen::Index c = 0; c < k; ++c) {
                block(r, c) = 0.5 * (entries_(active[r], active[c]) + std::conj(entries_(active[c], active[r])));
            }
        }
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(block, Eigen::EigenvaluesOnly);
        const double lowest = es.eigenvalues().minCoeff();
        return k < n ? std::min(lowest, 0.0) : lowest;
    }

    /// Population of the highest retained phonon level.
    double phonon_tail() const
    {
        double p = 0.0;
        for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
            if (space_.phonon_of(i) == space_.phonon_cutoff()) {
                p += entries_(i, i).real();
            }
        }
        return p;
    }

    /// Population of the highest retained photon level (0 without a cavity).
    double photon_tail() const
    {
        if (!space_.has_photon()) {
            return 0.0;
        }
        double p = 0.0;
        for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
            if (space_.photon_of(i) == *space_.photon_cutoff()) {
                p += entries_(i, i).real();
            }
        }
        return p;
    }

    double truncation_tail() const { return std::max(phonon_tail(), photon_tail()); }

private:
    FockSpace space_;
    ComplexMatrix entries_;
};

/// Tr(op rho).
inline complex expectation(const OperatorMatrix& op, const DensityMatrix& rho)
{
    detail::require_same_space(op.space(), rho.space(), "expectation");
    return op.entries().cwiseProduct(rho.entries().transpose()).sum();
}

struct CollapseTerm {
    OperatorMatrix op;
    double rate; // rad/s, >= 0
};

/// H (in rad/s) plus weighted jump operators.
class LindbladModel {
public:
    LindbladModel(OperatorMatrix hamiltonian, std::vector<CollapseTerm> collapse_terms)
        : hamiltonian_(std::move(hamiltonian)), collapse_(std::move(collapse_terms))
    {
        if (!hamiltonian_.entries().allFinite()) {
            detail::invalid("hamiltonian", "entries must be finite");
        }
        if (hamiltonian_.hermiticity_error() > 1e-10) {
            detail::invalid("hamiltonian", "must be Hermitian");
        }
        for (const auto& c : collapse_) {
            detail::require_same_space(hamiltonian_.space(), c.op.space(), "collapse operator");
            if (!(c.rate >= 0.0) || !std::isfinite(c.rate)) {
                detail::invalid("rate", "collapse rates must be finite and >= 0");
            }
        }
    }

    const FockSpace& space() const noexcept { return hamiltonian_.space(); }
    const OperatorMatrix& hamiltonian() const noexcept { return hamiltonian_; }
    const std::vector<CollapseTerm>& collapse_terms() const noexcept { return collapse_; }

private:
    OperatorMatrix hamiltonian_;
    std::vector<CollapseTerm> collapse_;
};

namespace detail {

inline void require_finite(double v, const char* key)
{
    if (!std::isfinite(v)) {
        invalid(key, "must be finite");
    }
}

} // namespace detail

/// H = g (sigma^- b^dagger + sigma^+ b), single collapse term (sigma^-, gamma).
inline LindbladModel build_atom_phonon_model(double g, double gamma, const FockSpace& space)
{
    detail::require_finite(g, "g");
    detail::require_finite(gamma, "gamma");
    if (gamma < 0.0) {
        detail::invalid("gamma", "must be >= 0");
    }
    if (space.has_photon()) {
        detail::invalid("space", "atom-phonon model takes a space without a photon subsystem");
    }
    if (!space.has_atom()) {
        detail::invalid("space", "atom-phonon model needs the two-level atom");
    }
    const auto sm = OperatorMatrix::atom_lowering(space);
    const auto b = OperatorMatrix::phonon_annihilation(space);
    auto h = g * (sm * b.adjoint() + sm.adjoint() * b);
    return LindbladModel(std::move(h), {CollapseTerm{sm, gamma}});
}

/// H = g_eff (b c^dagger + b^dagger c), single collapse term (c, kappa).
inline LindbladModel build_phonon_photon_model(double g_eff, double kappa, const FockSpace& space)
{
    detail::require_finite(g_eff, "g_eff");
    detail::require_finite(kappa, "kappa");
    if (kappa < 0.0) {
        detail::invalid("kappa", "must be >= 0");
    }
    if (!space.has_photon()) {
        detail::invalid("space", "phonon-photon model needs a photon subsystem");
    }
    const auto b = OperatorMatrix::phonon_annihilation(space);
    const auto c = OperatorMatrix::photon_annihilation(space);
    auto h = g_eff * (b * c.adjoint() + b.adjoint() * c);
    return LindbladModel(std::move(h), {CollapseTerm{c, kappa}});
}

struct EvolveOptions {
    ode::Tolerances tolerances{};
    double tail_limit = 1e-6;
    DensityTolerances snapshot_checks{};
};

struct Snapshot {
    double time;
    DensityMatrix rho;
};

namespace detail {

struct Entry {
    Eigen::Index index;
    complex value;
};

/// Nonzeros of each column of a dense operator.
inline std::vector<std::vector<Entry>> column_nonzeros(const ComplexMatrix& m)
{
    std::vector<std::vector<Entry>> cols(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if (m(r, c) != complex(0.0)) {
                cols[c].push_back({r, m(r, c)});
            }
        }
    }
    return cols;
}

/// The Lindblad generator as a sparse superoperator acting on vec(rho)
/// (column-major), restricted to the matrix elements reachable from the
/// support of the initial state. Elements outside that set have identically
/// zero time derivative for all time, so dropping them is exact.
///
///   L(rho) = K rho + rho K^dagger + sum_k J_k rho J_k^dagger,
///   K = -iH - 1/2 sum_k J_k^dagger J_k,  J_k = sqrt(rate_k) L_k.
class Liouvillian {
public:
    using Sparse = Eigen::SparseMatrix<complex, Eigen::RowMajor>;

    Liouvillian(const LindbladModel& model, const ComplexMatrix& rho0)
        : n_(model.space().dimension())
    {
        ComplexMatrix k = complex(0.0, -1.0) * model.hamiltonian().entries();
        std::vector<std::vector<std::vector<Entry>>> jumps;
        for (const auto& c : model.collapse_terms()) {
            if (c.rate > 0.0) {
                k -= (0.5 * c.rate) * (c.op.entries().adjoint() * c.op.entries());
                jumps.push_back(column_nonzeros(std::sqrt(c.rate) * c.op.entries()));
            }
        }
        const auto kcols = column_nonzeros(k);

        // Calls f(target element, coefficient) for every image of the matrix unit |a><b|.
        auto for_each_image = [&](Eigen::Index a, Eigen::Index b, auto&& f) {
            for (const auto& e : kcols[a]) {
                f(e.index + b * n_, e.value);
            }
            for (const auto& e : kcols[b]) {
                f(a + e.index * n_, std::conj(e.value));
            }
            for (const auto& j : jumps) {
                for (const auto& ea : j[a]) {
                    for (const auto& eb : j[b]) {
                        f(ea.index + eb.index * n_, ea.value * std::conj(eb.value));
                    }
                }
            }
        };

        // Breadth-first closure of the initial support.
        const Eigen::Index total = n_ * n_;
        std::vector<Eigen::Index> slot(static_cast<std::size_t>(total), -1);
        std::vector<Eigen::Index> queue;
        for (Eigen::Index e = 0; e < total; ++e) {
            if (rho0(e % n_, e / n_) != complex(0.0)) {
                slot[e] = static_cast<Eigen::Index>(queue.size());
                queue.push_back(e);
            }
        }
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const Eigen::Index e = queue[head];
            for_each_image(e % n_, e / n_, [&](Eigen::Index target, complex) {
                if (slot[target] < 0) {
                    slot[target] = static_cast<Eigen::Index>(queue.size());
                    queue.push_back(target);
                }
            });
        }
        support_ = std::move(queue);

        std::vector<Eigen::Triplet<complex>> triplets;
        for (std::size_t col = 0; col < support_.size(); ++col) {
            const Eigen::Index e = support_[col];
            for_each_image(e % n_, e / n_, [&](Eigen::Index target, complex v) {
                triplets.emplace_back(slot[target], static_cast<Eigen::Index>(col), v);
            });
        }
        const auto m = static_cast<Eigen::Index>(support_.size());
        generator_.resize(m, m);
        generator_.setFromTriplets(triplets.begin(), triplets.end());
        generator_.makeCompressed();
    }

    Eigen::Index reduced_size() const noexcept { return static_cast<Eigen::Index>(support_.size()); }

    Eigen::VectorXcd gather(const ComplexMatrix& rho) const
    {
        Eigen::VectorXcd v(reduced_size());
        for (std::size_t i = 0; i < support_.size(); ++i) {
            v(i) = rho(support_[i] % n_, support_[i] / n_);
        }
        return v;
    }

    ComplexMatrix scatter(const Eigen::VectorXcd& v) const
    {
        ComplexMatrix rho = ComplexMatrix::Zero(n_, n_);
        for (std::size_t i = 0; i < support_.size(); ++i) {
            rho(support_[i] % n_, support_[i] / n_) = v(i);
        }
        return rho;
    }

    void operator()(double /*t*/, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) const
    {
        dy.noalias() = generator_ * y;
    }

private:
    Eigen::Index n_;
    std::vector<Eigen::Index> support_;
    Sparse generator_;
};

} // namespace detail

/// Integrates the master equation and returns snapshots at t = 0, dt, 2dt, ...
/// (plus t_final if it is not a multiple of dt). Throws TruncationOverflow when
/// the top phonon or photon level holds more than `tail_limit` population at
/// any snapshot, StepFailure when the integrator gives up, and NumericalError
/// if a snapshot is no longer a valid density matrix.
inline std::vector<Snapshot> evolve(const LindbladModel& model, const DensityMatrix& rho0, double t_final,
                                    double dt_observe, const EvolveOptions& opts = {})
{
    detail::require_same_space(model.space(), rho0.space(), "evolve");
    if (!(t_final > 0.0) || !std::isfinite(t_final)) {
        detail::invalid("t_final", "must be positive and finite");
    }
    if (!(dt_observe > 0.0) || dt_observe > t_final) {
        detail::invalid("dt_observe", "must be in (0, t_final]");
    }

    auto check_tail = [&](const DensityMatrix& rho, double t) {
        const double tail = rho.truncation_tail();
        if (tail > opts.tail_limit) {
            std::ostringstream os;
            os << "truncation overflow: top Fock level population " << tail << " exceeds "
               << opts.tail_limit << " at t=" << t;
            throw TruncationOverflow(os.str(), t, tail);
        }
    };

    std::vector<Snapshot> out;
    check_tail(rho0, 0.0);
    out.push_back({0.0, rho0});

    const detail::Liouvillian generator(model, rho0.entries());
    auto integrator = ode::make_integrator<Eigen::VectorXcd>(
        [&generator](double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) { generator(t, y, dy); },
        opts.tolerances);
    Eigen::VectorXcd y = generator.gather(rho0.entries());
    double t = 0.0;
    const auto n_obs = static_cast<long long>(std::floor(t_final / dt_observe * (1.0 + 1e-12)));
    std::vector<double> times;
    for (long long k = 1; k <= n_obs; ++k) {
        times.push_back(std::min(double(k) * dt_observe, t_final));
    }
    if (times.empty() || times.back() < t_final * (1.0 - 1e-12)) {
        times.push_back(t_final);
    }

    for (double target : times) {
        integrator.advance(y, t, target);
        std::optional<DensityMatrix> rho;
        try {
            rho.emplace(rho0.space(), generator.scatter(y), opts.snapshot_checks);
        } catch (const InvalidArgument& e) {
            std::ostringstream os;
            os << "state left the physical set at t=" << t << ": " << e.what();
            throw NumericalError(os.str());
        }
        check_tail(*rho, t);
        out.push_back({t, std::move(*rho)});
    }
    return out;
}

} // namespace phonox
