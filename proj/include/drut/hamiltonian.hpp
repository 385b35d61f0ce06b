#ifndef DRUT_HAMILTONIAN_HPP
#define DRUT_HAMILTONIAN_HPP

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "drut/fockspace.hpp"
#include "drut/types.hpp"

namespace drut {

/// (b_mode^dag)^p b_mode^q for one participating mode.
struct ModePower {
    int mode = 0;
    int p = 0;
    int q = 0;

    auto operator<=>(const ModePower&) const = default;
};

/// Normal-ordered monomial prod_mode (b^dag)^p b^q. Modes are kept sorted and
/// each participating mode has p + q > 0.
class TermKey {
public:
    TermKey() = default;
    explicit TermKey(std::vector<ModePower> powers);

    static TermKey single(int mode, int p, int q);

    const std::vector<ModePower>& powers() const noexcept { return powers_; }
    int order() const noexcept;
    bool is_single_mode() const noexcept { return powers_.size() == 1; }
    bool empty() const noexcept { return powers_.empty(); }
    std::vector<int> modes() const;

    /// Powers on `mode` (0, 0 when the mode does not participate).
    ModePower on(int mode) const noexcept;

    /// Key of the Hermitian conjugate monomial (p and q swapped).
    TermKey conjugate() const;
    bool self_conjugate() const { return conjugate() == *this; }

    /// prod (conj beta)^p beta^q.
    Complex monomial(const std::vector<Complex>& beta) const;

    std::string str() const;

    auto operator<=>(const TermKey&) const = default;

private:
    std::vector<ModePower> powers_;
};

using DisplacementVector = std::vector<Complex>;

struct HamiltonianSpec {
    int modes = 1;
    int max_order = 1;
    std::map<TermKey, Complex> terms;
    double identity_offset = 0.0;
    double g_max = 1.0;

    Complex coefficient(const TermKey& key) const;

    /// Set `key` and its conjugate partner consistently.
    void set_pair(const TermKey& key, Complex value);

    /// Drop terms with |coefficient| <= tol.
    void prune(double tol = 0.0);
};

/// Returns `spec` unchanged when every coefficient pairs with the conjugate
/// of its partner key within 1e-12 and the built matrix is Hermitian;
/// otherwise throws HermiticityError naming the offending keys.
const HamiltonianSpec& validate_hermitian(const HamiltonianSpec& spec);

/// Truncated matrix of the Hamiltonian (normal order per term, plus the
/// identity offset). Throws CutoffError when n_max < max_order.
CMatrix build_matrix(const HamiltonianSpec& spec, const FockCutoff& cutoff);

/// Single-mode normal-ordered monomial (b^dag)^p b^q on n_max + 1 levels.
CMatrix monomial_matrix(int p, int q, int n_max);

/// C(beta) = sum_terms g prod (conj beta)^p beta^q; the identity offset is
/// not included.
double constant_term(const HamiltonianSpec& spec, const DisplacementVector& beta);

/// Diagonal of the phase-averaged displaced Hamiltonian, built term by term
/// from the binomial expansion of (b^dag + conj beta)^p (b + beta)^q with
/// only the i = j (number-conserving) pieces kept per mode.
RVector effective_exact_diagonal(const HamiltonianSpec& spec, const DisplacementVector& beta,
                                 const FockCutoff& cutoff);
CMatrix effective_exact(const HamiltonianSpec& spec, const DisplacementVector& beta,
                        const FockCutoff& cutoff);

/// All admissible keys of total order 1..d. Single-mode keys first (by mode),
/// then couplings touching at least two modes.
std::vector<TermKey> admissible_keys(int modes, int d, bool include_couplings = true);

/// Random Hermitian-paired spec; each conjugate pair is populated with
/// probability `sparsity`, |g| <= g_max.
HamiltonianSpec random_spec(int modes, int d, double g_max, double sparsity, std::uint64_t seed,
                            bool include_couplings = true);

/// One-mode spec holding the single-mode terms of `mode` (re-indexed to 0).
HamiltonianSpec single_mode_restriction(const HamiltonianSpec& spec, int mode);

/// Characteristic scale g_max (1 + r_max)^d d^2 used for Trotter step counts.
double hamiltonian_scale(const HamiltonianSpec& spec, double r_max);

} // namespace drut

#endif
