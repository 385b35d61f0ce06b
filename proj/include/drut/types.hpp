#ifndef DRUT_TYPES_HPP
#define DRUT_TYPES_HPP

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace drut {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the Fock truncation is too small for the requested operation.
class CutoffError : public Error {
public:
    using Error::Error;
};

class HermiticityError : public Error {
public:
    using Error::Error;
};

/// Singular or rank-deficient linear system in a recovery stage.
class RankError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// RPE round whose nearest-candidate gap exceeded the consistency window.
class RpeInconsistency : public Error {
public:
    RpeInconsistency(const std::string& what, int round) : Error(what), round_(round) {}
    int round() const noexcept { return round_; }

private:
    int round_;
};

/// Bisection preconditions (bracket signs, overlap feasibility) not met.
class BracketError : public Error {
public:
    using Error::Error;
};

} // namespace drut

#endif
