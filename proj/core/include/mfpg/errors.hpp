#pragma once

#include <stdexcept>
#include <string>

namespace mfpg {

// Failure classes surfaced by the engine. The CLI maps each kind to a
// distinct exit code, so keep the enum stable.
enum class ErrorKind {
    InvalidArgument,
    DegeneratePopulation,
    DegenerateGame,
    TransformationDegenerate,
    SolverDiverged,
    NumericalOverflow,
    ParseError,
    IoError,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::DegeneratePopulation: return "degenerate-population";
        case ErrorKind::DegenerateGame: return "degenerate-game";
        case ErrorKind::TransformationDegenerate: return "transformation-degenerate";
        case ErrorKind::SolverDiverged: return "solver-diverged";
        case ErrorKind::NumericalOverflow: return "numerical-overflow";
        case ErrorKind::ParseError: return "parse-error";
        case ErrorKind::IoError: return "io-error";
    }
    return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

} // namespace mfpg
