#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ltube {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A geometric constraint of the cell template (or of a perturbed cell) is
/// violated. The message names the constraint.
class InvalidGeometry : public Error {
  public:
    using Error::Error;
};

/// A root polish did not converge within its iteration budget.
class NumericFailure : public Error {
  public:
    using Error::Error;
};

/// A curvature query was made within the edge tolerance of a patch border.
class EdgeProximity : public Error {
  public:
    using Error::Error;
};

/// No boundary intersection was found within the free-flight cap.
class StuckTrajectory : public Error {
  public:
    using Error::Error;
};

/// The orbit met a tangential collision, an edge, or a section boundary
/// before reaching its target section.
class SingularOrbit : public Error {
  public:
    using Error::Error;
};

/// A section specification that cannot carry any line element.
class InvalidSection : public Error {
  public:
    using Error::Error;
};

/// The in-cell collision budget ran out before the orbit left the cell.
class NotExited : public Error {
  public:
    explicit NotExited(std::int64_t budget)
        : Error("orbit did not exit the cell within " + std::to_string(budget) + " events"),
          budget_(budget) {}
    std::int64_t budget() const { return budget_; }

  private:
    std::int64_t budget_;
};

/// Malformed configuration text.
class ConfigError : public Error {
  public:
    using Error::Error;
};

}  // namespace ltube
