#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace acr {

//! Base class for all recoverable estimation/numerics failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//! Cholesky pivot fell below the relative threshold.
struct NotPositiveDefinite : Error {
  using Error::Error;
};

//! Iteration cap reached; `best` carries the last/best iterate.
struct NoConvergence : Error {
  std::vector<double> best;
  NoConvergence(const std::string& what, std::vector<double> best_iterate)
      : Error(what), best(std::move(best_iterate)) {}
  explicit NoConvergence(const std::string& what) : Error(what) {}
};

//! The xi-values are numerically indistinguishable; the ACR regression is
//! unidentifiable.
struct DegenerateDesign : Error {
  using Error::Error;
};

//! Between-block variance too small to divide by.
struct DegenerateVariance : Error {
  using Error::Error;
};

struct RankDeficient : Error {
  using Error::Error;
};

//! Error density evaluated to (numerically) zero at a fitted quantile.
struct ZeroDensity : Error {
  using Error::Error;
};

//! No sample point inside the kernel window.
struct EmptyWindow : Error {
  using Error::Error;
};

//! Every bandwidth in a cross-validation grid failed on every point.
struct AllWindowsEmpty : Error {
  using Error::Error;
};

//! Block construction parameters give L = 0 or fewer than two blocks.
struct InvalidScheme : Error {
  using Error::Error;
};

// CLI-side failures.
struct UsageError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace acr
