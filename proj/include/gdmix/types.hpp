#ifndef GDMIX_TYPES_HPP_
#define GDMIX_TYPES_HPP_

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdmix {

// Numeric policy shared across modules.
constexpr double kSumTolerance = 1e-9;    // relative tolerance on sum(x) == A
constexpr double kZeroReplacement = 1e-4; // zero components become 1e-4 * A
constexpr double kShapeMin = 1e-3;        // box on GD shape parameters
constexpr double kShapeMax = 1e4;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonPositiveComponent : Error { using Error::Error; };
struct SumMismatch : Error { using Error::Error; };
struct AllZeroInput : Error { using Error::Error; };
struct DegenerateRemainder : Error { using Error::Error; };
struct NonPositiveAlpha : Error { using Error::Error; };
struct EmptyAfterFiltering : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct SingularBlock : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct NoEffectiveData : Error { using Error::Error; };
struct NonFiniteObjective : Error { using Error::Error; };
struct ClassTooSmall : Error { using Error::Error; };
struct EmptyMatrix : Error { using Error::Error; };
struct WouldEmptyTree : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// A point on the scaled simplex: D+1 strictly positive values summing to
// the scale A, optionally tagged with a class label.
struct CompositionalSample {
  std::vector<double> values;
  double scale = 1.0;
  std::optional<int> label;

  int parts() const { return static_cast<int>(values.size()); } // D + 1
  int dim() const { return parts() - 1; }                       // D
};

// Labeled collection of samples sharing dimensionality and scale.
struct Dataset {
  std::vector<CompositionalSample> samples;
  int class_count = 0;
  std::vector<std::string> feature_names;

  int size() const { return static_cast<int>(samples.size()); }
  int parts() const { return samples.empty() ? 0 : samples.front().parts(); }
  int dim() const { return parts() - 1; }
  double scale() const { return samples.empty() ? 1.0 : samples.front().scale; }

  // Checks uniform dimensionality/scale and label range; throws on violation.
  void check_consistent() const;
};

} // namespace gdmix

#endif // GDMIX_TYPES_HPP_
