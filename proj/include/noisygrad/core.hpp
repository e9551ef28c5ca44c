#pragma once
// Domains, norms, seeded randomness and the gradient-oracle interface.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace noisygrad {

using Vector = std::vector<double>;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid experiment configuration; carries the offending field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// ---------------------------------------------------------------- norms

enum class NormKind { euclidean, max, one };

class Norm {
 public:
  constexpr Norm() = default;
  constexpr explicit Norm(NormKind k) : kind_(k) {}
  static constexpr Norm euclidean() { return Norm(NormKind::euclidean); }
  static constexpr Norm max() { return Norm(NormKind::max); }
  static constexpr Norm one() { return Norm(NormKind::one); }

  constexpr NormKind kind() const { return kind_; }
  constexpr Norm dual() const {
    switch (kind_) {
      case NormKind::max: return one();
      case NormKind::one: return max();
      default: return euclidean();
    }
  }
  double operator()(std::span<const double> x) const;
  friend constexpr bool operator==(Norm a, Norm b) { return a.kind_ == b.kind_; }

 private:
  NormKind kind_ = NormKind::euclidean;
};

double dual_norm(Norm norm, std::span<const double> g);
double dot(std::span<const double> a, std::span<const double> b);
double distance(Norm norm, std::span<const double> a, std::span<const double> b);
std::string to_string(NormKind k);

// ---------------------------------------------------------------- randomness

// Deterministic random stream keyed by (master_seed, stream_id). Streams with
// distinct ids are seeded through a 64-bit mixing function.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  // Engine seed derived from (master_seed, stream_id).
  std::uint64_t derived_seed() const { return derived_; }

  // Child stream whose identity depends only on this stream's key and k.
  RngStream substream(std::uint64_t k) const;

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // N(0, 1)
  double rademacher();                    // +-1 with probability 1/2
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t derived_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

std::uint64_t mix64(std::uint64_t x);

// ---------------------------------------------------------------- bodies

enum class BodyKind { box, ball };

class ConvexBody {
 public:
  static ConvexBody box(Vector lower, Vector upper);
  static ConvexBody ball(Vector center, double radius);

  BodyKind kind() const { return kind_; }
  std::size_t dimension() const { return dim_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const Vector& center() const { return center_; }
  double radius() const { return radius_; }

  // Euclidean projection.
  Vector project(std::span<const double> x) const;
  void project_inplace(std::span<double> x) const;
  bool contains(std::span<const double> x, double tol = 0.0) const;
  // Same body grown by `margin` (box: every face; ball: radius).
  ConvexBody dilate(double margin) const;
  // sup over the body of the Euclidean norm.
  double max_norm() const;
  Vector sample_uniform(RngStream& rng) const;

 private:
  ConvexBody() = default;
  BodyKind kind_ = BodyKind::box;
  std::size_t dim_ = 0;
  Vector lower_, upper_, center_;
  double radius_ = 0.0;
};

Vector project(const ConvexBody& body, std::span<const double> x);

// ---------------------------------------------------------------- oracle contract

struct OracleQuery {
  Vector x;
  double delta = 1.0;
};

// Throws DomainError unless 0 < delta <= 1.
void validate_delta(double delta);

struct OracleResponse {
  Vector g;  // gradient estimate
  Vector y;  // evaluation point in the delta-vicinity of x
  // Second evaluation point of two-point feedback, when there is one.
  std::optional<Vector> y_secondary;
};

// Builds a response and enforces norm(x - y) <= delta (std::logic_error otherwise).
OracleResponse make_response(const OracleQuery& q, Vector g, Vector y, Norm norm,
                             std::optional<Vector> y_secondary = std::nullopt);

enum class OracleType { type_I, type_II };
std::string to_string(OracleType t);

struct OracleEnvelope {
  double C1 = 0.0;
  double p = 0.0;
  double C2 = 0.0;
  double q = 0.0;
  OracleType type = OracleType::type_I;

  double c1(double delta) const;
  double c2(double delta) const;
};

// (C1 delta^p, C2 delta^-q), with delta validated.
std::pair<double, double> envelope_check(const OracleEnvelope& env, double delta);

// Memoryless gradient oracle. Implementations are immutable; all randomness
// comes from the stream passed to query().
class GradientOracle {
 public:
  virtual ~GradientOracle() = default;
  virtual std::size_t dimension() const = 0;
  virtual const OracleEnvelope& envelope() const = 0;
  virtual Norm norm() const { return Norm::euclidean(); }
  // True when E[Y] = x.
  virtual bool unbiased() const { return true; }
  virtual OracleResponse query(const OracleQuery& q, RngStream& rng) const = 0;

  // Exact quantities of the underlying objective, used for error accounting.
  virtual Vector reference_gradient(std::span<const double> x) const = 0;
  virtual double loss(std::span<const double> x) const = 0;
  virtual double optimal_loss() const = 0;
};

}  // namespace noisygrad
