#include "fuzzyjoin/losses.hpp"

#include <cmath>
#include <numbers>

#include "fuzzyjoin/encoder.hpp"
#include "fuzzyjoin/error.hpp"

namespace fuzzyjoin {

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::Triplet: return "triplet";
    case LossKind::Improved: return "improved";
    case LossKind::Angular: return "angular";
    case LossKind::Adapted: return "adapted";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind k : {LossKind::Triplet, LossKind::Improved, LossKind::Angular,
                     LossKind::Adapted}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown loss '" + std::string(name) + "'");
}

LossParams LossParams::defaults(LossKind kind) {
  LossParams p;
  p.kind = kind;
  switch (kind) {
    case LossKind::Triplet:
      p.margin = 0.2;
      p.normalize_inputs = true;
      break;
    case LossKind::Improved:
      p.margin = 1.0;
      p.intra_margin = 0.1;
      p.lambda = 0.02;
      p.normalize_inputs = true;
      break;
    case LossKind::Angular:
      p.angle = std::numbers::pi / 4.0;
      p.normalize_inputs = true;
      break;
    case LossKind::Adapted:
      p.margin = 1.0;
      p.normalize_inputs = false;
      break;
  }
  return p;
}

void LossParams::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, m); };
  if (!(margin > 0.0)) fail("margin must be > 0");
  if (!(intra_margin >= 0.0)) fail("intra margin must be >= 0");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(angle > 0.0 && angle < std::numbers::pi / 2.0)) {
    fail("angle must lie in (0, pi/2)");
  }
}

namespace {

void check_same_size(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "vector lengths differ: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  }
}

void check_triplet(const TripletEmbeddings& t) {
  check_same_size(t.anchor, t.positive);
  check_same_size(t.anchor, t.negative);
}

double hinge(double x) { return x > 0.0 ? x : 0.0; }

// v = a - b scaled
std::vector<double> scaled_diff(std::span<const double> a,
                                std::span<const double> b, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * (a[i] - b[i]);
  return out;
}

void axpy(std::vector<double>& y, double s, std::span<const double> a,
          std::span<const double> b) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * (a[i] - b[i]);
}

TripletGradients zero_grads(std::size_t n) {
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
          std::vector<double>(n, 0.0)};
}

TripletGradients raw_gradients(const TripletEmbeddings& t, const LossParams& p) {
  const auto& a = t.anchor;
  const auto& pos = t.positive;
  const auto& n = t.negative;
  auto g = zero_grads(a.size());
  const double dp = squared_distance(a, pos);

  switch (p.kind) {
    case LossKind::Triplet: {
      const double dn = squared_distance(a, n);
      if (dp - dn + p.margin > 0.0) {
        axpy(g.anchor, 2.0, n, pos);
        axpy(g.positive, 2.0, pos, a);
        axpy(g.negative, 2.0, a, n);
      }
      break;
    }
    case LossKind::Improved: {
      const double dn = squared_distance(a, n);
      const double dpn = squared_distance(pos, n);
      const double phi = dp - 0.5 * (dn + dpn) + p.margin;
      const double psi = dp - p.intra_margin;
      if (phi > 0.0) {
        axpy(g.anchor, 2.0, a, pos);
        axpy(g.anchor, -1.0, a, n);
        axpy(g.positive, 2.0, pos, a);
        axpy(g.positive, -1.0, pos, n);
        axpy(g.negative, 1.0, a, n);
        axpy(g.negative, 1.0, pos, n);
      }
      if (psi > 0.0) {
        axpy(g.anchor, 2.0 * p.lambda, a, pos);
        axpy(g.positive, 2.0 * p.lambda, pos, a);
      }
      break;
    }
    case LossKind::Angular: {
      const double tan_a = std::tan(p.angle);
      const double k = 4.0 * tan_a * tan_a;
      std::vector<double> c(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) c[i] = 0.5 * (a[i] + pos[i]);
      if (dp - k * squared_distance(n, c) > 0.0) {
        // ∂/∂a and ∂/∂p of −k‖n − c‖² are both −k (c − n)
        axpy(g.anchor, 2.0, a, pos);
        axpy(g.anchor, -k, c, n);
        axpy(g.positive, 2.0, pos, a);
        axpy(g.positive, -k, c, n);
        axpy(g.negative, -2.0 * k, n, c);
      }
      break;
    }
    case LossKind::Adapted: {
      g.anchor = scaled_diff(a, pos, 2.0);
      g.positive = scaled_diff(pos, a, 2.0);
      const double d = euclidean_distance(a, n);
      const double slack = p.margin - d;
      if (slack > 0.0 && d > 0.0) {
        // d/dx [α − ‖a − n‖]² = −2 (α − d) (a − n) / d
        const double s = 2.0 * slack / d;
        axpy(g.anchor, -s, a, n);
        axpy(g.negative, s, a, n);
      }
      break;
    }
  }
  return g;
}

double raw_loss(const TripletEmbeddings& t, const LossParams& p) {
  switch (p.kind) {
    case LossKind::Triplet: return triplet_loss(t, p.margin);
    case LossKind::Improved:
      return improved_loss(t, p.margin, p.intra_margin, p.lambda);
    case LossKind::Angular: return angular_loss(t, p.angle);
    case LossKind::Adapted: return adapted_loss(t, p.margin);
  }
  return 0.0;
}

}  // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_same_size(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

double triplet_loss(const TripletEmbeddings& t, double margin) {
  check_triplet(t);
  return hinge(squared_distance(t.anchor, t.positive) -
               squared_distance(t.anchor, t.negative) + margin);
}

double improved_loss(const TripletEmbeddings& t, double margin,
                     double intra_margin, double lambda) {
  check_triplet(t);
  const double dp = squared_distance(t.anchor, t.positive);
  const double dn = squared_distance(t.anchor, t.negative);
  const double dpn = squared_distance(t.positive, t.negative);
  const double psi = dp - intra_margin;
  const double phi = dp - 0.5 * (dn + dpn) + margin;
  return hinge(phi) + lambda * hinge(psi);
}

double angular_loss(const TripletEmbeddings& t, double angle) {
  check_triplet(t);
  std::vector<double> c(t.anchor.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = 0.5 * (t.anchor[i] + t.positive[i]);
  }
  const double tan_a = std::tan(angle);
  return hinge(squared_distance(t.anchor, t.positive) -
               4.0 * tan_a * tan_a * squared_distance(t.negative, c));
}

double adapted_loss(const TripletEmbeddings& t, double margin) {
  check_triplet(t);
  const double slack = hinge(margin - euclidean_distance(t.anchor, t.negative));
  return squared_distance(t.anchor, t.positive) + slack * slack;
}

double loss_value(const TripletEmbeddings& raw, const LossParams& params) {
  check_triplet(raw);
  if (!params.normalize_inputs) return raw_loss(raw, params);
  const auto a = normalize(raw.anchor);
  const auto p = normalize(raw.positive);
  const auto n = normalize(raw.negative);
  return raw_loss({a, p, n}, params);
}

TripletGradients loss_gradients(const TripletEmbeddings& raw,
                                const LossParams& params) {
  check_triplet(raw);
  if (!params.normalize_inputs) return raw_gradients(raw, params);
  const auto a = normalize(raw.anchor);
  const auto p = normalize(raw.positive);
  const auto n = normalize(raw.negative);
  auto g = raw_gradients({a, p, n}, params);
  return {normalize_backward(raw.anchor, g.anchor),
          normalize_backward(raw.positive, g.positive),
          normalize_backward(raw.negative, g.negative)};
}

double batch_loss(std::span<const TripletEmbeddings> triplets,
                  const LossParams& params) {
  if (triplets.empty()) throw Error(ErrorCode::EmptyBatch, "no triplets");
  double total = 0.0;
  for (const auto& t : triplets) total += loss_value(t, params);
  return total;
}

}  // namespace fuzzyjoin
