#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fuzzyjoin {

enum class LossKind { Triplet, Improved, Angular, Adapted };

std::string_view to_string(LossKind kind) noexcept;
/// Throws Error(InvalidArgument) for an unknown name.
LossKind parse_loss_kind(std::string_view name);

struct LossParams {
  LossKind kind = LossKind::Adapted;
  double margin = 1.0;        // α
  double intra_margin = 0.1;  // α̂, improved loss only
  double lambda = 0.02;       // improved loss only
  double angle = 0.7853981633974483;  // radians, angular loss only
  bool normalize_inputs = false;

  /// Published defaults per kind; adapted is the only un-normalized one.
  static LossParams defaults(LossKind kind);
  /// Throws Error(InvalidArgument) when a parameter is out of range.
  void validate() const;
};

/// Borrowed views of the three embeddings of one triplet.
struct TripletEmbeddings {
  std::span<const double> anchor;
  std::span<const double> positive;
  std::span<const double> negative;
};

struct TripletGradients {
  std::vector<double> anchor;
  std::vector<double> positive;
  std::vector<double> negative;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

// The four objectives evaluated on embeddings exactly as given.
double triplet_loss(const TripletEmbeddings& t, double margin);
double improved_loss(const TripletEmbeddings& t, double margin,
                     double intra_margin, double lambda);
double angular_loss(const TripletEmbeddings& t, double angle);
double adapted_loss(const TripletEmbeddings& t, double margin);

/// Loss of raw encoder outputs; normalizes first when params.normalize_inputs.
double loss_value(const TripletEmbeddings& raw, const LossParams& params);

/// Gradients of loss_value with respect to the raw embeddings. Hinges
/// contribute zero gradient at and below their kink.
TripletGradients loss_gradients(const TripletEmbeddings& raw,
                                const LossParams& params);

/// Sum of per-triplet losses. Throws Error(EmptyBatch) on an empty list.
double batch_loss(std::span<const TripletEmbeddings> triplets,
                  const LossParams& params);

}  // namespace fuzzyjoin
