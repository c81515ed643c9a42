#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "heloc/autodiff.hpp"
#include "heloc/config.hpp"
#include "heloc/hcl.hpp"
#include "heloc/random.hpp"

namespace heloc {

/// Pooled representation of one snippet.
struct CodeVector {
  std::vector<double> r;
};

/// Elementwise mean over node rows. Throws ShapeError on an empty matrix.
CodeVector pool(const Tensor2& x_nd);

struct ClassifierHead {
  Param w0;  // H×c
  Param b0;  // 1×c
  double smoothing = 0.1;

  static ClassifierHead init(std::size_t dim, std::size_t classes, Rng& rng, double smoothing = 0.1);
  std::size_t classes() const noexcept { return b0.value.cols(); }
};

/// (1 − λ) on the true class and λ/(c − 1) on every other class.
Tensor2 smoothed_target(std::size_t label, std::size_t classes, double smoothing);

/// Cross-entropy of softmax(r·W₀ + b₀) against the smoothed target.
/// Throws DomainError when label ≥ c.
Var classify_loss(Var r, std::size_t label, Var w0, Var b0, double smoothing);
double classify_loss(const CodeVector& r, std::size_t label, const ClassifierHead& head);

std::vector<double> classify_logits(const CodeVector& r, const ClassifierHead& head);
/// Index of the largest logit; ties go to the lowest index.
std::size_t classify_predict(const CodeVector& r, const ClassifierHead& head);
std::size_t argmax(std::span<const double> values);

struct LabeledGraph {
  const PreparedGraph* graph = nullptr;
  std::size_t label = 0;
};

struct FineTuneOptions {
  std::size_t epochs = 10;
  double lr = 1e-3;
  std::size_t batch_size = 16;
  /// Epochs without a validation-accuracy improvement before stopping.
  std::size_t patience = 3;
  double smoothing = 0.1;
  std::uint64_t seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct FineTuneResult {
  std::vector<RsgnnLayerParams> encoder;
  ClassifierHead head;
  std::vector<EpochStats> history;
  /// Epoch whose params were kept; 0 when no epoch ran.
  std::size_t best_epoch = 0;
};

/// Jointly trains the encoder and a fresh classifier head with Adam. With a
/// non-empty validation set the params of the best validation epoch are kept
/// and training stops after `patience` epochs without improvement.
/// Throws DomainError for an empty training set or an out-of-range label.
FineTuneResult fine_tune(const std::vector<RsgnnLayerParams>& encoder, const TrainConfig& cfg,
                         std::span<const LabeledGraph> train, std::span<const LabeledGraph> validation,
                         std::size_t classes, const FineTuneOptions& opts);

/// Mean-pooled encoding of one tree.
CodeVector embed_graph(const PreparedGraph& g, std::span<const RsgnnLayerParams> encoder,
                       const TrainConfig& cfg);

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

/// Cosine r1·r2 / (|r1||r2|). Throws DomainError if either vector is zero.
double relatedness(std::span<const double> r1, std::span<const double> r2);

/// (y − relatedness)² for y ∈ {1, −1}.
double clone_loss(std::span<const double> r1, std::span<const double> r2, int y);

struct CloneVerdict {
  double p = 0.0;
  bool is_clone = false;
};

/// Optional linear map a·p + b fitted to the ±1 labels by least squares.
struct CloneCalibration {
  double scale = 1.0;
  double offset = 0.0;

  static CloneCalibration fit(std::span<const double> p, std::span<const int> y);
  double apply(double p) const noexcept { return scale * p + offset; }
};

/// is_clone iff p > 0, where p is the relatedness, or its calibrated value
/// when a calibration is given.
CloneVerdict clone_predict(std::span<const double> r1, std::span<const double> r2);
CloneVerdict clone_predict(std::span<const double> r1, std::span<const double> r2,
                           const CloneCalibration& calibration);

struct KMeansResult {
  std::vector<std::size_t> assignments;
  std::vector<std::vector<double>> centroids;
  /// Inertia after each assignment step.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  bool converged = false;

  double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

/// Lloyd's algorithm with k-means++ seeding. Ties go to the lowest centroid
/// index. Stops when assignments stop changing or after max_iters.
/// Throws DomainError when k is zero or exceeds the number of points.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                    std::uint64_t seed, std::size_t max_iters = 100);

/// Adjusted Rand index from the contingency table of two labelings.
/// Throws ShapeError on a length mismatch.
double ari(std::span<const int> predicted, std::span<const int> truth);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators yield 0.
PrecisionRecall prf1(const std::vector<bool>& predicted, const std::vector<bool>& truth);

/// Rows projected on the two leading principal components (N×2). The sign of
/// each component is fixed so that its largest-magnitude loading is positive.
Tensor2 project_2d(const Tensor2& x);

}  // namespace heloc
