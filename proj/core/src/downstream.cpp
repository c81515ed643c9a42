#include "heloc/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>

#include <Eigen/Dense>

#include "heloc/error.hpp"
#include "heloc/parallel.hpp"

namespace heloc {

CodeVector pool(const Tensor2& x_nd) {
  if (x_nd.rows() == 0) throw ShapeError("cannot pool an empty node matrix");
  CodeVector v{std::vector<double>(x_nd.cols(), 0.0)};
  for (std::size_t r = 0; r < x_nd.rows(); ++r)
    for (std::size_t c = 0; c < x_nd.cols(); ++c) v.r[c] += x_nd(r, c);
  for (double& x : v.r) x /= static_cast<double>(x_nd.rows());
  return v;
}

ClassifierHead ClassifierHead::init(std::size_t dim, std::size_t classes, Rng& rng, double smoothing) {
  if (classes < 2) throw DomainError("a classifier needs at least two classes");
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw DomainError("label smoothing must lie in [0, 1)");
  return {Param(glorot_uniform(dim, classes, rng)), Param(Tensor2(1, classes)), smoothing};
}

Tensor2 smoothed_target(std::size_t label, std::size_t classes, double smoothing) {
  if (label >= classes)
    throw DomainError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
  Tensor2 t(1, classes, classes > 1 ? smoothing / static_cast<double>(classes - 1) : 0.0);
  t[label] = 1.0 - smoothing;
  return t;
}

Var classify_loss(Var r, std::size_t label, Var w0, Var b0, double smoothing) {
  const Var logits = ad::add_row(ad::matmul(r, w0), b0);
  return ad::soft_cross_entropy(logits, smoothed_target(label, logits.cols(), smoothing));
}

double classify_loss(const CodeVector& r, std::size_t label, const ClassifierHead& head) {
  Tape tape;
  return classify_loss(tape.constant(Tensor2::row_vector(r.r)), label, tape.constant(head.w0.value),
                       tape.constant(head.b0.value), head.smoothing)
      .scalar();
}

std::vector<double> classify_logits(const CodeVector& r, const ClassifierHead& head) {
  const Tensor2 logits = matmul(Tensor2::row_vector(r.r), head.w0.value) + head.b0.value;
  return {logits.data().begin(), logits.data().end()};
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t classify_predict(const CodeVector& r, const ClassifierHead& head) {
  return argmax(classify_logits(r, head));
}

CodeVector embed_graph(const PreparedGraph& g, std::span<const RsgnnLayerParams> encoder,
                       const TrainConfig& cfg) {
  return pool(encode_graph(g, encoder, cfg));
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

namespace {

double validation_accuracy(std::span<const LabeledGraph> data,
                           std::span<const RsgnnLayerParams> encoder, const ClassifierHead& head,
                           const TrainConfig& cfg) {
  std::vector<std::size_t> predicted(data.size());
  std::vector<std::size_t> truth(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    predicted[i] = classify_predict(embed_graph(*data[i].graph, encoder, cfg), head);
    truth[i] = data[i].label;
  });
  return accuracy(predicted, truth);
}

}  // namespace

FineTuneResult fine_tune(const std::vector<RsgnnLayerParams>& encoder, const TrainConfig& cfg,
                         std::span<const LabeledGraph> train, std::span<const LabeledGraph> validation,
                         std::size_t classes, const FineTuneOptions& opts) {
  if (train.empty()) throw DomainError("fine-tuning set is empty");
  for (const auto& set : {train, validation})
    for (const LabeledGraph& s : set)
      if (s.label >= classes)
        throw DomainError("label " + std::to_string(s.label) + " outside [0, " +
                          std::to_string(classes) + ")");
  if (opts.batch_size == 0) throw DomainError("batch_size must be positive");

  Rng rng(opts.seed);
  FineTuneResult result{encoder, ClassifierHead::init(cfg.dim, classes, rng, opts.smoothing), {}, 0};
  if (opts.epochs == 0) return result;

  std::vector<Param*> params;
  for (RsgnnLayerParams& layer : result.encoder)
    for (auto& entry : layer.named()) params.push_back(entry.second);
  params.push_back(&result.head.w0);
  params.push_back(&result.head.b0);

  AdamState adam;
  const AdamOptions adam_opts{opts.lr};
  FineTuneResult best = result;
  double best_accuracy = -1.0;
  std::size_t stale = 0;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t count = std::min(opts.batch_size, order.size() - start);
      for (Param* p : params) p->zero_grad();
      std::vector<std::unique_ptr<Tape>> tapes(count);
      std::vector<double> losses(count);
      parallel_for(count, [&](std::size_t b) {
        const LabeledGraph& sample = train[order[start + b]];
        auto& tape = tapes[b];
        tape = std::make_unique<Tape>(/*defer_param_grads=*/true);
        std::vector<LayerVars> layers;
        for (RsgnnLayerParams& layer : result.encoder) layers.push_back(bind(*tape, layer));
        const Var x = encode(tape->constant(sample.graph->x0_ast), sample.graph->propagation, layers,
                             cfg.encoder_options());
        const Var loss = classify_loss(ad::mean_rows(x), sample.label, tape->param(result.head.w0),
                                       tape->param(result.head.b0), opts.smoothing);
        tape->backward(loss);
        losses[b] = loss.scalar();
      });
      for (std::size_t b = 0; b < count; ++b) {
        tapes[b]->flush_param_grads();
        epoch_loss += losses[b];
      }
      adam_step(params, adam, adam_opts);
    }

    EpochStats stats{epoch, epoch_loss / static_cast<double>(train.size()), 0.0};
    if (!validation.empty())
      stats.validation_accuracy = validation_accuracy(validation, result.encoder, result.head, cfg);
    result.history.push_back(stats);

    if (validation.empty()) {
      result.best_epoch = epoch;
      continue;
    }
    if (stats.validation_accuracy > best_accuracy) {
      best_accuracy = stats.validation_accuracy;
      best.encoder = result.encoder;
      best.head = result.head;
      best.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= opts.patience) {
      break;
    }
  }
  if (!validation.empty()) {
    best.history = std::move(result.history);
    return best;
  }
  return result;
}

double relatedness(std::span<const double> r1, std::span<const double> r2) {
  if (r1.size() != r2.size()) throw ShapeError("relatedness: vector lengths differ");
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < r1.size(); ++i) {
    dot += r1[i] * r2[i];
    n1 += r1[i] * r1[i];
    n2 += r2[i] * r2[i];
  }
  if (n1 == 0.0 || n2 == 0.0) throw DomainError("relatedness of a zero vector");
  return std::clamp(dot / (std::sqrt(n1) * std::sqrt(n2)), -1.0, 1.0);
}

double clone_loss(std::span<const double> r1, std::span<const double> r2, int y) {
  if (y != 1 && y != -1) throw DomainError("clone label must be 1 or -1");
  const double d = static_cast<double>(y) - relatedness(r1, r2);
  return d * d;
}

CloneCalibration CloneCalibration::fit(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size()) throw ShapeError("calibration: length mismatch");
  if (p.empty()) throw DomainError("calibration needs at least one pair");
  const double n = static_cast<double>(p.size());
  double mp = 0.0, my = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    my += y[i];
  }
  mp /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sxy += (p[i] - mp) * (y[i] - my);
    sxx += (p[i] - mp) * (p[i] - mp);
  }
  CloneCalibration c;
  c.scale = sxx > 0.0 ? sxy / sxx : 0.0;
  c.offset = my - c.scale * mp;
  return c;
}

CloneVerdict clone_predict(std::span<const double> r1, std::span<const double> r2) {
  const double p = relatedness(r1, r2);
  return {p, p > 0.0};
}

CloneVerdict clone_predict(std::span<const double> r1, std::span<const double> r2,
                           const CloneCalibration& calibration) {
  const double p = calibration.apply(relatedness(r1, r2));
  return {p, p > 0.0};
}

namespace {

double sqdist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                    std::uint64_t seed, std::size_t max_iters) {
  const std::size_t n = points.size();
  if (k == 0) throw DomainError("k-means needs k ≥ 1");
  if (k > n) throw DomainError("k-means: k = " + std::to_string(k) + " exceeds " +
                               std::to_string(n) + " points");
  const std::size_t dim = points[0].size();
  for (const auto& p : points)
    if (p.size() != dim) throw ShapeError("k-means: points differ in dimension");

  Rng rng(seed);
  KMeansResult res;
  res.centroids.push_back(points[rng.index(n)]);
  std::vector<double> d2(n);
  while (res.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : res.centroids) best = std::min(best, sqdist(points[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.unit() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
      while (d2[pick] <= 0.0) --pick;
    } else {
      pick = rng.index(n);
    }
    res.centroids.push_back(points[pick]);
  }

  auto assign = [&](std::vector<std::size_t>& out) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sqdist(points[i], res.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sqdist(points[i], res.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      out[i] = best;
      inertia += best_d;
    }
    return inertia;
  };

  res.assignments.assign(n, 0);
  res.inertia_history.push_back(assign(res.assignments));
  std::vector<std::size_t> next(n);
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[res.assignments[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[res.assignments[i]][d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // an empty cluster keeps its centroid
      for (std::size_t d = 0; d < dim; ++d)
        res.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
    res.inertia_history.push_back(assign(next));
    ++res.iterations;
    if (next == res.assignments) {
      res.converged = true;
      break;
    }
    res.assignments.swap(next);
  }
  return res;
}

double ari(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("ari: labelings differ in length");
  const std::size_t n = truth.size();
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{predicted[i], truth[i]}] += 1.0;
    rows[predicted[i]] += 1.0;
    cols[truth[i]] += 1.0;
  }
  auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
  double index = 0.0, a = 0.0, b = 0.0;
  for (const auto& [key, m] : table) index += pairs(m);
  for (const auto& [key, m] : rows) a += pairs(m);
  for (const auto& [key, m] : cols) b += pairs(m);
  const double total = pairs(static_cast<double>(n));
  if (total == 0.0) return 1.0;
  const double expected = a * b / total;
  const double max_index = 0.5 * (a + b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

PrecisionRecall prf1(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) throw ShapeError("prf1: length mismatch");
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] && truth[i]) ++tp;
    else if (predicted[i]) ++fp;
    else if (truth[i]) ++fn;
  }
  PrecisionRecall r;
  r.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  r.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

Tensor2 project_2d(const Tensor2& x) {
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto h = static_cast<Eigen::Index>(x.cols());
  Tensor2 out(x.rows(), 2);
  if (n == 0) return out;
  Eigen::MatrixXd m(n, h);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < h; ++j) m(i, j) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
  const Eigen::MatrixXd cov = (m.transpose() * m) / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues ascend; the leading components are the last columns.
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, h); ++k) {
    Eigen::VectorXd axis = solver.eigenvectors().col(h - 1 - k);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0.0) axis = -axis;
    const Eigen::VectorXd scores = m * axis;
    for (Eigen::Index i = 0; i < n; ++i) out(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) = scores(i);
  }
  return out;
}

}  // namespace heloc
