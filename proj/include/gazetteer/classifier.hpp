#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gazetteer/embedding.hpp"

namespace gazetteer {

struct Hyperparams {
  double learning_rate = 0.1;
  double l2_lambda = 1e-4;
  int epochs = 500;
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  double threshold = 0.5;
  std::size_t trained_on = 0;
  Hyperparams hyperparams;

  std::size_t dim() const { return weights.size(); }
};

struct LabeledVector {
  EmbeddingVector features;
  bool label = false;  // true = location
};

struct AnnotatedExample {
  std::string entry_id;
  bool label = false;
};

// Mean binary cross-entropy plus l2_lambda * |w|^2, and its gradient.
struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

LossGradient loss_and_gradient(const std::vector<LabeledVector>& data,
                               const std::vector<double>& weights, double bias,
                               double l2_lambda);

// Loss per epoch, index 0 being the loss of the initial (all-zero) model and
// index `epochs` the loss of the returned model.
struct TrainingTrace {
  std::vector<double> losses;
};

// Full-batch gradient descent from zero weights. Throws std::invalid_argument
// when the data holds a single class, mixed dimensions, or is empty.
LogisticModel train(const std::vector<LabeledVector>& data,
                    const Hyperparams& hp = {}, TrainingTrace* trace = nullptr);

double sigmoid(double z);
double decision_value(const LogisticModel& model, const EmbeddingVector& x);
double predict_proba(const LogisticModel& model, const EmbeddingVector& x);
bool classify(const LogisticModel& model, const EmbeddingVector& x);

struct EvalReport {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Rows are true labels (location, not location), columns predicted labels
  // in the same order; each row is normalized by its own count.
  std::array<std::array<double, 2>, 2> normalized_confusion{};

  static EvalReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn,
                                std::size_t tn);
};

// Throws std::invalid_argument on an empty test set.
EvalReport evaluate(const LogisticModel& model,
                    const std::vector<LabeledVector>& testset);

void save_model(const std::filesystem::path& path, const LogisticModel& model);
LogisticModel load_model(const std::filesystem::path& path);

// Line-delimited {"entry_id", "label"} records.
std::vector<AnnotatedExample> load_annotations(
    const std::filesystem::path& path);

}  // namespace gazetteer
