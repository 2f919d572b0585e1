#include "gazetteer/classifier.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "gazetteer/dataset.hpp"
#include "gazetteer/errors.hpp"
#include "json.hpp"

namespace gazetteer {

namespace {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_dim(const LogisticModel& model, const EmbeddingVector& x) {
  if (x.dim() != model.dim()) {
    throw std::invalid_argument("feature dim " + std::to_string(x.dim()) +
                                " does not match model dim " +
                                std::to_string(model.dim()));
  }
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LossGradient loss_and_gradient(const std::vector<LabeledVector>& data,
                               const std::vector<double>& weights, double bias,
                               double l2_lambda) {
  const std::size_t dim = weights.size();
  LossGradient out;
  out.grad_weights.assign(dim, 0.0);
  if (data.empty()) return out;

  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (const LabeledVector& ex : data) {
    const auto x = ex.features.values();
    double z = bias;
    for (std::size_t i = 0; i < dim; ++i) z += weights[i] * x[i];
    const double y = ex.label ? 1.0 : 0.0;
    out.loss += ex.label ? softplus(-z) : softplus(z);
    const double residual = sigmoid(z) - y;
    for (std::size_t i = 0; i < dim; ++i) out.grad_weights[i] += residual * x[i];
    out.grad_bias += residual;
  }
  out.loss *= inv_n;
  out.grad_bias *= inv_n;
  double penalty = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    out.grad_weights[i] = out.grad_weights[i] * inv_n + 2.0 * l2_lambda * weights[i];
    penalty += weights[i] * weights[i];
  }
  out.loss += l2_lambda * penalty;
  return out;
}

LogisticModel train(const std::vector<LabeledVector>& data,
                    const Hyperparams& hp, TrainingTrace* trace) {
  if (data.empty()) throw std::invalid_argument("empty training set");
  const std::size_t dim = data.front().features.dim();
  bool has_pos = false;
  bool has_neg = false;
  for (const LabeledVector& ex : data) {
    if (ex.features.dim() != dim) {
      throw std::invalid_argument("training vectors have mixed dimensions");
    }
    (ex.label ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    throw std::invalid_argument("degenerate training set: single class");
  }
  if (hp.epochs < 0 || !(hp.learning_rate > 0) || hp.l2_lambda < 0) {
    throw std::invalid_argument("invalid hyperparameters");
  }

  LogisticModel model;
  model.weights.assign(dim, 0.0);
  model.trained_on = data.size();
  model.hyperparams = hp;
  if (trace) trace->losses.clear();

  for (int epoch = 0; epoch <= hp.epochs; ++epoch) {
    const LossGradient lg =
        loss_and_gradient(data, model.weights, model.bias, hp.l2_lambda);
    if (trace) trace->losses.push_back(lg.loss);
    if (epoch == hp.epochs) break;
    for (std::size_t i = 0; i < dim; ++i) {
      model.weights[i] -= hp.learning_rate * lg.grad_weights[i];
    }
    model.bias -= hp.learning_rate * lg.grad_bias;
  }
  return model;
}

double decision_value(const LogisticModel& model, const EmbeddingVector& x) {
  check_dim(model, x);
  double z = model.bias;
  for (std::size_t i = 0; i < model.dim(); ++i) z += model.weights[i] * x[i];
  return z;
}

double predict_proba(const LogisticModel& model, const EmbeddingVector& x) {
  return sigmoid(decision_value(model, x));
}

bool classify(const LogisticModel& model, const EmbeddingVector& x) {
  // Compared in logit space: sigmoid(z) >= t  <=>  z >= logit(t).
  const double t = model.threshold;
  return decision_value(model, x) >= std::log(t / (1.0 - t));
}

EvalReport EvalReport::from_counts(std::size_t tp, std::size_t fp,
                                   std::size_t fn, std::size_t tn) {
  EvalReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  r.accuracy = ratio(tp + tn, tp + fp + fn + tn);
  r.precision = ratio(tp, tp + fp);
  r.recall = ratio(tp, tp + fn);
  const double pr = r.precision + r.recall;
  r.f1 = pr == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / pr;
  r.normalized_confusion = {{{ratio(tp, tp + fn), ratio(fn, tp + fn)},
                             {ratio(fp, fp + tn), ratio(tn, fp + tn)}}};
  return r;
}

EvalReport evaluate(const LogisticModel& model,
                    const std::vector<LabeledVector>& testset) {
  if (testset.empty()) throw std::invalid_argument("empty test set");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const LabeledVector& ex : testset) {
    const bool predicted = classify(model, ex.features);
    if (predicted && ex.label) ++tp;
    else if (predicted) ++fp;
    else if (ex.label) ++fn;
    else ++tn;
  }
  return EvalReport::from_counts(tp, fp, fn, tn);
}

void save_model(const std::filesystem::path& path, const LogisticModel& model) {
  nlohmann::ordered_json j;
  j["dim"] = model.dim();
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["threshold"] = model.threshold;
  j["hyperparams"] = {{"learning_rate", model.hyperparams.learning_rate},
                      {"l2_lambda", model.hyperparams.l2_lambda},
                      {"epochs", model.hyperparams.epochs}};
  j["trained_on"] = model.trained_on;
  write_file_atomic(path, j.dump() + "\n");
}

LogisticModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model " + path.string());
  LogisticModel m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.threshold = j.value("threshold", 0.5);
    m.trained_on = j.value("trained_on", std::size_t{0});
    if (auto hp = j.find("hyperparams"); hp != j.end()) {
      m.hyperparams.learning_rate = hp->value("learning_rate", 0.1);
      m.hyperparams.l2_lambda = hp->value("l2_lambda", 1e-4);
      m.hyperparams.epochs = hp->value("epochs", 500);
    }
    if (j.at("dim").get<std::size_t>() != m.weights.size()) {
      throw ParseError("model dim does not match weight count");
    }
  } catch (const nlohmann::json::exception& err) {
    throw ParseError("malformed model " + path.string() + ": " + err.what());
  }
  if (m.weights.empty()) throw ParseError("model has no weights");
  for (double w : m.weights) {
    if (!std::isfinite(w)) throw ParseError("model has non-finite weights");
  }
  if (!std::isfinite(m.bias) || !(m.threshold > 0.0 && m.threshold < 1.0)) {
    throw ParseError("model bias or threshold out of range");
  }
  return m;
}

std::vector<AnnotatedExample> load_annotations(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open annotations " + path.string());
  std::vector<AnnotatedExample> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AnnotatedExample ex{j.at("entry_id").get<std::string>(),
                          j.at("label").get<bool>()};
      if (!seen.insert(ex.entry_id).second) {
        throw ParseError("duplicate annotation for " + ex.entry_id, line_no);
      }
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& err) {
      throw ParseError(std::string("malformed annotation: ") + err.what(),
                       line_no);
    }
  }
  return out;
}

}  // namespace gazetteer
