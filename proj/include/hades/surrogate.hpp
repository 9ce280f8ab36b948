#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hades/rng.hpp"
#include "hades/seq_core.hpp"

namespace hades {

using Vector = Eigen::VectorXd;

struct ArchitectureConfig {
  std::size_t sites = 0;
  std::size_t symbols = 0;
  std::size_t hidden_width = 64;
  std::size_t encoder_depth = 2;

  std::size_t input_dim() const { return sites * symbols; }
  bool operator==(const ArchitectureConfig&) const = default;
};

/// Affine layer y = W x + b, W stored out x in.
struct Dense {
  Matrix weight;
  Vector bias;

  static Dense zeros(std::size_t in, std::size_t out) {
    return {Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
            Vector::Zero(static_cast<Eigen::Index>(out))};
  }

  // Glorot-uniform weights, zero bias.
  static Dense glorot(std::size_t in, std::size_t out, Rng& rng) {
    Dense d = zeros(in, out);
    double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (Eigen::Index i = 0; i < d.weight.size(); ++i) d.weight.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
    return d;
  }

  bool operator==(const Dense& o) const {
    return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() && bias.size() == o.bias.size() &&
           weight == o.weight && bias == o.bias;
  }
};

/// One tanh hidden layer followed by a linear scalar output.
struct Head {
  Dense hidden;
  Dense out;
  bool operator==(const Head&) const = default;
};

struct Prediction {
  double mean = 0.0;
  double std = 0.0;
};

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

/// -log(sigmoid(f)) in its stable form.
inline double potential_from_fitness(double f) { return softplus(-f); }

namespace detail {

inline Matrix dense_forward(const Matrix& x, const Dense& layer) {
  Matrix y = x * layer.weight.transpose();
  y.rowwise() += layer.bias.transpose();
  return y;
}

inline void tanh_inplace(Matrix& m) { m = m.array().tanh().matrix(); }

}  // namespace detail

/// Encoder plus structure and fitness heads.
class SurrogateModel {
 public:
  SurrogateModel() = default;

  static SurrogateModel initialize(const ArchitectureConfig& arch, std::uint64_t seed) {
    if (arch.sites == 0 || arch.symbols < 2) throw Error("surrogate: invalid input shape");
    if (arch.hidden_width == 0 || arch.encoder_depth == 0) throw Error("surrogate: hidden_width and encoder_depth must be >= 1");
    SurrogateModel m;
    m.arch_ = arch;
    m.seed_ = seed;
    Rng rng = make_stream({seed, 0x5eedu});
    std::size_t in = arch.input_dim();
    for (std::size_t k = 0; k < arch.encoder_depth; ++k) {
      m.encoder_.push_back(Dense::glorot(in, arch.hidden_width, rng));
      in = arch.hidden_width;
    }
    auto make_head = [&] {
      return Head{Dense::glorot(arch.hidden_width, arch.hidden_width, rng), Dense::glorot(arch.hidden_width, 1, rng)};
    };
    m.structure_ = make_head();
    m.fitness_ = make_head();
    return m;
  }

  const ArchitectureConfig& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<Dense>& encoder() { return encoder_; }
  const std::vector<Dense>& encoder() const { return encoder_; }
  Head& structure_head() { return structure_; }
  const Head& structure_head() const { return structure_; }
  Head& fitness_head() { return fitness_; }
  const Head& fitness_head() const { return fitness_; }

  bool operator==(const SurrogateModel&) const = default;

  /// Encoder activations for a batch of flattened inputs (one row per example).
  std::vector<Matrix> encode_batch(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != arch_.input_dim())
      throw Error("surrogate: input width " + std::to_string(x.cols()) + " != " + std::to_string(arch_.input_dim()));
    std::vector<Matrix> acts;
    acts.reserve(encoder_.size() + 1);
    acts.push_back(x);
    for (const Dense& layer : encoder_) {
      Matrix h = detail::dense_forward(acts.back(), layer);
      detail::tanh_inplace(h);
      acts.push_back(std::move(h));
    }
    return acts;
  }

  Vector latent(const ContinuousState& q) const { return encode_batch(flatten(q)).back().row(0).transpose(); }

  double forward_fitness(const ContinuousState& q) const { return head_output(fitness_, flatten(q)); }
  double forward_structure(const ContinuousState& q) const { return head_output(structure_, flatten(q)); }

  /// f(q) and df/dq (shaped like q) by reverse-mode differentiation.
  std::pair<double, Matrix> fitness_and_gradient(const ContinuousState& q) const {
    Matrix x = flatten(q);
    std::vector<Matrix> acts = encode_batch(x);
    Matrix z = detail::dense_forward(acts.back(), fitness_.hidden);
    detail::tanh_inplace(z);
    double f = (z * fitness_.out.weight.transpose())(0, 0) + fitness_.out.bias(0);

    Matrix dz = fitness_.out.weight;  // 1 x width
    dz = dz.cwiseProduct((1.0 - z.array().square()).matrix());
    Matrix dh = dz * fitness_.hidden.weight;
    for (std::size_t k = encoder_.size(); k-- > 0;) {
      const Matrix& h = acts[k + 1];
      dh = dh.cwiseProduct((1.0 - h.array().square()).matrix());
      dh = dh * encoder_[k].weight;
    }
    Matrix grad = Eigen::Map<const Matrix>(dh.data(), q.sites(), q.symbols());
    return {f, grad};
  }

  static Matrix flatten(const ContinuousState& q) {
    return Eigen::Map<const Matrix>(q.values().data(), 1, q.values().size());
  }

  void save(std::ostream& os) const;
  static SurrogateModel load(std::istream& is);

 private:
  double head_output(const Head& head, const Matrix& x) const {
    Matrix z = detail::dense_forward(encode_batch(x).back(), head.hidden);
    detail::tanh_inplace(z);
    return (z * head.out.weight.transpose())(0, 0) + head.out.bias(0);
  }

  ArchitectureConfig arch_;
  std::uint64_t seed_ = 0;
  std::vector<Dense> encoder_;
  Head structure_;
  Head fitness_;
};

inline double potential_energy(const SurrogateModel& model, const ContinuousState& q) {
  return potential_from_fitness(model.forward_fitness(q));
}

/// U(q) and grad U(q) = -sigmoid(-f) * grad f.
inline std::pair<double, Matrix> potential_and_gradient(const SurrogateModel& model, const ContinuousState& q) {
  auto [f, df] = model.fitness_and_gradient(q);
  return {potential_from_fitness(f), -sigmoid(-f) * df};
}

inline Matrix grad_potential(const SurrogateModel& model, const ContinuousState& q) {
  return potential_and_gradient(model, q).second;
}

// ---------------------------------------------------------------------------
// Training

struct TrainingExample {
  ContinuousState q;
  double fitness = 0.0;
  double structure_distance = 0.0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int patience = 3;
  /// 0 selects full-batch epochs up to 1024 examples, 256-example minibatches beyond.
  int batch_size = 0;
  int max_epochs = 200;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (!(learning_rate > 0)) throw Error("train.learning_rate must be > 0");
    if (patience < 1) throw Error("train.patience must be >= 1");
    if (batch_size < 0) throw Error("train.batch_size must be >= 0");
    if (max_epochs < 1) throw Error("train.max_epochs must be >= 1");
  }
};

struct TrainReport {
  std::vector<double> epoch_losses;
  bool stopped_early = false;
};

/// Stops once the loss has failed to strictly improve on the best seen value
/// for `patience` consecutive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Returns true when training should stop after this epoch.
  bool update(double loss) {
    if (loss < best_) {
      best_ = loss;
      stale_ = 0;
      return false;
    }
    return ++stale_ >= patience_;
  }

 private:
  int patience_;
  int stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

class Adam {
 public:
  Adam(const TrainConfig& cfg, const std::vector<Dense*>& params) : cfg_(cfg), params_(params) {
    for (Dense* p : params_) {
      m_.push_back(Dense::zeros(static_cast<std::size_t>(p->weight.cols()), static_cast<std::size_t>(p->weight.rows())));
      v_.push_back(m_.back());
    }
  }

  void step(const std::vector<Dense>& grads) {
    ++t_;
    double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    double lr = cfg_.learning_rate;
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.adam_eps);
    };
    for (std::size_t i = 0; i < params_.size(); ++i) {
      update(params_[i]->weight, grads[i].weight, m_[i].weight, v_[i].weight);
      update(params_[i]->bias, grads[i].bias, m_[i].bias, v_[i].bias);
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<Dense*> params_;
  std::vector<Dense> m_, v_;
  int t_ = 0;
};

namespace detail {

/// MSE forward/backward for a head on top of (optionally trainable) encoder
/// activations. Returns the batch loss; fills gradients for the head and,
/// when `encoder` is non-null, for every encoder layer.
inline double mse_backward(const std::vector<Matrix>& acts, const std::vector<Dense>* encoder, const Head& head,
                           const Vector& target, std::vector<Dense>& enc_grads, Head& head_grads) {
  const Matrix& h = acts.back();
  const double n = static_cast<double>(h.rows());
  Matrix z = dense_forward(h, head.hidden);
  tanh_inplace(z);
  Vector y = z * head.out.weight.transpose();
  y.array() += head.out.bias(0);
  Vector resid = y - target;
  double loss = resid.squaredNorm() / n;

  Vector dy = (2.0 / n) * resid;
  head_grads.out.weight = dy.transpose() * z;
  head_grads.out.bias = Vector::Constant(1, dy.sum());
  Matrix dz = dy * head.out.weight;
  dz.array() *= 1.0 - z.array().square();
  head_grads.hidden.weight = dz.transpose() * h;
  head_grads.hidden.bias = dz.colwise().sum().transpose();

  if (encoder) {
    Matrix dh = dz * head.hidden.weight;
    for (std::size_t k = encoder->size(); k-- > 0;) {
      dh.array() *= 1.0 - acts[k + 1].array().square();
      enc_grads[k].weight = dh.transpose() * acts[k];
      enc_grads[k].bias = dh.colwise().sum().transpose();
      if (k > 0) dh = dh * (*encoder)[k].weight;
    }
  }
  return loss;
}

enum class Target { structure, fitness };

inline Matrix stack_inputs(const std::vector<TrainingExample>& data) {
  const Eigen::Index d = data.front().q.values().size();
  Matrix x(static_cast<Eigen::Index>(data.size()), d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].q.values().size() != d) throw Error("training examples have inconsistent shapes");
    x.row(static_cast<Eigen::Index>(i)) = SurrogateModel::flatten(data[i].q);
  }
  return x;
}

inline Vector stack_targets(const std::vector<TrainingExample>& data, Target which) {
  Vector t(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    double v = which == Target::fitness ? data[i].fitness : data[i].structure_distance;
    if (!std::isfinite(v)) throw Error("training label is not finite");
    if (which == Target::structure && v < 0) throw Error("structure distance label is negative");
    t(static_cast<Eigen::Index>(i)) = v;
  }
  return t;
}

inline Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

inline Vector take_rows(const Vector& v, const std::vector<Eigen::Index>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

inline TrainReport train_head(SurrogateModel& model, const std::vector<TrainingExample>& data, const TrainConfig& cfg,
                              Rng& rng, Target which, bool train_encoder) {
  if (data.empty()) throw Error("training data is empty");
  cfg.validate();
  const Matrix x = stack_inputs(data);
  const Vector target = stack_targets(data, which);
  Head& head = which == Target::fitness ? model.fitness_head() : model.structure_head();
  std::vector<Dense>& encoder = model.encoder();

  std::vector<Dense*> params;
  if (train_encoder)
    for (Dense& d : encoder) params.push_back(&d);
  params.push_back(&head.hidden);
  params.push_back(&head.out);
  Adam adam(cfg, params);

  const std::size_t n = data.size();
  std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  if (batch == 0) batch = n <= 1024 ? n : 256;
  batch = std::min(batch, n);

  // A frozen encoder produces the same activations every epoch.
  std::vector<Matrix> frozen_acts;
  if (!train_encoder) frozen_acts = model.encode_batch(x);

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<Dense> enc_grads(encoder.size());
  Head head_grads;

  TrainReport report;
  EarlyStopping stopper(cfg.patience);
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      std::size_t stop = std::min(n, start + batch);
      bool full = start == 0 && stop == n && batch == n;
      std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
      Vector t = full ? target : take_rows(target, rows);
      std::vector<Matrix> acts;
      if (train_encoder) {
        acts = model.encode_batch(full ? x : take_rows(x, rows));
      } else if (full) {
        acts = {frozen_acts.back()};
      } else {
        acts = {take_rows(frozen_acts.back(), rows)};
      }
      double loss = mse_backward(acts, train_encoder ? &encoder : nullptr, head, t, enc_grads, head_grads);
      epoch_loss += loss * static_cast<double>(stop - start);

      std::vector<Dense> grads;
      if (train_encoder) grads = enc_grads;
      grads.push_back(head_grads.hidden);
      grads.push_back(head_grads.out);
      adam.step(grads);
    }
    epoch_loss /= static_cast<double>(n);
    report.epoch_losses.push_back(epoch_loss);
    if (stopper.update(epoch_loss)) {
      report.stopped_early = true;
      break;
    }
  }
  return report;
}

}  // namespace detail

/// Fits encoder and structure head to the structural-distance labels.
inline TrainReport train_stage1(SurrogateModel& model, const std::vector<TrainingExample>& data,
                                const TrainConfig& cfg, Rng& rng) {
  return detail::train_head(model, data, cfg, rng, detail::Target::structure, true);
}

/// Fits the fitness head. With `freeze_encoder` (the normal two-stage protocol)
/// encoder parameters are left untouched; without it the encoder trains jointly.
inline TrainReport train_stage2(SurrogateModel& model, const std::vector<TrainingExample>& data,
                                const TrainConfig& cfg, Rng& rng, bool freeze_encoder = true) {
  return detail::train_head(model, data, cfg, rng, detail::Target::fitness, !freeze_encoder);
}

/// Mean squared fitness-head error over a dataset.
inline double fitness_mse(const SurrogateModel& model, const std::vector<TrainingExample>& data) {
  double acc = 0.0;
  for (const auto& ex : data) {
    double r = model.forward_fitness(ex.q) - ex.fitness;
    acc += r * r;
  }
  return acc / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Ensemble

struct SurrogateEnsemble {
  std::vector<SurrogateModel> members;

  std::size_t size() const { return members.size(); }
};

/// Mean and population standard deviation of a set of predictions.
inline Prediction summarize_predictions(const std::vector<double>& preds) {
  if (preds.empty()) throw Error("ensemble is empty");
  const double m = static_cast<double>(preds.size());
  double mean = std::accumulate(preds.begin(), preds.end(), 0.0) / m;
  double var = 0.0;
  for (double p : preds) var += (p - mean) * (p - mean);
  return {mean, std::sqrt(var / m)};
}

inline Prediction ensemble_predict(const SurrogateEnsemble& ens, const ContinuousState& q) {
  std::vector<double> preds;
  preds.reserve(ens.size());
  for (const auto& m : ens.members) preds.push_back(m.forward_fitness(q));
  return summarize_predictions(preds);
}

inline double ucb_score(const SurrogateEnsemble& ens, const ContinuousState& q) {
  Prediction p = ensemble_predict(ens, q);
  return p.mean + p.std;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Text format, one token stream:
//   hades-surrogate 1
//   arch <sites> <symbols> <hidden_width> <encoder_depth>
//   seed <u64>
//   then tensors in order: encoder[0..depth).{weight,bias}, structure.hidden,
//   structure.out, fitness.hidden, fitness.out, each as
//   tensor <name> <rows> <cols> <hexfloat values, row-major>
// Hexadecimal floats make the round trip bit-exact.

namespace detail {

inline void write_tensor(std::ostream& os, const std::string& name, const double* data, Eigen::Index rows,
                         Eigen::Index cols) {
  os << "tensor " << name << ' ' << rows << ' ' << cols;
  char buf[64];
  for (Eigen::Index i = 0; i < rows * cols; ++i) {
    std::snprintf(buf, sizeof buf, " %a", data[i]);
    os << buf;
  }
  os << '\n';
}

inline std::string expect_token(std::istream& is, const char* what) {
  std::string tok;
  if (!(is >> tok)) throw Error(std::string("checkpoint truncated while reading ") + what);
  return tok;
}

inline void read_tensor(std::istream& is, const std::string& name, double* data, Eigen::Index rows,
                        Eigen::Index cols) {
  if (expect_token(is, "tensor tag") != "tensor") throw Error("checkpoint: expected 'tensor' before " + name);
  std::string got = expect_token(is, "tensor name");
  if (got != name) throw Error("checkpoint: expected tensor " + name + ", found " + got);
  Eigen::Index r = std::stoll(expect_token(is, "rows"));
  Eigen::Index c = std::stoll(expect_token(is, "cols"));
  if (r != rows || c != cols) throw Error("checkpoint: shape mismatch for " + name);
  for (Eigen::Index i = 0; i < rows * cols; ++i) {
    std::string tok = expect_token(is, name.c_str());
    char* end = nullptr;
    data[i] = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw Error("checkpoint: bad number '" + tok + "' in " + name);
  }
}

template <class Encoder, class H, class Fn>
void for_each_tensor(Encoder& encoder, H& s, H& f, Fn&& fn) {
  for (std::size_t k = 0; k < encoder.size(); ++k) {
    fn("encoder." + std::to_string(k) + ".weight", encoder[k].weight);
    fn("encoder." + std::to_string(k) + ".bias", encoder[k].bias);
  }
  fn(std::string("structure.hidden.weight"), s.hidden.weight);
  fn(std::string("structure.hidden.bias"), s.hidden.bias);
  fn(std::string("structure.out.weight"), s.out.weight);
  fn(std::string("structure.out.bias"), s.out.bias);
  fn(std::string("fitness.hidden.weight"), f.hidden.weight);
  fn(std::string("fitness.hidden.bias"), f.hidden.bias);
  fn(std::string("fitness.out.weight"), f.out.weight);
  fn(std::string("fitness.out.bias"), f.out.bias);
}

}  // namespace detail

inline void SurrogateModel::save(std::ostream& os) const {
  os << "hades-surrogate 1\n";
  os << "arch " << arch_.sites << ' ' << arch_.symbols << ' ' << arch_.hidden_width << ' ' << arch_.encoder_depth
     << '\n';
  os << "seed " << seed_ << '\n';
  detail::for_each_tensor(encoder_, structure_, fitness_, [&](const std::string& name, const auto& t) {
    detail::write_tensor(os, name, t.data(), t.rows(), t.cols());
  });
  if (!os) throw Error("checkpoint: write failed");
}

inline SurrogateModel SurrogateModel::load(std::istream& is) {
  if (detail::expect_token(is, "magic") != "hades-surrogate" || detail::expect_token(is, "version") != "1")
    throw Error("checkpoint: not a hades-surrogate v1 file");
  if (detail::expect_token(is, "arch tag") != "arch") throw Error("checkpoint: missing arch line");
  ArchitectureConfig arch;
  arch.sites = std::stoull(detail::expect_token(is, "sites"));
  arch.symbols = std::stoull(detail::expect_token(is, "symbols"));
  arch.hidden_width = std::stoull(detail::expect_token(is, "hidden_width"));
  arch.encoder_depth = std::stoull(detail::expect_token(is, "encoder_depth"));
  if (detail::expect_token(is, "seed tag") != "seed") throw Error("checkpoint: missing seed line");
  std::uint64_t seed = std::stoull(detail::expect_token(is, "seed"));
  SurrogateModel m = initialize(arch, seed);
  detail::for_each_tensor(m.encoder_, m.structure_, m.fitness_, [&](const std::string& name, auto& t) {
    detail::read_tensor(is, name, t.data(), t.rows(), t.cols());
  });
  return m;
}

}  // namespace hades
