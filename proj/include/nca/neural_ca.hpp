#ifndef NCA_NEURAL_CA_HPP
#define NCA_NEURAL_CA_HPP

/*
 Neural correspondence analysis.

 Two tanh encoders map X-features and Y-features to R^d:

   F-Net  dim_x -> 1000 -> 500 -> 300 -> 50 -> d
   G-Net  dim_y -> 100 -> 50 -> 30 -> d

 and are trained by plain minibatch SGD on

   loss(F, G) = -2 || C_f^{-1/2} C_fg ||_* + (1/n) sum_i ||g_i||^2

 with C_f = E[f f^T] + ridge I and C_fg = E[f g^T] estimated on the batch
 (batch-mean centered when `center` is set). The nuclear norm is the full
 Ky-Fan norm of the d x d matrix. Its gradient is U V^T; the chain rule through
 C_f^{-1/2} uses the divided-difference derivative of the inverse root and can
 be disabled (`grad_through_whitening`), which treats C_f^{-1/2} as a constant
 in the backward pass.

 After training, whiten_align() turns the raw encoder outputs into orthogonal
 factors on one reference pass over the training set:

   M = C_f^{-1/2} C_fg C_g^{-1/2} = U S V^T
   A = U^T C_f^{-1/2},  B = V^T C_g^{-1/2}
   f(x) = A (f~(x) - mean_f),  g(y) = B (g~(y) - mean_g)

 so that Cov(f) = Cov(g) = I and E[f g^T] = S. S holds canonical
 correlations; the factor score of factor i is S_ii^2, the same scale as the
 squared singular values of the contingency-table residual matrix.
*/

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nca/classical_ca.hpp"
#include "nca/dataset_io.hpp"
#include "nca/error.hpp"
#include "nca/ingest.hpp"
#include "nca/numerics.hpp"
#include "nca/random.hpp"

namespace nca {

struct DenseLayer {
  Matrix weight;  // fan_in x fan_out
  Vector bias;    // fan_out
};

using Layers = std::vector<DenseLayer>;

struct NetworkParams {
  Layers f_layers;
  Layers g_layers;

  Index dim_x() const { return f_layers.empty() ? 0 : f_layers.front().weight.rows(); }
  Index dim_y() const { return g_layers.empty() ? 0 : g_layers.front().weight.rows(); }
  Index dim_out() const { return f_layers.empty() ? 0 : f_layers.back().weight.cols(); }
};

struct TrainConfig {
  Index d = 8;
  int epochs = 20;
  std::size_t batch_size = 256;
  double learning_rate = 0.01;
  double ridge = 1e-4;
  bool center = true;
  bool grad_through_whitening = true;
  std::uint64_t seed = 0;
  std::vector<Index> f_hidden = {1000, 500, 300, 50};
  std::vector<Index> g_hidden = {100, 50, 30};
  // Ridge used by whiten_align. Kept at 0 so that Cov(A f~) is the identity
  // to rounding; the training ridge only stabilizes the per-batch loss.
  double whiten_ridge = 0.0;
  // Training rows used for the per-epoch lambda snapshot in the history.
  std::size_t snapshot_samples = 4096;

  void validate() const {
    if (d < 1) throw Error(Errc::InvalidArgument, "train: d must be >= 1");
    if (epochs < 0) throw Error(Errc::InvalidArgument, "train: epochs must be >= 0");
    if (batch_size < 2) throw Error(Errc::InvalidArgument, "train: batch_size must be >= 2");
    if (!(learning_rate > 0.0)) throw Error(Errc::InvalidArgument, "train: learning_rate must be > 0");
    if (!(ridge >= 0.0) || !(whiten_ridge >= 0.0)) throw Error(Errc::InvalidArgument, "train: ridge must be >= 0");
    for (Index w : f_hidden)
      if (w < 1) throw Error(Errc::InvalidArgument, "train: hidden widths must be >= 1");
    for (Index w : g_hidden)
      if (w < 1) throw Error(Errc::InvalidArgument, "train: hidden widths must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Network

inline Layers init_layers(Index dim_in, std::span<const Index> hidden, Index dim_out, Rng& rng) {
  std::vector<Index> widths{dim_in};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(dim_out);
  Layers layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index fan_in = widths[l], fan_out = widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Matrix(fan_in, fan_out), Vector::Zero(fan_out)};
    // Row-major fill so the draw order does not depend on Eigen's storage order.
    for (Index i = 0; i < fan_in; ++i)
      for (Index j = 0; j < fan_out; ++j) layer.weight(i, j) = rng.uniform(-limit, limit);
    layers.push_back(std::move(layer));
  }
  return layers;
}

inline NetworkParams init_network(Index dim_x, Index dim_y, const TrainConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  NetworkParams p;
  p.f_layers = init_layers(dim_x, cfg.f_hidden, cfg.d, rng);
  p.g_layers = init_layers(dim_y, cfg.g_hidden, cfg.d, rng);
  return p;
}

struct ForwardCache {
  std::vector<Matrix> pre;  // pre-activations, one per layer
  std::vector<Matrix> act;  // act[0] is the input, act[l+1] = tanh(pre[l])
};

inline Matrix run_layers(const Layers& layers, const Matrix& input, ForwardCache* cache = nullptr) {
  if (layers.empty() || input.cols() != layers.front().weight.rows())
    throw Error(Errc::ShapeMismatch, "forward: input has " + std::to_string(input.cols()) + " columns, network expects " +
                                         std::to_string(layers.empty() ? 0 : layers.front().weight.rows()));
  if (cache) {
    cache->pre.clear();
    cache->act.assign(1, input);
  }
  Matrix h = input;
  for (const auto& layer : layers) {
    Matrix z = h * layer.weight;
    z.rowwise() += layer.bias.transpose();
    h = z.array().tanh();
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->act.push_back(h);
    }
  }
  return h;
}

/// Parameter gradients given dLoss/dOutput.
inline Layers backward_layers(const Layers& layers, const ForwardCache& cache, const Matrix& d_out) {
  Layers grads(layers.size());
  Matrix delta = d_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Matrix& out = cache.act[l + 1];
    delta.array() *= 1.0 - out.array().square();
    grads[l].weight = cache.act[l].transpose() * delta;
    grads[l].bias = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * layers[l].weight.transpose();
  }
  return grads;
}

struct ForwardResult {
  Matrix f;
  Matrix g;
  ForwardCache f_cache;
  ForwardCache g_cache;
};

inline ForwardResult forward(const NetworkParams& p, const Matrix& batch_x, const Matrix& batch_y) {
  if (batch_x.rows() != batch_y.rows()) throw Error(Errc::ShapeMismatch, "forward: batch row counts differ");
  ForwardResult r;
  r.f = run_layers(p.f_layers, batch_x, &r.f_cache);
  r.g = run_layers(p.g_layers, batch_y, &r.g_cache);
  return r;
}

// ---------------------------------------------------------------------------
// Loss

struct LossResult {
  double value = 0.0;
  Matrix d_f;
  Matrix d_g;
};

inline LossResult loss(const Matrix& f, const Matrix& g, double ridge, bool center, bool grad_through_whitening = true) {
  if (f.rows() != g.rows()) throw Error(Errc::ShapeMismatch, "loss: row counts differ");
  if (f.rows() < 2) throw Error(Errc::InvalidArgument, "loss: need n >= 2");
  const double n = static_cast<double>(f.rows());

  const Moments mom = batch_covariances(f, g, center, 0.0);
  const Matrix fc = f.rowwise() - mom.mean_f.transpose();
  const Matrix gc = g.rowwise() - mom.mean_g.transpose();
  const PsdSpectrum spec = psd_spectrum(mom.c_f, ridge);
  const Matrix root = inv_sqrt_from(spec);
  const Matrix m = root * mom.c_fg;
  const SvdResult s = svd(m);
  const Index k = std::min(m.rows(), m.cols());
  const Matrix sub = s.u.leftCols(k) * s.v.leftCols(k).transpose();

  LossResult out;
  out.value = -2.0 * s.singular_values.head(k).sum() + g.squaredNorm() / n;

  const Matrix grad_cfg = -2.0 * root * sub;
  Matrix d_fc = gc * grad_cfg.transpose() / n;
  Matrix d_gc = fc * grad_cfg / n;
  if (grad_through_whitening) {
    const Matrix grad_root = -2.0 * sub * mom.c_fg.transpose();
    const Matrix grad_cf = dinv_sqrt_from(spec, grad_root);
    d_fc += fc * (grad_cf + grad_cf.transpose()) / n;
  }
  if (center) {
    d_fc.rowwise() -= d_fc.colwise().mean();
    d_gc.rowwise() -= d_gc.colwise().mean();
  }
  out.d_f = std::move(d_fc);
  out.d_g = std::move(d_gc) + 2.0 * g / n;
  return out;
}

// ---------------------------------------------------------------------------
// Whitening and alignment

struct Whitening {
  Matrix a;
  Matrix b;
  Vector mean_f;
  Vector mean_g;
  Vector correlations;   // diagonal of E[f g^T], before clipping
  Vector factor_scores;  // clip(correlations, 0, 1)^2
};

/// Relative eigenvalue floor below which a reference covariance counts as singular.
inline constexpr double kRankTolerance = 1e-9;

inline void require_full_rank(const Matrix& c, const char* side) {
  const SymEig e = sym_eig(c);
  const double top = e.values(0);
  const double bottom = e.values(e.values.size() - 1);
  if (!(top > 0.0) || bottom <= kRankTolerance * top)
    throw Error(Errc::RankDeficient, std::string("whiten_align: covariance of ") + side +
                                         " is numerically singular (eigenvalues " + std::to_string(bottom) + " / " +
                                         std::to_string(top) + "); lower d or check the inputs");
}

inline Whitening whiten_align_features(const Matrix& f, const Matrix& g, bool center = true, double ridge = 0.0) {
  const Moments mom = batch_covariances(f, g, center, ridge);
  require_full_rank(mom.c_f, "f");
  require_full_rank(mom.c_g, "g");
  const Matrix root_f = inv_sqrt_psd(mom.c_f);
  const Matrix root_g = inv_sqrt_psd(mom.c_g);
  const SvdResult s = svd(root_f * mom.c_fg * root_g);
  const Index k = std::min(f.cols(), g.cols());
  Whitening w;
  w.a = s.u.leftCols(k).transpose() * root_f;
  w.b = s.v.leftCols(k).transpose() * root_g;
  w.mean_f = mom.mean_f;
  w.mean_g = mom.mean_g;
  w.correlations = s.singular_values.head(k);
  w.factor_scores = w.correlations.cwiseMax(0.0).cwiseMin(1.0).array().square();
  return w;
}

/// Raw encoder outputs for samples[order[i]], evaluated in chunks.
inline std::pair<Matrix, Matrix> encode_features(const NetworkParams& p, const Layout& layout,
                                                 std::span<const EncodedSample> samples,
                                                 std::span<const std::size_t> order, std::size_t chunk = 2048) {
  const auto n = static_cast<Index>(order.size());
  Matrix f(n, p.dim_out()), g(n, p.dim_out());
  for (std::size_t begin = 0; begin < order.size(); begin += chunk) {
    const std::size_t len = std::min(chunk, order.size() - begin);
    const auto [bx, by] = dense_batch(layout, samples, order.subspan(begin, len));
    f.middleRows(static_cast<Index>(begin), static_cast<Index>(len)) = run_layers(p.f_layers, bx);
    g.middleRows(static_cast<Index>(begin), static_cast<Index>(len)) = run_layers(p.g_layers, by);
  }
  return {std::move(f), std::move(g)};
}

inline Whitening whiten_align(const NetworkParams& p, const Layout& layout, std::span<const EncodedSample> reference,
                              bool center = true, double ridge = 0.0) {
  std::vector<std::size_t> order(reference.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto [f, g] = encode_features(p, layout, reference, order);
  return whiten_align_features(f, g, center, ridge);
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> lambda;      // empty when the snapshot whitening was singular
  std::vector<double> lambda_raw;  // pre-clip canonical correlations
};

struct FactorModel {
  NetworkParams params;
  Layout layout;
  Matrix a;
  Matrix b;
  Vector mean_f;
  Vector mean_g;
  Vector factor_scores;
  Vector ratios;
  Vector correlations;
  std::vector<EpochRecord> history;
  TrainConfig config;

  void set_whitening(Whitening w) {
    a = std::move(w.a);
    b = std::move(w.b);
    mean_f = std::move(w.mean_f);
    mean_g = std::move(w.mean_g);
    correlations = std::move(w.correlations);
    factor_scores = std::move(w.factor_scores);
    ratios = score_ratios(factor_scores);
  }
};

namespace detail {

inline void sgd_step(Layers& layers, const Layers& grads, double lr) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight.noalias() -= lr * grads[l].weight;
    layers[l].bias.noalias() -= lr * grads[l].bias;
  }
}

inline bool all_finite(const NetworkParams& p) {
  for (const Layers* ls : {&p.f_layers, &p.g_layers})
    for (const DenseLayer& l : *ls)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

inline double mean_loss(const NetworkParams& p, const Layout& layout, std::span<const EncodedSample> samples,
                        std::size_t batch, const TrainConfig& cfg) {
  if (samples.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t size = samples.size() < batch ? samples.size() : batch;
  const std::size_t chunks = samples.size() / size;
  double total = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    const auto [bx, by] = dense_batch(layout, samples, std::span<const std::size_t>(order).subspan(c * size, size));
    total += loss(run_layers(p.f_layers, bx), run_layers(p.g_layers, by), cfg.ridge, cfg.center, false).value;
  }
  return total / static_cast<double>(chunks);
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch SGD over shuffled training rows (incomplete last batch dropped),
/// then whitening on the full training set.
inline FactorModel train(const SplitDataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.train.empty()) throw Error(Errc::EmptyInput, "train: no training samples");
  const auto dim_x = static_cast<Index>(data.layout.x.dim());
  const auto dim_y = static_cast<Index>(data.layout.y.dim());

  FactorModel model;
  model.config = cfg;
  model.layout = data.layout;
  model.params = init_network(dim_x, dim_y, cfg, derive_seed(cfg.seed, "init"));

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::min(cfg.batch_size, data.train.size());
  const std::size_t n_batches = data.train.size() / batch;

  std::vector<std::size_t> snapshot_rows(std::min(cfg.snapshot_samples, data.train.size()));
  std::iota(snapshot_rows.begin(), snapshot_rows.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t bi = 0; bi < n_batches; ++bi) {
      const auto rows = std::span<const std::size_t>(order).subspan(bi * batch, batch);
      const auto [bx, by] = dense_batch(data.layout, data.train, rows);
      const ForwardResult fw = forward(model.params, bx, by);
      LossResult lr;
      try {
        lr = loss(fw.f, fw.g, cfg.ridge, cfg.center, cfg.grad_through_whitening);
      } catch (const Error& e) {
        throw Error(Errc::DivergenceDetected, "epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) +
                                                  ": " + e.what());
      }
      if (!std::isfinite(lr.value) || !lr.d_f.allFinite() || !lr.d_g.allFinite())
        throw Error(Errc::DivergenceDetected,
                    "non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi));
      total += lr.value;
      detail::sgd_step(model.params.f_layers, backward_layers(model.params.f_layers, fw.f_cache, lr.d_f),
                       cfg.learning_rate);
      detail::sgd_step(model.params.g_layers, backward_layers(model.params.g_layers, fw.g_cache, lr.d_g),
                       cfg.learning_rate);
      if (!detail::all_finite(model.params))
        throw Error(Errc::DivergenceDetected,
                    "non-finite parameters at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(n_batches);
    try {
      rec.val_loss = detail::mean_loss(model.params, data.layout, data.validation, cfg.batch_size, cfg);
    } catch (const Error& e) {
      throw Error(Errc::DivergenceDetected, "validation loss at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(rec.val_loss) && data.validation.size() >= 2)
      throw Error(Errc::DivergenceDetected, "non-finite validation loss at epoch " + std::to_string(epoch));
    if (snapshot_rows.size() >= 2) {
      try {
        const auto [f, g] = encode_features(model.params, data.layout, data.train, snapshot_rows);
        const Whitening w = whiten_align_features(f, g, cfg.center, cfg.whiten_ridge);
        rec.lambda.assign(w.factor_scores.begin(), w.factor_scores.end());
        rec.lambda_raw.assign(w.correlations.begin(), w.correlations.end());
      } catch (const Error& e) {
        if (e.code() != Errc::RankDeficient) throw;
      }
    }
    if (on_epoch) on_epoch(rec);
    model.history.push_back(std::move(rec));
  }

  model.set_whitening(whiten_align(model.params, data.layout, data.train, cfg.center, cfg.whiten_ridge));
  return model;
}

// ---------------------------------------------------------------------------
// Embedding

/// Factor coordinates of each row of `x`: A (f~(x) - mean_f).
inline Matrix embed_x_batch(const FactorModel& m, const Matrix& x) {
  return (run_layers(m.params.f_layers, x).rowwise() - m.mean_f.transpose()) * m.a.transpose();
}

inline Matrix embed_y_batch(const FactorModel& m, const Matrix& y) {
  return (run_layers(m.params.g_layers, y).rowwise() - m.mean_g.transpose()) * m.b.transpose();
}

inline Vector embed_x(const FactorModel& m, const Eigen::RowVectorXd& x) {
  return embed_x_batch(m, Matrix(x)).row(0).transpose();
}

inline Vector embed_y(const FactorModel& m, const Eigen::RowVectorXd& y) {
  return embed_y_batch(m, Matrix(y)).row(0).transpose();
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline nlohmann::json matrix_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != rows * cols) throw Error(Errc::IoFailure, "model: matrix size mismatch");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index jj = 0; jj < cols; ++jj) m(i, jj) = data[k++].get<double>();
  return m;
}

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.begin(), v.end()); }

inline Vector vector_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline nlohmann::json layers_json(const Layers& layers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : layers) arr.push_back({{"weight", matrix_json(l.weight)}, {"bias", vector_json(l.bias)}});
  return arr;
}

inline Layers layers_from(const nlohmann::json& arr) {
  Layers out;
  for (const auto& l : arr) out.push_back({matrix_from(l.at("weight")), vector_from(l.at("bias"))});
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].bias.size() != out[i].weight.cols() || (i > 0 && out[i].weight.rows() != out[i - 1].weight.cols()))
      throw Error(Errc::IoFailure, "model: layer shapes do not chain");
  }
  return out;
}

}  // namespace detail

inline nlohmann::json config_json(const TrainConfig& c) {
  return {{"d", c.d},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"ridge", c.ridge},
          {"center", c.center},
          {"grad_through_whitening", c.grad_through_whitening},
          {"seed", c.seed},
          {"f_hidden", c.f_hidden},
          {"g_hidden", c.g_hidden},
          {"whiten_ridge", c.whiten_ridge},
          {"snapshot_samples", c.snapshot_samples}};
}

inline TrainConfig config_from(const nlohmann::json& j) {
  TrainConfig c;
  c.d = j.at("d").get<Index>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.ridge = j.at("ridge").get<double>();
  c.center = j.at("center").get<bool>();
  c.grad_through_whitening = j.at("grad_through_whitening").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.f_hidden = j.at("f_hidden").get<std::vector<Index>>();
  c.g_hidden = j.at("g_hidden").get<std::vector<Index>>();
  c.whiten_ridge = j.value("whiten_ridge", 0.0);
  c.snapshot_samples = j.value("snapshot_samples", std::size_t{4096});
  return c;
}

inline nlohmann::json epoch_json(const EpochRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"lambda", r.lambda}, {"lambda_raw", r.lambda_raw}};
  j["val_loss"] = std::isfinite(r.val_loss) ? nlohmann::json(r.val_loss) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json model_json(const FactorModel& m) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : m.history) history.push_back(epoch_json(r));
  return {{"format", "nca-model"},
          {"version", 1},
          {"config", config_json(m.config)},
          {"input_dims", {{"x", m.params.dim_x()}, {"y", m.params.dim_y()}}},
          {"layout", {{"x", side_layout_json(m.layout.x)}, {"y", side_layout_json(m.layout.y)}}},
          {"f_layers", detail::layers_json(m.params.f_layers)},
          {"g_layers", detail::layers_json(m.params.g_layers)},
          {"A", detail::matrix_json(m.a)},
          {"B", detail::matrix_json(m.b)},
          {"mean_f", detail::vector_json(m.mean_f)},
          {"mean_g", detail::vector_json(m.mean_g)},
          {"factor_scores", detail::vector_json(m.factor_scores)},
          {"ratios", detail::vector_json(m.ratios)},
          {"correlations", detail::vector_json(m.correlations)},
          {"history", history}};
}

inline FactorModel model_from(const nlohmann::json& j) {
  if (j.value("format", "") != "nca-model" || j.value("version", 0) != 1)
    throw Error(Errc::IoFailure, "not an nca-model v1 document");
  FactorModel m;
  m.config = config_from(j.at("config"));
  m.params.f_layers = detail::layers_from(j.at("f_layers"));
  m.params.g_layers = detail::layers_from(j.at("g_layers"));
  m.layout.x = side_layout_from(j.at("layout").at("x"));
  m.layout.y = side_layout_from(j.at("layout").at("y"));
  if (static_cast<Index>(m.layout.x.dim()) != m.params.dim_x() || static_cast<Index>(m.layout.y.dim()) != m.params.dim_y())
    throw Error(Errc::IoFailure, "model: layout does not match network input dims");
  m.a = detail::matrix_from(j.at("A"));
  m.b = detail::matrix_from(j.at("B"));
  m.mean_f = detail::vector_from(j.at("mean_f"));
  m.mean_g = detail::vector_from(j.at("mean_g"));
  m.factor_scores = detail::vector_from(j.at("factor_scores"));
  m.ratios = detail::vector_from(j.at("ratios"));
  m.correlations = detail::vector_from(j.at("correlations"));
  for (const auto& h : j.at("history")) {
    EpochRecord r;
    r.epoch = h.at("epoch").get<int>();
    r.train_loss = h.at("train_loss").get<double>();
    r.val_loss = h.at("val_loss").is_null() ? std::numeric_limits<double>::quiet_NaN() : h.at("val_loss").get<double>();
    r.lambda = h.at("lambda").get<std::vector<double>>();
    r.lambda_raw = h.at("lambda_raw").get<std::vector<double>>();
    m.history.push_back(std::move(r));
  }
  return m;
}

inline void save_model(const FactorModel& m, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(Errc::IoFailure, "cannot write " + path.string());
  os << model_json(m).dump() << '\n';
  if (!os) throw Error(Errc::IoFailure, "write failed: " + path.string());
}

inline FactorModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::IoFailure, "cannot open " + path.string());
  try {
    return model_from(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoFailure, path.string() + ": " + e.what());
  }
}

}  // namespace nca

#endif  // NCA_NEURAL_CA_HPP
