#pragma once
// Bidirectional LSTM emission scorer with hand-written backpropagation.
//
//   x_t  = dropout([E[w_t] ; K[k_t]])          (K only in stage-2 mode)
//   ->h_t, <-h_t from two LSTMs (gates i, f, o, candidate g)
//   P_t  = W_out dropout([->h_t ; <-h_t]) + b_out

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "evex/core.hpp"
#include "evex/crf.hpp"

namespace evex {

class Vocab {
 public:
  static constexpr int kUnk = 0;

  Vocab() { add("<unk>"); }

  int add(const std::string& word) {
    const std::string key = normalize(word);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(words_.size());
    words_.push_back(key);
    index_.emplace(key, id);
    return id;
  }
  int lookup(const std::string& word) const {
    auto it = index_.find(normalize(word));
    return it == index_.end() ? kUnk : it->second;
  }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  static Vocab from_words(const std::vector<std::string>& words) {
    Vocab v;
    for (std::size_t i = 1; i < words.size(); ++i) v.add(words[i]);
    return v;
  }
  friend bool operator==(const Vocab& a, const Vocab& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

struct ModelConfig {
  int embed_dim = 200;
  int lstm_hidden = 100;
  int keyarg_embed_dim = 50;
  double dropout_rate = 0.5;
  int num_labels = 1;
  int num_keyarg_labels = 0;  // 0: stage-1 model without key-argument input
  Vocab vocab;

  bool uses_keyargs() const { return num_keyarg_labels > 0; }
  int input_dim() const { return embed_dim + (uses_keyargs() ? keyarg_embed_dim : 0); }

  void validate() const {
    if (embed_dim < 1 || lstm_hidden < 1 || num_labels < 1 || (uses_keyargs() && keyarg_embed_dim < 1))
      throw Error("bad_config", "model dimensions must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("bad_config", "dropout_rate must be in [0, 1)");
  }
};

/// Deterministic uniform draws in [0, 1) from a 64-bit engine.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct BlstmParams {
  Matrix embed;   // vocab x embed_dim
  Matrix keyarg;  // num_keyarg_labels x keyarg_embed_dim
  Matrix fwd_wx, fwd_wh, fwd_b;  // 4h x in, 4h x h, 4h x 1; gate order i, f, o, g
  Matrix bwd_wx, bwd_wh, bwd_b;
  Matrix out_w;  // labels x 2h
  Matrix out_b;  // labels x 1

  template <class Fn>
  void visit(Fn&& fn) {
    fn("embed", embed);
    fn("keyarg", keyarg);
    fn("fwd_wx", fwd_wx);
    fn("fwd_wh", fwd_wh);
    fn("fwd_b", fwd_b);
    fn("bwd_wx", bwd_wx);
    fn("bwd_wh", bwd_wh);
    fn("bwd_b", bwd_b);
    fn("out_w", out_w);
    fn("out_b", out_b);
  }
  template <class Fn>
  void visit(Fn&& fn) const {
    const_cast<BlstmParams*>(this)->visit([&](const char* name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
  }

  static BlstmParams zeros(const ModelConfig& cfg) {
    BlstmParams p;
    const int h = cfg.lstm_hidden, in = cfg.input_dim();
    p.embed = Matrix::Zero(cfg.vocab.size(), cfg.embed_dim);
    p.keyarg = Matrix::Zero(cfg.num_keyarg_labels, cfg.uses_keyargs() ? cfg.keyarg_embed_dim : 0);
    p.fwd_wx = p.bwd_wx = Matrix::Zero(4 * h, in);
    p.fwd_wh = p.bwd_wh = Matrix::Zero(4 * h, h);
    p.fwd_b = p.bwd_b = Matrix::Zero(4 * h, 1);
    p.out_w = Matrix::Zero(cfg.num_labels, 2 * h);
    p.out_b = Matrix::Zero(cfg.num_labels, 1);
    return p;
  }

  /// Weights uniform in [-0.08, 0.08]; biases zero except the forget gate (1).
  static BlstmParams initialize(const ModelConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    BlstmParams p = zeros(cfg);
    auto fill = [&](Matrix& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (unit_uniform(rng) * 2.0 - 1.0) * 0.08;
    };
    fill(p.embed);
    fill(p.keyarg);
    fill(p.fwd_wx);
    fill(p.fwd_wh);
    fill(p.bwd_wx);
    fill(p.bwd_wh);
    fill(p.out_w);
    const int h = cfg.lstm_hidden;
    p.fwd_b.block(h, 0, h, 1).setOnes();
    p.bwd_b.block(h, 0, h, 1).setOnes();
    return p;
  }
};

/// Activations of one LSTM direction, rows in processing order.
struct LstmTrace {
  Matrix gates;  // n x 4h after nonlinearity
  Matrix cells;  // n x h
  Matrix hidden; // n x h
};

struct ForwardCache {
  std::vector<int> words;
  std::vector<int> keyargs;
  Matrix input;      // n x in, after dropout
  Matrix input_mask; // empty when no dropout was applied
  LstmTrace fwd, bwd;  // bwd rows are in reversed time order
  Matrix output;     // n x 2h, after dropout
  Matrix output_mask;
  std::uint64_t version = 0;
  bool valid = false;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace neural_detail {

/// Runs one LSTM over the rows of `x` in order.
inline LstmTrace run_lstm(const Matrix& x, const Matrix& wx, const Matrix& wh, const Matrix& b) {
  const Eigen::Index n = x.rows(), h = wh.cols();
  LstmTrace tr;
  tr.gates.resize(n, 4 * h);
  tr.cells.resize(n, h);
  tr.hidden.resize(n, h);
  Matrix z = x * wx.transpose();
  z.rowwise() += b.transpose().row(0);
  Vector hprev = Vector::Zero(h), cprev = Vector::Zero(h);
  for (Eigen::Index t = 0; t < n; ++t) {
    Vector zt = z.row(t).transpose() + wh * hprev;
    for (Eigen::Index k = 0; k < 3 * h; ++k) zt[k] = sigmoid(zt[k]);
    for (Eigen::Index k = 3 * h; k < 4 * h; ++k) zt[k] = std::tanh(zt[k]);
    Vector c = zt.segment(h, h).cwiseProduct(cprev) + zt.segment(0, h).cwiseProduct(zt.segment(3 * h, h));
    Vector hh = zt.segment(2 * h, h).cwiseProduct(c.array().tanh().matrix());
    tr.gates.row(t) = zt.transpose();
    tr.cells.row(t) = c.transpose();
    tr.hidden.row(t) = hh.transpose();
    hprev = hh;
    cprev = c;
  }
  return tr;
}

/// Backpropagates dH (rows in processing order) through one LSTM. Returns dX
/// and accumulates weight gradients.
inline Matrix backprop_lstm(const Matrix& x, const LstmTrace& tr, const Matrix& dH, const Matrix& wx,
                            const Matrix& wh, Matrix& dwx, Matrix& dwh, Matrix& db) {
  const Eigen::Index n = x.rows(), h = wh.cols();
  Matrix dz(n, 4 * h);
  Vector dh_next = Vector::Zero(h), dc_next = Vector::Zero(h);
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const auto g = tr.gates.row(t).transpose();
    const Vector c = tr.cells.row(t).transpose();
    const Vector cprev = t > 0 ? Vector(tr.cells.row(t - 1).transpose()) : Vector(Vector::Zero(h));
    const Vector tc = c.array().tanh();
    const Vector dh = dH.row(t).transpose() + dh_next;
    const auto gi = g.segment(0, h), gf = g.segment(h, h), go = g.segment(2 * h, h), gg = g.segment(3 * h, h);
    const Vector dc = dh.cwiseProduct(go).cwiseProduct((1.0 - tc.array().square()).matrix()) + dc_next;
    Vector dzt(4 * h);
    dzt.segment(0, h) = dc.cwiseProduct(gg).array() * gi.array() * (1.0 - gi.array());
    dzt.segment(h, h) = dc.cwiseProduct(cprev).array() * gf.array() * (1.0 - gf.array());
    dzt.segment(2 * h, h) = dh.cwiseProduct(tc).array() * go.array() * (1.0 - go.array());
    dzt.segment(3 * h, h) = dc.cwiseProduct(gi).array() * (1.0 - gg.array().square());
    dz.row(t) = dzt.transpose();
    dh_next = wh.transpose() * dzt;
    dc_next = dc.cwiseProduct(gf);
  }
  dwx.noalias() += dz.transpose() * x;
  if (n > 1) dwh.noalias() += dz.bottomRows(n - 1).transpose() * tr.hidden.topRows(n - 1);
  db += dz.colwise().sum().transpose();
  return dz * wx;
}

inline Matrix reversed_rows(const Matrix& m) { return m.colwise().reverse(); }

inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  Matrix mask(rows, cols);
  const double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = unit_uniform(rng) < keep ? 1.0 / keep : 0.0;
  return mask;
}

}  // namespace neural_detail

/// Emission scorer. `rng` non-null switches on training-mode dropout.
class Blstm {
 public:
  Blstm() = default;
  Blstm(ModelConfig cfg, BlstmParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    check_shapes();
  }

  const ModelConfig& config() const { return cfg_; }
  const BlstmParams& params() const { return params_; }
  /// Mutable access invalidates outstanding forward caches.
  BlstmParams& mutable_params() {
    ++version_;
    return params_;
  }

  Matrix forward(const std::vector<int>& words, const std::vector<int>& keyargs, ForwardCache* cache = nullptr,
                 std::mt19937_64* rng = nullptr) const {
    using namespace neural_detail;
    if (words.empty()) throw Error("shape", "cannot score an empty sentence");
    if (cfg_.uses_keyargs() && keyargs.size() != words.size())
      throw Error("shape", "keyarg_labels has " + std::to_string(keyargs.size()) + " entries for " +
                               std::to_string(words.size()) + " tokens");
    const Eigen::Index n = static_cast<Eigen::Index>(words.size());
    Matrix x(n, cfg_.input_dim());
    for (Eigen::Index t = 0; t < n; ++t) {
      const int w = words[t];
      if (w < 0 || w >= params_.embed.rows()) throw Error("shape", "embed: word id out of range");
      x.row(t).head(cfg_.embed_dim) = params_.embed.row(w);
      if (cfg_.uses_keyargs()) {
        const int k = keyargs[t];
        if (k < 0 || k >= params_.keyarg.rows()) throw Error("shape", "keyarg: label id out of range");
        x.row(t).tail(cfg_.keyarg_embed_dim) = params_.keyarg.row(k);
      }
    }
    const bool train = rng != nullptr && cfg_.dropout_rate > 0.0;
    Matrix in_mask, out_mask;
    if (train) {
      in_mask = dropout_mask(x.rows(), x.cols(), cfg_.dropout_rate, *rng);
      x = x.cwiseProduct(in_mask);
    }
    LstmTrace f = run_lstm(x, params_.fwd_wx, params_.fwd_wh, params_.fwd_b);
    LstmTrace b = run_lstm(reversed_rows(x), params_.bwd_wx, params_.bwd_wh, params_.bwd_b);
    const Eigen::Index h = cfg_.lstm_hidden;
    Matrix out(n, 2 * h);
    out.leftCols(h) = f.hidden;
    out.rightCols(h) = reversed_rows(b.hidden);
    if (train) {
      out_mask = dropout_mask(out.rows(), out.cols(), cfg_.dropout_rate, *rng);
      out = out.cwiseProduct(out_mask);
    }
    Matrix P = out * params_.out_w.transpose();
    P.rowwise() += params_.out_b.transpose().row(0);
    if (cache) {
      cache->words = words;
      cache->keyargs = keyargs;
      cache->input = std::move(x);
      cache->input_mask = std::move(in_mask);
      cache->fwd = std::move(f);
      cache->bwd = std::move(b);
      cache->output = std::move(out);
      cache->output_mask = std::move(out_mask);
      cache->version = version_;
      cache->valid = true;
    }
    return P;
  }

  /// Parameter gradients of a loss whose gradient w.r.t. the emissions is dP.
  /// Accumulates into `grads` (shaped like the parameters).
  void backward(const ForwardCache& cache, const Matrix& dP, BlstmParams& grads) const {
    using namespace neural_detail;
    if (!cache.valid || cache.version != version_)
      throw Error("stale_cache", "forward cache does not belong to the current parameters");
    const Eigen::Index n = cache.input.rows(), h = cfg_.lstm_hidden;
    if (dP.rows() != n || dP.cols() != cfg_.num_labels) throw Error("shape", "dP does not match the cached forward");

    grads.out_w.noalias() += dP.transpose() * cache.output;
    grads.out_b += dP.colwise().sum().transpose();
    Matrix dout = dP * params_.out_w;
    if (cache.output_mask.size()) dout = dout.cwiseProduct(cache.output_mask);

    Matrix dx = backprop_lstm(cache.input, cache.fwd, dout.leftCols(h), params_.fwd_wx, params_.fwd_wh,
                              grads.fwd_wx, grads.fwd_wh, grads.fwd_b);
    Matrix dx_b = backprop_lstm(reversed_rows(cache.input), cache.bwd, reversed_rows(dout.rightCols(h)),
                                params_.bwd_wx, params_.bwd_wh, grads.bwd_wx, grads.bwd_wh, grads.bwd_b);
    dx += reversed_rows(dx_b);
    if (cache.input_mask.size()) dx = dx.cwiseProduct(cache.input_mask);
    for (Eigen::Index t = 0; t < n; ++t) {
      grads.embed.row(cache.words[t]) += dx.row(t).head(cfg_.embed_dim);
      if (cfg_.uses_keyargs()) grads.keyarg.row(cache.keyargs[t]) += dx.row(t).tail(cfg_.keyarg_embed_dim);
    }
  }

  std::vector<int> word_ids(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(cfg_.vocab.lookup(t));
    return ids;
  }

 private:
  void check_shapes() const {
    const BlstmParams ref = BlstmParams::zeros(cfg_);
    params_.visit([&](const char* name, const Matrix& m) {
      const Matrix* r = nullptr;
      const_cast<BlstmParams&>(ref).visit([&](const char* n2, Matrix& m2) {
        if (std::string(name) == n2) r = &m2;
      });
      if (m.rows() != r->rows() || m.cols() != r->cols())
        throw Error("shape", std::string("parameter '") + name + "' is " + std::to_string(m.rows()) + "x" +
                                 std::to_string(m.cols()) + ", expected " + std::to_string(r->rows()) + "x" +
                                 std::to_string(r->cols()));
    });
  }

  ModelConfig cfg_;
  BlstmParams params_;
  std::uint64_t version_ = 1;
};

/// Adam with bias correction. Moments are kept per named tensor.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Throws on a non-finite gradient before touching any parameter.
  void step(const std::vector<std::pair<std::string, Matrix*>>& params,
            const std::vector<std::pair<std::string, const Matrix*>>& grads) {
    if (params.size() != grads.size()) throw Error("shape", "parameter and gradient lists differ");
    for (std::size_t k = 0; k < params.size(); ++k) {
      const Matrix& g = *grads[k].second;
      if (g.rows() != params[k].second->rows() || g.cols() != params[k].second->cols())
        throw Error("shape", "gradient for '" + params[k].first + "' has the wrong shape");
      if (!g.allFinite()) throw Error("nan_gradient", "non-finite gradient for '" + params[k].first + "'");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_), c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Matrix& p = *params[k].second;
      const Matrix& g = *grads[k].second;
      auto [it, fresh] = m_.try_emplace(params[k].first);
      if (fresh) {
        it->second = Matrix::Zero(p.rows(), p.cols());
        v_[params[k].first] = Matrix::Zero(p.rows(), p.cols());
      }
      Matrix& m = it->second;
      Matrix& v = v_[params[k].first];
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
      p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    }
  }

  const Matrix& first_moment(const std::string& name) const { return m_.at(name); }
  const Matrix& second_moment(const std::string& name) const { return v_.at(name); }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

// ---------------------------------------------------------------------------
// Serialization helpers.

inline nlohmann::json tensor_to_json(const Matrix& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Matrix tensor_from_json(const nlohmann::json& j, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw Error("parse", "tensor '" + name + "' has " + std::to_string(data.size()) + " values for " +
                             std::to_string(rows) + "x" + std::to_string(cols));
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

/// Overwrites embedding rows of known words from a text vector file
/// (`token v1 ... vd` per line). Returns the number of rows loaded.
inline int load_embeddings(const std::string& path, const Vocab& vocab, Matrix& embed) {
  std::ifstream in(path);
  if (!in) throw Error("io", path + ":0: cannot open for reading");
  std::string line;
  int lineno = 0, loaded = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (static_cast<Eigen::Index>(v.size()) != embed.cols()) {
      if (lineno == 1 && v.size() == 1) continue;  // word2vec-style "count dim" header
      throw Error("parse", path + ":" + std::to_string(lineno) + ": expected " + std::to_string(embed.cols()) +
                               " values, got " + std::to_string(v.size()));
    }
    const int id = vocab.lookup(word);
    if (id == Vocab::kUnk && normalize(word) != "<unk>") continue;
    for (std::size_t k = 0; k < v.size(); ++k) embed(id, static_cast<Eigen::Index>(k)) = v[k];
    ++loaded;
  }
  return loaded;
}

}  // namespace evex
