#include "uq/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "uq/errors.hpp"
#include "uq/rng.hpp"

namespace uq::nn {

namespace {

using json = nlohmann::ordered_json;

double apply_activation(double v, Activation a) {
  switch (a) {
    case Activation::Identity: return v;
    case Activation::Relu: return v > 0.0 ? v : 0.0;
    case Activation::Tanh: return std::tanh(v);
  }
  return v;
}

double activation_derivative(double z, double a_val, Activation a) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - a_val * a_val;
  }
  return 1.0;
}

double sigmoid(double s) {
  if (s >= 0.0) {
    return 1.0 / (1.0 + std::exp(-s));
  }
  double e = std::exp(s);
  return e / (1.0 + e);
}

struct ForwardCache {
  std::vector<std::vector<double>> a;     // a[0] = input, a[L] = output
  std::vector<std::vector<double>> z;     // pre-activations per layer
  std::vector<std::vector<double>> keep;  // dropout keep scale per hidden layer
};

void forward_cached(const Mlp& mlp, std::span<const double> x,
                    const ForwardMode& mode, ForwardCache& cache) {
  const std::size_t layers = mlp.layer_count();
  cache.a.assign(layers + 1, {});
  cache.z.assign(layers, {});
  cache.keep.assign(layers, {});
  cache.a[0].assign(x.begin(), x.end());

  Rng mask_rng(mode.seed, 0x6d61736bULL);  // dropout mask stream
  for (std::size_t l = 0; l < layers; ++l) {
    const int in_w = mlp.widths[l];
    const int out_w = mlp.widths[l + 1];
    const auto& w = mlp.weights[l];
    const auto& b = mlp.biases[l];
    auto& z = cache.z[l];
    auto& a = cache.a[l + 1];
    z.assign(static_cast<std::size_t>(out_w), 0.0);
    a.assign(static_cast<std::size_t>(out_w), 0.0);
    const auto& prev = cache.a[l];
    for (int o = 0; o < out_w; ++o) {
      double acc = b[static_cast<std::size_t>(o)];
      const double* row = w.data() + static_cast<std::size_t>(o) * in_w;
      for (int i = 0; i < in_w; ++i) {
        acc += row[i] * prev[static_cast<std::size_t>(i)];
      }
      z[static_cast<std::size_t>(o)] = acc;
      a[static_cast<std::size_t>(o)] =
          apply_activation(acc, mlp.activations[l]);
    }
    if (l < mlp.dropout.size()) {  // hidden layers only
      const double rate = mlp.dropout[l];
      if (mode.stochastic && rate > 0.0) {
        auto& keep = cache.keep[l];
        keep.assign(static_cast<std::size_t>(out_w), 0.0);
        const double scale = 1.0 / (1.0 - rate);
        for (int o = 0; o < out_w; ++o) {
          const bool kept = mask_rng.uniform() >= rate;
          keep[static_cast<std::size_t>(o)] = kept ? scale : 0.0;
          a[static_cast<std::size_t>(o)] *= keep[static_cast<std::size_t>(o)];
        }
      }
    }
  }
}

// Loss of the raw output vector plus its gradient w.r.t. that vector.
double loss_and_output_grad(const Mlp& mlp, const std::vector<double>& out,
                            double y, LossKind loss,
                            std::vector<double>& d_out) {
  d_out.assign(out.size(), 0.0);
  if (mlp.head == HeadKind::Gaussian) {
    const double mu = out[0];
    const double s = out[1];
    if (loss == LossKind::GaussianNll) {
      const double sig = softplus(s) + mlp.sigma_floor;
      const double diff = y - mu;
      const double l = std::log(sig) + diff * diff / (2.0 * sig * sig) +
                       0.5 * std::log(2.0 * std::numbers::pi);
      d_out[0] = (mu - y) / (sig * sig);
      const double dl_dsig = 1.0 / sig - diff * diff / (sig * sig * sig);
      d_out[1] = dl_dsig * sigmoid(s);
      return l;
    }
    // MSE on a gaussian head trains the mean channel only.
    const double diff = mu - y;
    d_out[0] = 2.0 * diff;
    return diff * diff;
  }
  if (loss == LossKind::GaussianNll) {
    throw ConfigError("gaussian_nll loss requires a gaussian head");
  }
  const double diff = out[0] - y;
  d_out[0] = 2.0 * diff;
  return diff * diff;
}

struct Grads {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  explicit Grads(const Mlp& mlp) {
    w.resize(mlp.layer_count());
    b.resize(mlp.layer_count());
    for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
      w[l].assign(mlp.weights[l].size(), 0.0);
      b[l].assign(mlp.biases[l].size(), 0.0);
    }
  }

  void accumulate(const Grads& g, double scale) {
    for (std::size_t l = 0; l < w.size(); ++l) {
      for (std::size_t i = 0; i < w[l].size(); ++i) w[l][i] += scale * g.w[l][i];
      for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += scale * g.b[l][i];
    }
  }
};

void backward(const Mlp& mlp, const ForwardCache& cache,
              const std::vector<double>& d_out, Grads& grads) {
  const std::size_t layers = mlp.layer_count();
  std::vector<double> delta = d_out;  // dL/da at the current layer
  for (std::size_t li = layers; li-- > 0;) {
    const int in_w = mlp.widths[li];
    const int out_w = mlp.widths[li + 1];
    // Through dropout scaling, then the activation.
    if (!cache.keep[li].empty()) {
      for (int o = 0; o < out_w; ++o) {
        delta[static_cast<std::size_t>(o)] *=
            cache.keep[li][static_cast<std::size_t>(o)];
      }
    }
    std::vector<double> dz(static_cast<std::size_t>(out_w));
    for (int o = 0; o < out_w; ++o) {
      // Activation value before dropout scaling.
      const double z = cache.z[li][static_cast<std::size_t>(o)];
      const double a_raw = apply_activation(z, mlp.activations[li]);
      dz[static_cast<std::size_t>(o)] =
          delta[static_cast<std::size_t>(o)] *
          activation_derivative(z, a_raw, mlp.activations[li]);
    }
    const auto& prev = cache.a[li];
    auto& gw = grads.w[li];
    auto& gb = grads.b[li];
    for (int o = 0; o < out_w; ++o) {
      gb[static_cast<std::size_t>(o)] += dz[static_cast<std::size_t>(o)];
      double* row = gw.data() + static_cast<std::size_t>(o) * in_w;
      for (int i = 0; i < in_w; ++i) {
        row[i] += dz[static_cast<std::size_t>(o)] *
                  prev[static_cast<std::size_t>(i)];
      }
    }
    if (li == 0) break;
    std::vector<double> d_prev(static_cast<std::size_t>(in_w), 0.0);
    const auto& w = mlp.weights[li];
    for (int o = 0; o < out_w; ++o) {
      const double* row = w.data() + static_cast<std::size_t>(o) * in_w;
      for (int i = 0; i < in_w; ++i) {
        d_prev[static_cast<std::size_t>(i)] +=
            dz[static_cast<std::size_t>(o)] * row[i];
      }
    }
    delta = std::move(d_prev);
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation: " + s);
}

std::string to_string(HeadKind h) {
  return h == HeadKind::Point ? "point" : "gaussian";
}

HeadKind head_from_string(const std::string& s) {
  if (s == "point") return HeadKind::Point;
  if (s == "gaussian") return HeadKind::Gaussian;
  throw ConfigError("unknown head kind: " + s);
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    n += weights[l].size() + biases[l].size();
  }
  return n;
}

void Mlp::validate() const {
  if (widths.size() < 2) throw ConfigError("mlp needs at least two widths");
  for (int w : widths) {
    if (w <= 0) throw ConfigError("layer widths must be positive");
  }
  if (activations.size() != layer_count()) {
    throw ConfigError("one activation per non-input layer required");
  }
  if (dropout.size() != layer_count() - 1) {
    throw ConfigError("one dropout rate per hidden layer required");
  }
  for (double r : dropout) {
    if (r < 0.0 || r >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
  }
  if (weights.size() != layer_count() || biases.size() != layer_count()) {
    throw ConfigError("weight/bias layer count mismatch");
  }
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const auto expected_w =
        static_cast<std::size_t>(widths[l]) * static_cast<std::size_t>(widths[l + 1]);
    if (weights[l].size() != expected_w ||
        biases[l].size() != static_cast<std::size_t>(widths[l + 1])) {
      throw ConfigError("weight matrix shape disagrees with widths at layer " +
                        std::to_string(l));
    }
  }
  if (head == HeadKind::Gaussian) {
    if (widths.back() != 2) {
      throw ConfigError("gaussian head requires output width 2 (mu, s)");
    }
    if (activations.back() != Activation::Identity) {
      throw ConfigError("gaussian head requires identity output activation");
    }
    if (sigma_floor <= 0.0) throw ConfigError("sigma_floor must be > 0");
  }
}

void Mlp::check_finite() const {
  for (std::size_t l = 0; l < layer_count(); ++l) {
    for (double v : weights[l]) {
      if (!std::isfinite(v)) throw StateError("non-finite weight in layer " + std::to_string(l));
    }
    for (double v : biases[l]) {
      if (!std::isfinite(v)) throw StateError("non-finite bias in layer " + std::to_string(l));
    }
  }
}

double& Mlp::param(std::size_t flat_index) {
  for (std::size_t l = 0; l < layer_count(); ++l) {
    if (flat_index < weights[l].size()) return weights[l][flat_index];
    flat_index -= weights[l].size();
    if (flat_index < biases[l].size()) return biases[l][flat_index];
    flat_index -= biases[l].size();
  }
  throw DomainError("parameter index out of range");
}

double Mlp::param(std::size_t flat_index) const {
  return const_cast<Mlp*>(this)->param(flat_index);
}

Mlp make_mlp(std::vector<int> widths, std::vector<Activation> activations,
             std::vector<double> dropout, HeadKind head, std::uint64_t seed,
             double sigma_floor) {
  Mlp mlp;
  mlp.widths = std::move(widths);
  mlp.activations = std::move(activations);
  mlp.dropout = std::move(dropout);
  mlp.head = head;
  mlp.sigma_floor = sigma_floor;
  mlp.weights.resize(mlp.layer_count());
  mlp.biases.resize(mlp.layer_count());
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    const int in_w = mlp.widths[l];
    const int out_w = mlp.widths[l + 1];
    const double bound = std::sqrt(6.0 / (in_w + out_w));
    Rng r(seed, l);
    mlp.weights[l].resize(static_cast<std::size_t>(in_w) * out_w);
    for (auto& v : mlp.weights[l]) v = r.uniform(-bound, bound);
    mlp.biases[l].assign(static_cast<std::size_t>(out_w), 0.0);
  }
  mlp.validate();
  return mlp;
}

std::vector<double> forward(const Mlp& mlp, std::span<const double> x,
                            const ForwardMode& mode) {
  if (x.size() != static_cast<std::size_t>(mlp.input_width())) {
    throw ConfigError("input width " + std::to_string(x.size()) +
                      " does not match network input " +
                      std::to_string(mlp.input_width()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw DomainError("non-finite feature value");
  }
  mlp.check_finite();
  ForwardCache cache;
  forward_cached(mlp, x, mode, cache);
  return cache.a.back();
}

double softplus(double s) {
  if (s > 30.0) return s;
  if (s < -30.0) return std::exp(s);
  return std::log1p(std::exp(s));
}

GaussianOut forward_gaussian(const Mlp& mlp, std::span<const double> x,
                             const ForwardMode& mode) {
  if (mlp.head != HeadKind::Gaussian) {
    throw ConfigError("forward_gaussian requires a gaussian head");
  }
  const auto out = forward(mlp, x, mode);
  return {out[0], softplus(out[1]) + mlp.sigma_floor};
}

double forward_point(const Mlp& mlp, std::span<const double> x,
                     const ForwardMode& mode) {
  return forward(mlp, x, mode)[0];
}

double gaussian_nll_loss(double mu, double sigma, double y) {
  if (sigma <= 0.0) throw DomainError("gaussian_nll_loss requires sigma > 0");
  const double diff = y - mu;
  return std::log(sigma) + diff * diff / (2.0 * sigma * sigma) +
         0.5 * std::log(2.0 * std::numbers::pi);
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size <= 0) throw ConfigError("batch_size must be > 0");
}

TrainTrace train(Mlp& mlp, const Dataset& data, const TrainConfig& cfg) {
  mlp.validate();
  cfg.validate();
  if (data.empty()) throw ConfigError("training data must be non-empty");
  data.validate();
  if (data.width() != static_cast<std::size_t>(mlp.input_width())) {
    throw ConfigError("dataset width does not match network input");
  }
  if (cfg.loss == LossKind::GaussianNll && mlp.head != HeadKind::Gaussian) {
    throw ConfigError("gaussian_nll loss requires a gaussian head");
  }

  const std::size_t n = data.size();
  const bool use_dropout =
      std::any_of(mlp.dropout.begin(), mlp.dropout.end(),
                  [](double r) { return r > 0.0; });

  // Adam state, flat per layer.
  std::vector<std::vector<double>> mw(mlp.layer_count()), vw(mlp.layer_count());
  std::vector<std::vector<double>> mb(mlp.layer_count()), vb(mlp.layer_count());
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    mw[l].assign(mlp.weights[l].size(), 0.0);
    vw[l].assign(mlp.weights[l].size(), 0.0);
    mb[l].assign(mlp.biases[l].size(), 0.0);
    vb[l].assign(mlp.biases[l].size(), 0.0);
  }
  long t = 0;

  TrainTrace trace;
  trace.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  std::vector<std::size_t> order(n);
  ForwardCache cache;
  std::vector<double> d_out;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Per-epoch shuffle keyed by (seed, epoch): order-independent replay.
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(cfg.seed, 0x73687566ULL + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.index(i)]);
    }

    double epoch_loss = 0.0;
    std::size_t pos = 0;
    std::uint64_t sample_counter = 0;
    while (pos < n) {
      const std::size_t batch_end =
          std::min(pos + static_cast<std::size_t>(cfg.batch_size), n);
      const double inv_batch = 1.0 / static_cast<double>(batch_end - pos);
      Grads grads(mlp);
      for (std::size_t idx = pos; idx < batch_end; ++idx) {
        const auto& row = data.rows[order[idx]];
        ForwardMode mode;
        if (use_dropout) {
          mode.stochastic = true;
          mode.seed = rng::at(cfg.seed, 0x74726eULL,
                              static_cast<std::uint64_t>(epoch) * n +
                                  sample_counter);
        }
        ++sample_counter;
        forward_cached(mlp, row.x, mode, cache);
        Grads sample_grads(mlp);
        epoch_loss +=
            loss_and_output_grad(mlp, cache.a.back(), row.y, cfg.loss, d_out);
        backward(mlp, cache, d_out, sample_grads);
        grads.accumulate(sample_grads, inv_batch);
      }

      ++t;
      for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
        auto update = [&](std::vector<double>& p, std::vector<double>& g,
                          std::vector<double>& m, std::vector<double>& v) {
          for (std::size_t i = 0; i < p.size(); ++i) {
            if (cfg.optimizer == OptimizerKind::Sgd) {
              p[i] -= cfg.learning_rate * g[i];
              continue;
            }
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mh = m[i] / (1.0 - std::pow(cfg.beta1, t));
            const double vh = v[i] / (1.0 - std::pow(cfg.beta2, t));
            p[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.eps);
          }
        };
        update(mlp.weights[l], grads.w[l], mw[l], vw[l]);
        update(mlp.biases[l], grads.b[l], mb[l], vb[l]);
      }
      pos = batch_end;
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDiverged("training loss became non-finite", epoch);
    }
    trace.epoch_loss.push_back(epoch_loss);
  }
  mlp.check_finite();
  return trace;
}

double grad_check(const Mlp& mlp, std::span<const double> x, double y,
                  LossKind loss) {
  Mlp work = mlp;
  ForwardCache cache;
  std::vector<double> d_out;
  forward_cached(work, x, {}, cache);
  Grads analytic(work);
  loss_and_output_grad(work, cache.a.back(), y, loss, d_out);
  backward(work, cache, d_out, analytic);

  const double h = 1e-5;
  double max_rel = 0.0;
  std::size_t flat = 0;
  auto loss_at = [&]() {
    forward_cached(work, x, {}, cache);
    std::vector<double> unused;
    return loss_and_output_grad(work, cache.a.back(), y, loss, unused);
  };
  for (std::size_t l = 0; l < work.layer_count(); ++l) {
    auto probe = [&](std::vector<double>& params, const std::vector<double>& g) {
      for (std::size_t i = 0; i < params.size(); ++i, ++flat) {
        const double orig = params[i];
        params[i] = orig + h;
        const double lp = loss_at();
        params[i] = orig - h;
        const double lm = loss_at();
        params[i] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(g[i]), std::abs(fd), 1e-8});
        max_rel = std::max(max_rel, std::abs(g[i] - fd) / denom);
      }
    };
    probe(work.weights[l], analytic.w[l]);
    probe(work.biases[l], analytic.b[l]);
  }
  return max_rel;
}

std::string to_checkpoint_json(const Mlp& mlp) {
  json doc;
  doc["schema"] = 1;
  doc["widths"] = mlp.widths;
  json acts = json::array();
  for (auto a : mlp.activations) acts.push_back(to_string(a));
  doc["activations"] = acts;
  doc["dropout"] = mlp.dropout;
  doc["head"] = to_string(mlp.head);
  doc["sigma_floor"] = mlp.sigma_floor;
  doc["weights"] = mlp.weights;
  doc["biases"] = mlp.biases;
  return doc.dump();
}

Mlp from_checkpoint_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid checkpoint json: ") + e.what());
  }
  try {
    if (doc.at("schema").get<int>() != 1) {
      throw ParseError("unsupported checkpoint schema");
    }
    Mlp mlp;
    mlp.widths = doc.at("widths").get<std::vector<int>>();
    for (const auto& a : doc.at("activations")) {
      mlp.activations.push_back(activation_from_string(a.get<std::string>()));
    }
    mlp.dropout = doc.at("dropout").get<std::vector<double>>();
    mlp.head = head_from_string(doc.at("head").get<std::string>());
    mlp.sigma_floor = doc.at("sigma_floor").get<double>();
    mlp.weights = doc.at("weights").get<std::vector<std::vector<double>>>();
    mlp.biases = doc.at("biases").get<std::vector<std::vector<double>>>();
    mlp.validate();
    return mlp;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid checkpoint field: ") + e.what());
  }
}

void save_checkpoint(const Mlp& mlp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out << to_checkpoint_json(mlp) << "\n";
}

Mlp load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_checkpoint_json(buf.str());
}

}  // namespace uq::nn
