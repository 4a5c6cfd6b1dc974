#include "dlalign/neural.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dlalign/binio.hpp"

namespace dlalign {

namespace {

constexpr char kCkptMagic[] = "DLALIGN-CKPT/1\n";
constexpr char kMlpMagic[] = "DLALIGN-MLP/1\n";

double act(double x, Activation a) {
  return a == Activation::kTanh ? std::tanh(x) : std::max(0.0, x);
}

double act_d(double pre, Activation a) {
  if (a == Activation::kTanh) {
    const double t = std::tanh(pre);
    return 1.0 - t * t;
  }
  return pre > 0.0 ? 1.0 : 0.0;
}

void write_spec(BinWriter& w, const MlpSpec& spec) {
  w.u32(static_cast<std::uint32_t>(spec.layer_sizes.size()));
  for (int s : spec.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
  w.u8(static_cast<std::uint8_t>(spec.activation));
}

MlpSpec read_spec(BinReader& r) {
  MlpSpec spec;
  const auto n = r.u32();
  spec.layer_sizes.resize(n);
  for (auto& s : spec.layer_sizes) s = static_cast<int>(r.u32());
  spec.activation = static_cast<Activation>(r.u8());
  spec.validate();
  return spec;
}

}  // namespace

int MlpSpec::param_count() const {
  int total = 0;
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    total += (layer_sizes[l] + 1) * layer_sizes[l + 1];
  return total;
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("MlpSpec needs at least input and output sizes");
  for (int s : layer_sizes)
    if (s < 1) throw std::invalid_argument("layer sizes must be >= 1");
}

Mlp Mlp::create(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  Mlp net{spec, std::vector<double>(static_cast<size_t>(spec.param_count()), 0.0)};
  const double gain = spec.activation == Activation::kRelu ? std::sqrt(2.0) : 1.0;
  size_t idx = 0;
  for (size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const int n_in = spec.layer_sizes[l];
    const int n_out = spec.layer_sizes[l + 1];
    const double bound = gain * std::sqrt(3.0 / n_in);
    for (int i = 0; i < n_in * n_out; ++i)
      net.params[idx++] = rng.uniform(-bound, bound);
    idx += static_cast<size_t>(n_out);  // biases stay zero
  }
  return net;
}

Mlp Mlp::zeros(const MlpSpec& spec) {
  spec.validate();
  return {spec, std::vector<double>(static_cast<size_t>(spec.param_count()), 0.0)};
}

std::vector<double> Mlp::forward(const std::vector<double>& input) const {
  MlpCache cache;
  return forward_cached(*this, input, cache);
}

std::vector<double> forward_cached(const Mlp& net,
                                   const std::vector<double>& input,
                                   MlpCache& cache) {
  const auto& sizes = net.spec.layer_sizes;
  if (static_cast<int>(input.size()) != sizes.front())
    throw std::invalid_argument("input dimension mismatch");
  const size_t n_layers = sizes.size() - 1;
  cache.layer_in.assign(n_layers, {});
  std::vector<double> x = input;
  size_t idx = 0;
  for (size_t l = 0; l < n_layers; ++l) {
    cache.layer_in[l] = x;
    const int n_in = sizes[l];
    const int n_out = sizes[l + 1];
    std::vector<double> y(static_cast<size_t>(n_out));
    const double* w = net.params.data() + idx;
    const double* b = w + static_cast<size_t>(n_in) * n_out;
    for (int o = 0; o < n_out; ++o) {
      double acc = b[o];
      const double* row = w + static_cast<size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) acc += row[i] * x[i];
      y[o] = acc;
    }
    idx += static_cast<size_t>(n_in + 1) * n_out;
    if (l + 1 < n_layers)
      for (auto& v : y) v = act(v, net.spec.activation);
    x = std::move(y);
  }
  return x;
}

void backward(const Mlp& net, const MlpCache& cache,
              const std::vector<double>& output_grad,
              std::vector<double>& param_grad,
              std::vector<double>& input_grad) {
  const auto& sizes = net.spec.layer_sizes;
  const size_t n_layers = sizes.size() - 1;
  if (cache.layer_in.size() != n_layers)
    throw std::invalid_argument("cache does not match network");
  if (param_grad.size() != net.params.size())
    throw std::invalid_argument("param_grad size mismatch");

  // offsets of each layer's parameter block
  std::vector<size_t> offset(n_layers);
  size_t idx = 0;
  for (size_t l = 0; l < n_layers; ++l) {
    offset[l] = idx;
    idx += static_cast<size_t>(sizes[l] + 1) * sizes[l + 1];
  }

  std::vector<double> grad = output_grad;  // d loss / d layer output
  for (size_t l = n_layers; l-- > 0;) {
    const int n_in = sizes[l];
    const int n_out = sizes[l + 1];
    const auto& x = cache.layer_in[l];
    const double* w = net.params.data() + offset[l];
    double* gw = param_grad.data() + offset[l];
    double* gb = gw + static_cast<size_t>(n_in) * n_out;

    // hidden layers: fold the activation derivative into grad.
    // Pre-activations are recomputed from the cached layer input.
    std::vector<double> gpre(static_cast<size_t>(n_out));
    if (l + 1 < n_layers) {
      const double* b = w + static_cast<size_t>(n_in) * n_out;
      for (int o = 0; o < n_out; ++o) {
        double pre = b[o];
        const double* row = w + static_cast<size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) pre += row[i] * x[i];
        gpre[o] = grad[o] * act_d(pre, net.spec.activation);
      }
    } else {
      gpre = grad;
    }

    std::vector<double> gx(static_cast<size_t>(n_in), 0.0);
    for (int o = 0; o < n_out; ++o) {
      const double g = gpre[o];
      gb[o] += g;
      double* grow = gw + static_cast<size_t>(o) * n_in;
      const double* row = w + static_cast<size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) {
        grow[i] += g * x[i];
        gx[i] += g * row[i];
      }
    }
    grad = std::move(gx);
  }
  input_grad = std::move(grad);
}

AdamState AdamState::zeros(std::size_t n) {
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw std::invalid_argument("adam_step size mismatch");
  for (double g : grads)
    if (!std::isfinite(g))
      throw std::invalid_argument("adam_step: non-finite gradient");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

GaussianPolicy GaussianPolicy::create(const MlpSpec& spec, Rng& rng,
                                      double init_log_std) {
  GaussianPolicy p;
  p.mean_net = Mlp::create(spec, rng);
  p.log_std.assign(static_cast<size_t>(spec.output_dim()), init_log_std);
  p.clamp_log_std();
  return p;
}

void GaussianPolicy::clamp_log_std() {
  for (auto& v : log_std) v = std::clamp(v, kLogStdMin, kLogStdMax);
}

std::vector<double> GaussianPolicy::sample(const std::vector<double>& obs,
                                           Rng& rng) const {
  std::vector<double> a = mean_net.forward(obs);
  for (size_t i = 0; i < a.size(); ++i)
    a[i] += std::exp(log_std[i]) * rng.normal();
  return a;
}

double GaussianPolicy::log_prob_given_mean(const std::vector<double>& mu,
                                           const std::vector<double>& action) const {
  double lp = 0.0;
  for (size_t i = 0; i < mu.size(); ++i) {
    const double s = std::exp(log_std[i]);
    const double z = (action[i] - mu[i]) / s;
    lp += -0.5 * z * z - log_std[i] - 0.5 * std::log(2.0 * M_PI);
  }
  return lp;
}

double GaussianPolicy::log_prob(const std::vector<double>& obs,
                                const std::vector<double>& action) const {
  return log_prob_given_mean(mean_net.forward(obs), action);
}

double GaussianPolicy::entropy() const {
  double h = 0.0;
  for (double ls : log_std) h += ls + 0.5 * std::log(2.0 * M_PI * M_E);
  return h;
}

void save_checkpoint(const GaussianPolicy& policy, const std::string& path,
                     const AdamState* opt_state) {
  BinWriter w(path);
  w.magic(kCkptMagic);
  write_spec(w, policy.mean_net.spec);
  w.u64(policy.mean_net.params.size());
  w.f64s(policy.mean_net.params);
  w.u64(policy.log_std.size());
  w.f64s(policy.log_std);
  w.u8(opt_state != nullptr ? 1 : 0);
  if (opt_state != nullptr) {
    w.u64(static_cast<std::uint64_t>(opt_state->t));
    w.u64(opt_state->m.size());
    w.f64s(opt_state->m);
    w.f64s(opt_state->v);
  }
  w.close();
}

GaussianPolicy load_checkpoint(const std::string& path, AdamState* opt_state) {
  BinReader r(path);
  r.magic(kCkptMagic);
  GaussianPolicy p;
  p.mean_net.spec = read_spec(r);
  const auto n = r.u64();
  if (n != static_cast<std::uint64_t>(p.mean_net.spec.param_count()))
    throw std::runtime_error("checkpoint flat length mismatch: " + path);
  p.mean_net.params = r.f64s(n);
  p.log_std = r.f64s(r.u64());
  const bool has_opt = r.u8() != 0;
  if (has_opt) {
    AdamState st;
    st.t = static_cast<std::int64_t>(r.u64());
    const auto m = r.u64();
    st.m = r.f64s(m);
    st.v = r.f64s(m);
    if (opt_state != nullptr) *opt_state = std::move(st);
  }
  return p;
}

void save_mlp(const Mlp& net, const std::string& path) {
  BinWriter w(path);
  w.magic(kMlpMagic);
  write_spec(w, net.spec);
  w.u64(net.params.size());
  w.f64s(net.params);
  w.close();
}

Mlp load_mlp(const std::string& path) {
  BinReader r(path);
  r.magic(kMlpMagic);
  Mlp net;
  net.spec = read_spec(r);
  const auto n = r.u64();
  if (n != static_cast<std::uint64_t>(net.spec.param_count()))
    throw std::runtime_error("mlp flat length mismatch: " + path);
  net.params = r.f64s(n);
  return net;
}

}  // namespace dlalign
