#include "evoclass/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "evoclass/errors.hpp"
#include "evoclass/kernels.hpp"
#include "evoclass/rng.hpp"

namespace evoclass {

void SgdConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be > 0");
  if (epochs < 0) throw ArgumentError("epochs must be >= 0");
  if (!(plateau.factor > 0.0 && plateau.factor < 1.0))
    throw ArgumentError("plateau factor must lie in (0,1)");
  if (plateau.patience < 1) throw ArgumentError("plateau patience must be >= 1");
}

void sgd_step(std::span<float> params, std::span<const float> grads, double lr) {
  if (params.size() != grads.size())
    throw ArgumentError("sgd_step: gradient length mismatch");
  const float f = static_cast<float>(lr);
  for (size_t i = 0; i < params.size(); ++i) params[i] -= f * grads[i];
}

void adam_step(std::span<float> params, std::span<const float> grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ArgumentError("adam_step: gradient/state length mismatch");
  state.t += 1;
  const float bc1 = static_cast<float>(
      1.0 - std::pow(static_cast<double>(state.beta1), static_cast<double>(state.t)));
  const float bc2 = static_cast<float>(
      1.0 - std::pow(static_cast<double>(state.beta2), static_cast<double>(state.t)));
  const float f = static_cast<float>(lr);
  for (size_t i = 0; i < params.size(); ++i) {
    const float g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0f - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0f - state.beta2) * g * g;
    const float mhat = state.m[i] / bc1;
    const float vhat = state.v[i] / bc2;
    params[i] -= f * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

double PlateauScheduler::step(double monitored, double lr) {
  if (best_ - monitored >= cfg_.threshold) {
    best_ = monitored;
    bad_epochs_ = 0;
    return lr;
  }
  ++bad_epochs_;
  if (bad_epochs_ >= cfg_.patience) {
    bad_epochs_ = 0;
    return std::max(lr * cfg_.factor, cfg_.min_lr);
  }
  return lr;
}

double reduce_lr_on_plateau(const std::vector<double>& monitor_history,
                            const PlateauConfig& cfg, double initial_lr) {
  PlateauScheduler sched(cfg);
  double lr = initial_lr;
  for (double v : monitor_history) lr = sched.step(v, lr);
  return lr;
}

void TrainWorkspace::ensure(const ArchitectureConfig& cfg) {
  const size_t stages = static_cast<size_t>(cfg.conv_layers) + cfg.fc_sizes.size();
  if (act.size() == stages && !grad_a.empty()) return;
  act.assign(stages, {});
  pre.assign(stages, {});
  const auto chain = cfg.spatial_chain();
  size_t max_n = static_cast<size_t>(cfg.input_channels) * cfg.input_size * cfg.input_size;
  for (int i = 0; i < cfg.conv_layers; ++i) {
    const size_t n = static_cast<size_t>(cfg.channels) * chain[static_cast<size_t>(i) + 1] *
                     chain[static_cast<size_t>(i) + 1];
    act[static_cast<size_t>(i)].resize(n);
    pre[static_cast<size_t>(i)].resize(n);
    max_n = std::max(max_n, n);
  }
  for (size_t j = 0; j < cfg.fc_sizes.size(); ++j) {
    const size_t n = static_cast<size_t>(cfg.fc_sizes[j]);
    act[static_cast<size_t>(cfg.conv_layers) + j].resize(n);
    pre[static_cast<size_t>(cfg.conv_layers) + j].resize(n);
    max_n = std::max(max_n, n);
  }
  grad_a.resize(max_n);
  grad_b.resize(max_n);

  ModelParams shape_probe(cfg);
  size_t max_w = 0, max_b = 0;
  for (const LayerSpec& l : shape_probe.layers()) {
    max_w = std::max(max_w, static_cast<size_t>(l.weight_len()));
    max_b = std::max(max_b, static_cast<size_t>(l.bias_len));
  }
  wscratch.resize(max_w);
  bscratch.resize(max_b);
}

float model_loss_grad(const ModelParams& params, const float* image, int label,
                      TrainWorkspace& ws, std::span<float> grad_accum) {
  const ArchitectureConfig& cfg = params.config();
  if (grad_accum.size() != params.flat().size())
    throw ArgumentError("model_loss_grad: gradient buffer length mismatch");
  ws.ensure(cfg);
  const auto chain = cfg.spatial_chain();
  const int n_conv = cfg.conv_layers;
  const int n_fc = static_cast<int>(cfg.fc_sizes.size());

  // forward, caching pre- and post-activations per stage
  const float* x = image;
  int cin = cfg.input_channels;
  for (int i = 0; i < n_conv; ++i) {
    const int h = chain[static_cast<size_t>(i)];
    const int oh = chain[static_cast<size_t>(i) + 1];
    auto& pre = ws.pre[static_cast<size_t>(i)];
    auto& act = ws.act[static_cast<size_t>(i)];
    kernels::conv2d_forward(x, cin, h, h, params.weights(static_cast<size_t>(i)).data(),
                            params.bias(static_cast<size_t>(i)).data(), cfg.channels,
                            cfg.stride, cfg.pad, pre.data(), oh, oh);
    kernels::relu_forward(pre.data(), static_cast<int>(pre.size()), act.data());
    x = act.data();
    cin = cfg.channels;
  }
  int in_n = cfg.flatten_size();
  for (int j = 0; j < n_fc; ++j) {
    const size_t st = static_cast<size_t>(n_conv + j);
    const int out_n = cfg.fc_sizes[static_cast<size_t>(j)];
    kernels::dense_forward(x, params.weights(st).data(), params.bias(st).data(), out_n,
                           in_n, ws.pre[st].data());
    kernels::relu_forward(ws.pre[st].data(), out_n, ws.act[st].data());
    x = ws.act[st].data();
    in_n = out_n;
  }
  const size_t out_li = params.layers().size() - 1;
  const int k = cfg.num_classes;
  float logits[8];
  kernels::dense_forward(x, params.weights(out_li).data(), params.bias(out_li).data(),
                         k, in_n, logits);

  // softmax cross-entropy, max-subtracted
  double mx = logits[0];
  for (int i = 1; i < k; ++i) mx = std::max(mx, static_cast<double>(logits[i]));
  double sum = 0.0;
  double e[8];
  for (int i = 0; i < k; ++i) {
    e[i] = std::exp(static_cast<double>(logits[i]) - mx);
    sum += e[i];
  }
  float grad_logits[8];
  for (int i = 0; i < k; ++i)
    grad_logits[i] = static_cast<float>(e[i] / sum - (i == label ? 1.0 : 0.0));
  const float loss =
      static_cast<float>(-(static_cast<double>(logits[label]) - mx - std::log(sum)));

  auto accumulate = [&](size_t li, const float* gw, const float* gb) {
    const LayerSpec& l = params.layers()[li];
    float* aw = grad_accum.data() + l.weight_offset;
    const size_t wn = static_cast<size_t>(l.weight_len());
    for (size_t i = 0; i < wn; ++i) aw[i] += gw[i];
    float* ab = grad_accum.data() + l.bias_offset;
    for (int i = 0; i < l.bias_len; ++i) ab[i] += gb[i];
  };

  // output layer
  float* gcur = ws.grad_a.data();
  float* gnext = ws.grad_b.data();
  kernels::dense_backward_weights(grad_logits, x, k, in_n, ws.wscratch.data(),
                                  ws.bscratch.data());
  accumulate(out_li, ws.wscratch.data(), ws.bscratch.data());
  kernels::dense_backward_input(grad_logits, params.weights(out_li).data(), k, in_n,
                                gcur);

  // hidden fc stack, reverse
  for (int j = n_fc - 1; j >= 0; --j) {
    const size_t st = static_cast<size_t>(n_conv + j);
    const int out_n = cfg.fc_sizes[static_cast<size_t>(j)];
    kernels::relu_backward(gcur, ws.pre[st].data(), out_n, gcur);
    const float* below = j > 0 ? ws.act[st - 1].data()
                               : ws.act[static_cast<size_t>(n_conv - 1)].data();
    const int below_n = j > 0 ? cfg.fc_sizes[static_cast<size_t>(j - 1)]
                              : cfg.flatten_size();
    kernels::dense_backward_weights(gcur, below, out_n, below_n, ws.wscratch.data(),
                                    ws.bscratch.data());
    accumulate(st, ws.wscratch.data(), ws.bscratch.data());
    kernels::dense_backward_input(gcur, params.weights(st).data(), out_n, below_n,
                                  gnext);
    std::swap(gcur, gnext);
  }

  // conv stack, reverse; grad wrt the input image is never needed
  for (int i = n_conv - 1; i >= 0; --i) {
    const size_t st = static_cast<size_t>(i);
    const int h = chain[st];
    const int oh = chain[st + 1];
    const int ci = i > 0 ? cfg.channels : cfg.input_channels;
    const float* below = i > 0 ? ws.act[st - 1].data() : image;
    kernels::relu_backward(gcur, ws.pre[st].data(), cfg.channels * oh * oh, gcur);
    kernels::conv2d_backward_weights(gcur, below, ci, h, h, cfg.channels, cfg.stride,
                                     cfg.pad, ws.wscratch.data(), ws.bscratch.data(),
                                     oh, oh);
    accumulate(st, ws.wscratch.data(), ws.bscratch.data());
    if (i > 0) {
      kernels::conv2d_backward_input(gcur, params.weights(st).data(), ci, h, h,
                                     cfg.channels, cfg.stride, cfg.pad, gnext, oh, oh);
      std::swap(gcur, gnext);
    }
  }
  return loss;
}

namespace {

int count_correct(const ModelParams& params, const std::vector<LabeledSample>& samples,
                  Workspace& ws) {
  int correct = 0;
  for (const LabeledSample& s : samples)
    if (predict(params, s.image.ptr(), ws) == static_cast<int>(s.label)) ++correct;
  return correct;
}

}  // namespace

SgdResult train_sgd(const SgdConfig& cfg, ModelParams initial,
                    const std::vector<LabeledSample>& train,
                    const std::vector<LabeledSample>& test) {
  cfg.validate();
  if (train.empty() || test.empty())
    throw ArgumentError("train_sgd: train and test sets must be nonempty");

  ModelParams params = std::move(initial);
  const size_t plen = params.flat().size();
  AdamState adam(plen);
  PlateauScheduler plateau(cfg.plateau);
  TrainWorkspace tws;
  Workspace ws;
  std::vector<float> grad(plen);
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  double lr = cfg.learning_rate;
  SgdResult result{std::move(params), {}};

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive(cfg.shuffle_seed, static_cast<uint64_t>(epoch)));
    for (size_t i = order.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(shuffle_rng.next_int(static_cast<int>(i + 1)));
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0f);
      for (size_t idx = start; idx < end; ++idx) {
        const LabeledSample& s = train[order[idx]];
        loss_sum += model_loss_grad(result.params, s.image.ptr(),
                                    static_cast<int>(s.label), tws, grad);
      }
      const float inv = 1.0f / static_cast<float>(end - start);
      for (float& g : grad) g *= inv;
      if (cfg.optimizer == SgdConfig::Optimizer::sgd)
        sgd_step(result.params.flat(), grad, lr);
      else
        adam_step(result.params.flat(), grad, adam, lr);
    }

    const double train_loss = loss_sum / static_cast<double>(train.size());
    if (!std::isfinite(train_loss))
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
    lr = plateau.step(train_loss, lr);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss;
    rec.train_acc = static_cast<double>(count_correct(result.params, train, ws)) /
                    static_cast<double>(train.size());
    rec.test_acc = static_cast<double>(count_correct(result.params, test, ws)) /
                   static_cast<double>(test.size());
    rec.lr = lr;
    result.history.push_back(rec);
  }
  return result;
}

void write_sgd_history_csv(const std::vector<EpochRecord>& history,
                           const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "epoch,train_loss,train_acc,test_acc,lr\n";
  char buf[160];
  for (const EpochRecord& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.8f,%.6f,%.6f,%.8g\n", r.epoch, r.train_loss,
                  r.train_acc, r.test_acc, r.lr);
    os << buf;
  }
}

}  // namespace evoclass
