#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "scenediff/diffusion.hpp"

namespace scenediff {

using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'D', 'C', 'K'};

Eigen::MatrixXf init_matrix(int rows, int cols, std::mt19937_64& rng) {
  const float bound = std::sqrt(6.0f / static_cast<float>(rows + cols));
  std::uniform_real_distribution<float> u(-bound, bound);
  Eigen::MatrixXf m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      m(r, c) = u(rng);
    }
  }
  return m;
}

// Mean over agents with a sorted, fixed-order summation so the result is
// bitwise independent of agent ordering.
Eigen::VectorXf order_free_mean(const std::vector<Eigen::VectorXf>& vecs) {
  const int dim = static_cast<int>(vecs.front().size());
  Eigen::VectorXf out(dim);
  std::vector<float> column(vecs.size());
  for (int d = 0; d < dim; ++d) {
    for (size_t i = 0; i < vecs.size(); ++i) column[i] = vecs[i](d);
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (float v : column) sum += v;
    out(d) = static_cast<float>(sum / static_cast<double>(vecs.size()));
  }
  return out;
}

struct AgentCache {
  Eigen::VectorXf input;
  Eigen::VectorXf h1;
  Eigen::VectorXf h2;
  Eigen::VectorXf concat;
  Eigen::VectorXf y;
  Eigen::VectorXf out;
};

void append(std::vector<float>& flat, const Eigen::MatrixXf& m) {
  flat.insert(flat.end(), m.data(), m.data() + m.size());
}
void append(std::vector<float>& flat, const Eigen::VectorXf& v) {
  flat.insert(flat.end(), v.data(), v.data() + v.size());
}

}  // namespace

Eigen::VectorXf embed_step(int k, int dim) {
  Eigen::VectorXf e(dim);
  const int pairs = dim / 2;
  for (int j = 0; j < pairs; ++j) {
    const double freq = std::pow(10000.0, -static_cast<double>(j) / std::max(1, pairs));
    e(2 * j) = static_cast<float>(std::sin(k * freq));
    e(2 * j + 1) = static_cast<float>(std::cos(k * freq));
  }
  if (dim % 2 == 1) e(dim - 1) = 0.0f;
  return e;
}

Denoiser::Denoiser(const DenoiserArch& arch, uint64_t init_seed, const VarianceSchedule& sched)
    : arch_(arch) {
  if (arch.horizon < 2 || arch.hidden < 1 || arch.k_embed < 2 || arch.cond_dim < 0) {
    throw std::invalid_argument("invalid denoiser architecture");
  }
  set_schedule(sched);
  std::mt19937_64 rng(init_seed);
  w1 = init_matrix(arch.hidden, arch.input_dim(), rng);
  w2 = init_matrix(arch.hidden, arch.hidden, rng);
  w3 = init_matrix(arch.hidden, 2 * arch.hidden, rng);
  w4 = init_matrix(arch.output_dim(), arch.hidden, rng);
  b1 = Eigen::VectorXf::Zero(arch.hidden);
  b2 = Eigen::VectorXf::Zero(arch.hidden);
  b3 = Eigen::VectorXf::Zero(arch.hidden);
  b4 = Eigen::VectorXf::Zero(arch.output_dim());
}

void Denoiser::set_schedule(const VarianceSchedule& sched) {
  skip_scales_.resize(sched.steps());
  for (int k = 1; k <= sched.steps(); ++k) {
    skip_scales_[k - 1] = static_cast<float>(std::sqrt(1.0 - sched.alpha_bar(k)));
  }
}

namespace {

// Shared forward pass; caches stay local to the caller for backprop.
std::vector<AgentCache> forward_agents(const Denoiser& den, const std::vector<float>& tau_k,
                                       int horizon, int agents, int k,
                                       const ConditionFeature& cond) {
  const DenoiserArch& arch = den.arch();
  if (horizon != arch.horizon) {
    throw std::invalid_argument("denoiser horizon mismatch");
  }
  if (static_cast<int>(cond.values.size()) != arch.cond_dim) {
    throw std::invalid_argument("condition feature dimension mismatch");
  }
  if (tau_k.size() != static_cast<size_t>(horizon) * agents * 4) {
    throw std::invalid_argument("trajectory tensor shape mismatch");
  }
  const Eigen::VectorXf kemb = embed_step(k, arch.k_embed);

  std::vector<AgentCache> caches(agents);
  for (int i = 0; i < agents; ++i) {
    AgentCache& cache = caches[i];
    cache.input.resize(arch.input_dim());
    int pos = 0;
    for (int t = 0; t < horizon; ++t) {
      for (int ch = 0; ch < 4; ++ch) {
        cache.input(pos++) = tau_k[(static_cast<size_t>(t) * agents + i) * 4 + ch];
      }
    }
    cache.input.segment(pos, arch.k_embed) = kemb;
    pos += arch.k_embed;
    for (int d = 0; d < arch.cond_dim; ++d) cache.input(pos + d) = cond.values[d];

    cache.h1 = (den.w1 * cache.input + den.b1).array().tanh();
    cache.h2 = (den.w2 * cache.h1 + den.b2).array().tanh();
  }

  std::vector<Eigen::VectorXf> h2s;
  h2s.reserve(agents);
  for (const auto& c : caches) h2s.push_back(c.h2);
  const Eigen::VectorXf pooled = order_free_mean(h2s);

  for (int i = 0; i < agents; ++i) {
    AgentCache& cache = caches[i];
    cache.concat.resize(2 * arch.hidden);
    cache.concat << cache.h2, pooled;
    cache.y = (den.w3 * cache.concat + den.b3).array().tanh();
    cache.out = den.w4 * cache.y + den.b4;
  }
  return caches;
}

}  // namespace

std::vector<float> Denoiser::predict(const std::vector<float>& tau_k, int horizon, int agents,
                                     int k, const ConditionFeature& cond) const {
  const auto caches = forward_agents(*this, tau_k, horizon, agents, k, cond);
  const float skip = skip_scale(k);
  std::vector<float> eps(tau_k.size());
  for (int i = 0; i < agents; ++i) {
    int pos = 0;
    for (int t = 0; t < horizon; ++t) {
      for (int ch = 0; ch < 4; ++ch) {
        const size_t idx = (static_cast<size_t>(t) * agents + i) * 4 + ch;
        eps[idx] = caches[i].out(pos++) + skip * tau_k[idx];
      }
    }
  }
  return eps;
}

float Denoiser::loss_and_gradients(const std::vector<float>& tau_k, int agents, int k,
                                   const ConditionFeature& cond,
                                   const std::vector<float>& target_eps,
                                   std::vector<float>& grads) const {
  const int horizon = arch_.horizon;
  if (target_eps.size() != tau_k.size()) {
    throw std::invalid_argument("target noise shape mismatch");
  }
  const auto caches = forward_agents(*this, tau_k, horizon, agents, k, cond);
  const float skip = skip_scale(k);
  const float inv_n = 1.0f / static_cast<float>(tau_k.size());

  Eigen::MatrixXf dw1 = Eigen::MatrixXf::Zero(w1.rows(), w1.cols());
  Eigen::MatrixXf dw2 = Eigen::MatrixXf::Zero(w2.rows(), w2.cols());
  Eigen::MatrixXf dw3 = Eigen::MatrixXf::Zero(w3.rows(), w3.cols());
  Eigen::MatrixXf dw4 = Eigen::MatrixXf::Zero(w4.rows(), w4.cols());
  Eigen::VectorXf db1 = Eigen::VectorXf::Zero(b1.size());
  Eigen::VectorXf db2 = Eigen::VectorXf::Zero(b2.size());
  Eigen::VectorXf db3 = Eigen::VectorXf::Zero(b3.size());
  Eigen::VectorXf db4 = Eigen::VectorXf::Zero(b4.size());

  const int hidden = arch_.hidden;
  float loss = 0.0f;
  Eigen::VectorXf pooled_grad = Eigen::VectorXf::Zero(hidden);
  std::vector<Eigen::VectorXf> dh2_direct(agents);

  // First pass: output layers; the pooled-context gradient accumulates
  // across agents before it can be redistributed.
  for (int i = 0; i < agents; ++i) {
    const AgentCache& cache = caches[i];
    Eigen::VectorXf dout(arch_.output_dim());
    int pos = 0;
    for (int t = 0; t < horizon; ++t) {
      for (int ch = 0; ch < 4; ++ch) {
        const size_t idx = (static_cast<size_t>(t) * agents + i) * 4 + ch;
        const float r = cache.out(pos) + skip * tau_k[idx] - target_eps[idx];
        loss += r * r;
        dout(pos) = 2.0f * r * inv_n;
        ++pos;
      }
    }
    dw4.noalias() += dout * cache.y.transpose();
    db4 += dout;
    const Eigen::VectorXf dy = w4.transpose() * dout;
    const Eigen::VectorXf da3 =
        dy.array() * (1.0f - cache.y.array().square());
    dw3.noalias() += da3 * cache.concat.transpose();
    db3 += da3;
    const Eigen::VectorXf dconcat = w3.transpose() * da3;
    dh2_direct[i] = dconcat.head(hidden);
    pooled_grad += dconcat.tail(hidden);
  }
  loss *= inv_n;

  // Second pass: encoder layers with the pooled share folded in.
  const Eigen::VectorXf pooled_share = pooled_grad / static_cast<float>(agents);
  for (int i = 0; i < agents; ++i) {
    const AgentCache& cache = caches[i];
    const Eigen::VectorXf dh2 = dh2_direct[i] + pooled_share;
    const Eigen::VectorXf da2 = dh2.array() * (1.0f - cache.h2.array().square());
    dw2.noalias() += da2 * cache.h1.transpose();
    db2 += da2;
    const Eigen::VectorXf dh1 = w2.transpose() * da2;
    const Eigen::VectorXf da1 = dh1.array() * (1.0f - cache.h1.array().square());
    dw1.noalias() += da1 * cache.input.transpose();
    db1 += da1;
  }

  grads.clear();
  grads.reserve(param_count());
  append(grads, dw1);
  append(grads, db1);
  append(grads, dw2);
  append(grads, db2);
  append(grads, dw3);
  append(grads, db3);
  append(grads, dw4);
  append(grads, db4);
  return loss;
}

size_t Denoiser::param_count() const {
  return static_cast<size_t>(w1.size()) + b1.size() + w2.size() + b2.size() + w3.size() +
         b3.size() + w4.size() + b4.size();
}

std::vector<float> Denoiser::flatten_params() const {
  std::vector<float> flat;
  flat.reserve(param_count());
  append(flat, w1);
  append(flat, b1);
  append(flat, w2);
  append(flat, b2);
  append(flat, w3);
  append(flat, b3);
  append(flat, w4);
  append(flat, b4);
  return flat;
}

void Denoiser::load_params(const std::vector<float>& flat) {
  if (flat.size() != param_count()) {
    throw std::invalid_argument("parameter vector size mismatch");
  }
  const float* p = flat.data();
  auto take_m = [&](Eigen::MatrixXf& m) {
    std::memcpy(m.data(), p, sizeof(float) * m.size());
    p += m.size();
  };
  auto take_v = [&](Eigen::VectorXf& v) {
    std::memcpy(v.data(), p, sizeof(float) * v.size());
    p += v.size();
  };
  take_m(w1);
  take_v(b1);
  take_m(w2);
  take_v(b2);
  take_m(w3);
  take_v(b3);
  take_m(w4);
  take_v(b4);
}

// ---------------------------------------------------------------------------
// Tensors and normalization

NormStats compute_norm_stats(const std::vector<Scene>& scenes) {
  if (scenes.empty()) throw std::invalid_argument("cannot compute stats of an empty dataset");
  NormStats stats;
  std::array<double, 4> sum{}, sq{};
  size_t n = 0;
  for (const Scene& scene : scenes) {
    for (const AgentState& s : scene.states) {
      const double ch[4] = {s.x, s.y, s.v, s.theta};
      for (int c = 0; c < 4; ++c) {
        sum[c] += ch[c];
        sq[c] += ch[c] * ch[c];
      }
      ++n;
    }
  }
  for (int c = 0; c < 4; ++c) {
    const double mean = sum[c] / n;
    const double var = std::max(sq[c] / n - mean * mean, 0.0);
    stats.mean[c] = static_cast<float>(mean);
    stats.stdev[c] = static_cast<float>(std::max(std::sqrt(var), 1e-6));
  }
  return stats;
}

std::vector<float> scene_to_tensor(const Scene& scene) {
  std::vector<float> t(scene.states.size() * 4);
  for (size_t i = 0; i < scene.states.size(); ++i) {
    t[i * 4 + 0] = static_cast<float>(scene.states[i].x);
    t[i * 4 + 1] = static_cast<float>(scene.states[i].y);
    t[i * 4 + 2] = static_cast<float>(scene.states[i].v);
    t[i * 4 + 3] = static_cast<float>(scene.states[i].theta);
  }
  return t;
}

std::vector<float> normalize_states(const std::vector<float>& physical, const NormStats& norm) {
  std::vector<float> out(physical.size());
  for (size_t i = 0; i < physical.size(); ++i) {
    const int ch = i % 4;
    out[i] = (physical[i] - norm.mean[ch]) / norm.stdev[ch];
  }
  return out;
}

std::vector<float> denormalize_states(const std::vector<float>& normalized,
                                      const NormStats& norm) {
  std::vector<float> out(normalized.size());
  for (size_t i = 0; i < normalized.size(); ++i) {
    const int ch = i % 4;
    out[i] = normalized[i] * norm.stdev[ch] + norm.mean[ch];
  }
  return out;
}

Scene tensor_to_scene(const std::vector<float>& physical, int horizon,
                      const std::vector<VehicleDims>& dims, double dt,
                      const std::string& map_id) {
  const int agents = static_cast<int>(dims.size());
  if (physical.size() != static_cast<size_t>(horizon) * agents * 4) {
    throw std::invalid_argument("tensor shape does not match horizon/agents");
  }
  Scene scene(horizon, agents, dt);
  scene.dims = dims;
  scene.map_id = map_id;
  for (size_t i = 0; i < scene.states.size(); ++i) {
    scene.states[i] = AgentState(physical[i * 4 + 0], physical[i * 4 + 1],
                                 std::max(0.0f, physical[i * 4 + 2]),
                                 normalize_angle(physical[i * 4 + 3]));
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Checkpoint persistence

void save_checkpoint(const Denoiser& den, const VarianceSchedule& sched, const std::string& path,
                     const std::string& provenance) {
  json header;
  header["schema_version"] = "1.0";
  header["arch"] = {{"horizon", den.arch().horizon},
                    {"hidden", den.arch().hidden},
                    {"k_embed", den.arch().k_embed},
                    {"cond_dim", den.arch().cond_dim}};
  header["norm"] = {{"mean", den.norm_stats.mean}, {"stdev", den.norm_stats.stdev}};
  header["schedule"] = {{"kind", to_string(sched.kind)},
                        {"beta_min", sched.beta_min},
                        {"beta_max", sched.beta_max},
                        {"betas", sched.betas}};
  if (!provenance.empty()) header["provenance"] = provenance;
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 4);
  const uint32_t len = static_cast<uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  const std::vector<float> params = den.flatten_params();
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(float)));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string head(len, '\0');
  in.read(head.data(), len);
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
  const json header = json::parse(head);

  const std::string version = header.at("schema_version").get<std::string>();
  if (version.substr(0, version.find('.')) != "1") {
    throw std::runtime_error("unsupported checkpoint schema version " + version);
  }

  DenoiserArch arch;
  arch.horizon = header.at("arch").at("horizon").get<int>();
  arch.hidden = header.at("arch").at("hidden").get<int>();
  arch.k_embed = header.at("arch").at("k_embed").get<int>();
  arch.cond_dim = header.at("arch").at("cond_dim").get<int>();

  Checkpoint ckpt{Denoiser(arch, 0), VarianceSchedule{}};
  for (int c = 0; c < 4; ++c) {
    ckpt.denoiser.norm_stats.mean[c] = header.at("norm").at("mean")[c].get<float>();
    ckpt.denoiser.norm_stats.stdev[c] = header.at("norm").at("stdev")[c].get<float>();
  }

  const auto& js = header.at("schedule");
  VarianceSchedule& sched = ckpt.schedule;
  sched.kind = schedule_kind_from_string(js.at("kind").get<std::string>());
  sched.beta_min = js.at("beta_min").get<double>();
  sched.beta_max = js.at("beta_max").get<double>();
  sched.betas = js.at("betas").get<std::vector<double>>();
  sched.alphas.resize(sched.betas.size());
  sched.alpha_bars.resize(sched.betas.size());
  double bar = 1.0;
  for (size_t k = 0; k < sched.betas.size(); ++k) {
    sched.alphas[k] = 1.0 - sched.betas[k];
    bar *= sched.alphas[k];
    sched.alpha_bars[k] = bar;
  }

  ckpt.denoiser.set_schedule(sched);

  std::vector<float> params(ckpt.denoiser.param_count());
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(params.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
  ckpt.denoiser.load_params(params);
  return ckpt;
}

}  // namespace scenediff
